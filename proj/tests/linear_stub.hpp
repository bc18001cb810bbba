#pragma once

// Exactly linear stand-in for the skywave measurement function:
// u(x, h_t, h_r) = A x + a_t h_t + a_r h_r + c. Linearisation is exact, so
// filter, smoother and height updates can be checked against dense solves.

#include "othr/geometry.hpp"

#include <utility>

namespace othr::testing {

class LinearStubModel final : public MeasurementModel {
 public:
  LinearStubModel() {
    A_ << 1.0, 0.0, 0.0, 0.0,
          0.0, 1.0, 0.0, 0.0,
          0.0, 0.0, 1.0, 0.0;
    A_(0, 2) = 50.0;
    a_t_ = Eigen::Vector3d(0.45, 0.0, 0.0);
    a_r_ = Eigen::Vector3d(0.35, 0.0, -2e-4);
    c_ = Eigen::Vector3d(5.0, 0.0, 0.0);
  }

  void set_cells(int transmit, int receive) { cells_ = {transmit, receive}; }
  const StateJacobian& A() const { return A_; }
  const Eigen::Vector3d& offset() const { return c_; }

  Eigen::Vector3d predict(const Eigen::Vector4d& x, double h_t, double h_r) const override {
    return A_ * x + a_t_ * h_t + a_r_ * h_r + c_;
  }
  StateJacobian jacobian_state(const Eigen::Vector4d&, double, double) const override { return A_; }
  HeightJacobian jacobian_heights(const Eigen::Vector4d&, double, double) const override {
    return {a_t_, a_r_};
  }
  std::pair<int, int> leg_cells(const Eigen::Vector4d&) const override { return cells_; }

 private:
  StateJacobian A_;
  Eigen::Vector3d a_t_, a_r_, c_;
  std::pair<int, int> cells_{1, 2};
};

}  // namespace othr::testing
