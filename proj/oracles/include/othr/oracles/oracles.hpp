#pragma once

// Reference implementations used only for verification. Each one takes a
// deliberately different route from the production code it checks.

#include "othr/association.hpp"
#include "othr/estimation.hpp"
#include "othr/geometry.hpp"

#include <Eigen/Core>

#include <set>
#include <span>
#include <vector>

namespace othr::oracles {

/// Filters the full cross product of slot choices (empty or any gated
/// measurement) down to events with distinct measurements.
std::set<std::vector<int>> brute_force_events(const GateResult& gate);

/// Slant transform evaluated in 50-digit arithmetic.
Eigen::Vector3d slant_transform_mp(const Eigen::Vector4d& x, double h_t, double h_r, double d);

/// Central differences of the slant transform; step = rel_step · max(|v|, floor).
StateJacobian fd_jacobian_state(const Eigen::Vector4d& x, double h_t, double h_r,
                                const RadarGeometry& geom, double rel_step = 1e-4);
HeightJacobian fd_jacobian_heights(const Eigen::Vector4d& x, double h_t, double h_r,
                                   const RadarGeometry& geom, double rel_step = 1e-4);

/// Chi-square (3 dof) inverse CDF by bisection on the closed-form CDF
/// erf(√(x/2)) − √(2x/π)·e^{−x/2}.
double chi_square3_quantile_bisect(double p);

/// Textbook linear Kalman filter with an optional measurement per step.
struct LinearMeasurement {
  bool present = false;
  Eigen::VectorXd y;
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;
};

std::vector<FilterState> linear_kalman(const FilterState& prior, const Eigen::Matrix4d& F,
                                       const Eigen::Matrix4d& Q,
                                       std::span<const LinearMeasurement> measurements);

/// Closed-form Rauch-Tung-Striebel backward pass for x_{k+1} = F x_k + w.
std::vector<FilterState> linear_rts(std::span<const FilterState> filtered, const Eigen::Matrix4d& F,
                                    const Eigen::Matrix4d& Q);

/// Batch MAP of a linear-Gaussian state sequence by one dense solve of the
/// stacked normal equations. `prior` applies to the first state.
std::vector<Eigen::Vector4d> batch_map_states(const FilterState& prior, const Eigen::Matrix4d& F,
                                              const Eigen::Matrix4d& Q,
                                              std::span<const LinearMeasurement> measurements);

/// Dense Gaussian marginals via full LU inverse (independent of Cholesky).
void dense_lu_marginals(const Eigen::MatrixXd& Q, const Eigen::VectorXd& eta,
                        Eigen::VectorXd& mean, Eigen::VectorXd& variance);

}  // namespace othr::oracles
