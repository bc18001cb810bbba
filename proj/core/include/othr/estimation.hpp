#pragma once

// Per-target state estimation from association-weighted measurements:
// prediction, stacked multi-mode Kalman update, and an unscented
// Rauch-Tung-Striebel smoother over a window.

#include "othr/association.hpp"
#include "othr/geometry.hpp"
#include "othr/used_vihs.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace othr {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FilterState {
  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
};

class MotionModel {
 public:
  virtual ~MotionModel() = default;
  virtual Eigen::Vector4d propagate(const Eigen::Vector4d& x) const = 0;
  virtual Eigen::Matrix4d jacobian(const Eigen::Vector4d& x) const = 0;
  virtual const Eigen::Matrix4d& process_noise() const = 0;
};

/// Constant velocity in range and bearing.
class ConstantVelocityModel final : public MotionModel {
 public:
  /// `noise_std` holds per-step standard deviations of (ρ, ρ̇, b, ḃ).
  ConstantVelocityModel(double dt_s, const Eigen::Vector4d& noise_std);

  Eigen::Vector4d propagate(const Eigen::Vector4d& x) const override { return F_ * x; }
  Eigen::Matrix4d jacobian(const Eigen::Vector4d&) const override { return F_; }
  const Eigen::Matrix4d& process_noise() const override { return B_; }

  double dt() const { return dt_; }
  const Eigen::Matrix4d& transition() const { return F_; }

 private:
  double dt_;
  Eigen::Matrix4d F_;
  Eigen::Matrix4d B_;
};

FilterState predict(const FilterState& prior, const MotionModel& motion);

struct ModePrediction {
  bool available = false;
  Eigen::Vector3d y = Eigen::Vector3d::Zero();
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  StateJacobian H = StateJacobian::Zero();
};

using ModePredictions = std::array<ModePrediction, kNumModes>;

/// ŷ^γ = u^γ(x⁻, β) and S^γ = H P⁻ Hᵀ + R^γ for every mode whose reflection
/// legs both lie on the lattice.
ModePredictions predict_measurement(const FilterState& pred, const UsedVihs& beta,
                                    const MeasurementModel& model, const ModeCovariances& R);

/// Gate input for the association step; the likelihood mean defaults to ŷ.
TargetPredictions gate_input(const ModePredictions& predictions);

struct EquivalentMeasurement {
  bool present = false;
  Eigen::Vector3d y = Eigen::Vector3d::Zero();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  double weight = 0.0;  // Σω over events assigning a measurement to the slot
};

using EquivalentSet = std::array<EquivalentMeasurement, kNumModes>;

/// Weight masses below this are treated as absent.
inline constexpr double kMinEquivalentWeight = 1e-12;

/// ỹ = Σωy/Σω and R̃ = R/Σω for target `target` (index within the events'
/// assignment vectors).
EquivalentSet synthesize_equivalent(std::span<const AssociationEvent> events, int target,
                                    std::span<const Eigen::Vector3d> measurements,
                                    const ModeCovariances& R);

/// Stacked Kalman update over the present modes, linearised at the prediction.
/// Joseph-form covariance, symmetrised. Returns `pred` unchanged when no
/// equivalent measurement is present.
FilterState update(const FilterState& pred, const EquivalentSet& equivalents,
                   const UsedVihs& beta, const MeasurementModel& model);

struct SmootherGain {
  Eigen::Matrix4d D = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d O = Eigen::Matrix4d::Zero();
  Eigen::Vector4d x_pred = Eigen::Vector4d::Zero();
  Eigen::Matrix4d P_pred = Eigen::Matrix4d::Zero();
};

struct UnscentedParams {
  double sigma = 4.0;      // state dimension used in the spread
  double varsigma = -1.0;  // ς = 3 − σ
};

/// Backward unscented RTS pass over a filtered sequence. The last element is
/// returned unchanged. `gains`, if non-null, receives one entry per step k < N−1.
std::vector<FilterState> urts_smooth(std::span<const FilterState> filtered,
                                     const MotionModel& motion, UnscentedParams params = {},
                                     std::vector<SmootherGain>* gains = nullptr);

/// Lower-triangular L with L Lᵀ = P, adding 1e-9·I once if P is not PD.
Eigen::Matrix4d covariance_sqrt(const Eigen::Matrix4d& P);

}  // namespace othr
