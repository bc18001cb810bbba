#pragma once

// Multitarget multidetection data association. A target may produce at most
// one detection per propagation mode, and a measurement may be claimed by at
// most one (target, mode) pair. Events are enumerated exhaustively inside the
// validation gates and weighted by prior and measurement likelihood.

#include "othr/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace othr {

class AssociationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EventCapExceeded : public AssociationError {
 public:
  using AssociationError::AssociationError;
};

inline constexpr std::size_t kDefaultEventCap = 100000;

/// Predicted measurement of one (target, mode) slot.
struct SlotPrediction {
  bool available = false;
  Eigen::Vector3d y = Eigen::Vector3d::Zero();  // gate centre
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  /// Mean used in the event likelihood, u(x, β). Equal to `y` unless the
  /// caller evaluates the likelihood at a different state.
  Eigen::Vector3d expected = Eigen::Vector3d::Zero();
};

using TargetPredictions = std::array<SlotPrediction, kNumModes>;

struct ModeGate {
  bool available = false;
  std::vector<int> measurements;  // gated measurement indices, ascending
  double threshold = 0.0;         // Mahalanobis² bound
  double probability = 0.0;       // p_g
  double volume = 0.0;            // ellipsoid volume in measurement units
};

struct GateResult {
  std::vector<std::array<ModeGate, kNumModes>> gates;  // [target][mode]
  int num_targets() const { return static_cast<int>(gates.size()); }
};

/// Inverse CDF of the chi-square distribution with three degrees of freedom.
/// Returns +inf for p >= 1.
double chi_square3_quantile(double p);

GateResult gate(std::span<const TargetPredictions> predictions,
                std::span<const Eigen::Vector3d> measurements, double p_g);

/// Number of modes with at least one gated measurement.
int phi_max(const GateResult& gate, int target);

/// One joint assignment. `assignment[target * 4 + mode]` is a measurement
/// index or -1 when that slot has no detection.
struct AssociationEvent {
  std::vector<int> assignment;
  double prior = 0.0;
  double posterior = 0.0;

  int measurement(int target, PropagationMode mode) const {
    return assignment[static_cast<std::size_t>(target * kNumModes + mode_index(mode))];
  }
};

/// Every event consistent with the gates, distinct modes per target and
/// distinct measurements across the event, including the empty event.
/// Throws EventCapExceeded once more than `cap` events would be produced.
std::vector<AssociationEvent> enumerate_events(const GateResult& gate,
                                               std::size_t cap = kDefaultEventCap);

struct ClutterModel {
  double density = 0.0;  // λ, expected false alarms per unit measurement volume
  double volume = 0.0;   // V, measurement-space volume; caps the gate volume
};

using ModeProbabilities = std::array<double, kNumModes>;

/// Unnormalised log prior of one event (the δ constant excluded).
double event_log_prior(const AssociationEvent& event, const ModeProbabilities& p_d,
                       const GateResult& gate, const ClutterModel& clutter);

/// Sets `prior` on every event, normalised to sum to one.
void assign_priors(std::vector<AssociationEvent>& events, const ModeProbabilities& p_d,
                   const GateResult& gate, const ClutterModel& clutter);

using ModeCovariances = std::array<Eigen::Matrix3d, kNumModes>;

/// log Π N(y(ϱ); u^ε(x, β), R^ε) over the assigned slots; 0 for the empty event.
double event_log_likelihood(const AssociationEvent& event,
                            std::span<const TargetPredictions> predictions,
                            std::span<const Eigen::Vector3d> measurements,
                            const ModeCovariances& R);

inline double event_likelihood(const AssociationEvent& event,
                               std::span<const TargetPredictions> predictions,
                               std::span<const Eigen::Vector3d> measurements,
                               const ModeCovariances& R) {
  return std::exp(event_log_likelihood(event, predictions, measurements, R));
}

/// ω ∝ π · likelihood, evaluated in log space. Falls back to the priors when
/// every event has zero prior-weighted likelihood.
void posterior_weights(std::vector<AssociationEvent>& events,
                       std::span<const double> log_likelihoods);

struct AssociationParams {
  ModeProbabilities p_d{0.7, 0.7, 0.7, 0.7};
  double p_g = 0.9973;
  ClutterModel clutter;
  ModeCovariances R{Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity(),
                    Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()};
  std::size_t event_cap = kDefaultEventCap;
};

/// Targets whose gates share no measurement are independent; events factor
/// over the connected components.
struct AssociationCluster {
  std::vector<int> targets;                 // global target indices
  std::vector<AssociationEvent> events;     // assignments over local targets
};

struct ScanAssociation {
  GateResult gate;
  std::vector<AssociationCluster> clusters;
  std::size_t event_count = 0;  // sum over clusters
  double weight_entropy = 0.0;  // entropy of the joint posterior, nats
};

/// Complete E-step for one scan: gate, cluster, enumerate, weight.
ScanAssociation associate_scan(std::span<const TargetPredictions> predictions,
                               std::span<const Eigen::Vector3d> measurements,
                               const AssociationParams& params);

}  // namespace othr
