#pragma once

// Expectation-conditional maximisation over a window of scans: association
// (E-step), target states given heights (CM-1), heights given states (CM-2).

#include "othr/association.hpp"
#include "othr/estimation.hpp"
#include "othr/gmrf.hpp"
#include "othr/iono_obs.hpp"
#include "othr/used_vihs.hpp"
#include "othr/vih_inference.hpp"

#include <Eigen/Core>

#include <limits>
#include <span>
#include <vector>

namespace othr {

enum class VihMode {
  Fixed,          // heights pinned at the prior means, CM-2 skipped
  IonosondeOnly,  // CM-2 uses ionosonde soundings only
  Full,           // CM-2 uses ionosonde soundings and radar equivalents
};

struct ScanData {
  int scan = 0;
  std::vector<Eigen::Vector3d> radar;
  std::vector<IonosondeMeasurement> soundings;
  /// Per radar measurement: target * 4 + mode for target returns, -1 for
  /// clutter. Only read when the true association is forced.
  std::vector<int> origin;
};

struct EcmConfig {
  int kappa = 1;
  int max_iter = 20;
  double tol_range_km = 1e-3;
  double tol_bearing_rad = 1e-6;
  double tol_vih_km = 1e-2;
  VihMode vih_mode = VihMode::Full;
  bool force_true_association = false;
  /// Evaluates the window log posterior after every iteration (one extra
  /// association pass per scan).
  bool track_objective = false;
  AssociationParams association;
  LgbpOptions lgbp{1000, 1e-8, 0.0};
  UnscentedParams unscented;
};

/// Models shared by every window. All pointers must outlive the tracker.
struct TrackerModels {
  const MeasurementModel* measurement = nullptr;
  const MotionModel* motion = nullptr;
  const JointField* field = nullptr;
  std::span<const IonosondeSite> sites;
};

struct IterationDiagnostics {
  int iteration = 0;
  std::size_t event_count = 0;
  double weight_entropy = 0.0;
  bool lgbp_converged = true;
  int lgbp_iterations = 0;
  double range_change_km = 0.0;
  double bearing_change_rad = 0.0;
  double vih_change_km = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct EcmResult {
  std::vector<std::vector<FilterState>> states;  // [scan][target], smoothed
  std::vector<std::vector<UsedVihs>> used_vihs;  // [scan][target]
  std::vector<Eigen::VectorXd> field_mean;       // [scan], joint-field marginal means
  std::vector<Eigen::VectorXd> field_variance;   // [scan]
  std::vector<IterationDiagnostics> iterations;
  bool converged = false;
};

/// Runs ECM on one window. `prior` holds each target's predicted state at the
/// first scan of the window.
EcmResult run_window(const TrackerModels& models, const EcmConfig& config,
                     std::span<const ScanData> window, std::span<const FilterState> prior);

/// Prior for the next window: the previous terminal smoothed state (or the
/// configured initial state) advanced by one step of the motion model.
std::vector<FilterState> initialize(std::span<const FilterState> terminal,
                                    const MotionModel& motion);

/// β^{(1)}: prior means at the subregions the state reflects from.
UsedVihs initial_used_vihs(const Eigen::Vector4d& x, const JointField& field,
                           const MeasurementModel& model);

/// Log posterior of a window iterate, up to a constant: dynamics prior, field
/// prior, ionosonde likelihood and the association mixture likelihood.
double window_objective(const TrackerModels& models, const EcmConfig& config,
                        std::span<const ScanData> window, std::span<const FilterState> prior,
                        const EcmResult& iterate);

struct TrackResult {
  EcmResult track;  // concatenated over windows
  std::vector<std::vector<IterationDiagnostics>> window_diagnostics;
  int windows = 0;
};

/// Tracks a whole scenario with non-overlapping windows of κ+1 scans.
/// `initial` holds the states at the scan before the first entry of `scans`.
TrackResult track_scenario(const TrackerModels& models, const EcmConfig& config,
                           std::span<const ScanData> scans, std::span<const FilterState> initial);

}  // namespace othr
