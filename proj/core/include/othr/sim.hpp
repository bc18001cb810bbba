#pragma once

// Synthetic scenario generation: target trajectories, per-scan height fields,
// multipath radar detections with clutter, and ionosonde soundings.

#include "othr/association.hpp"
#include "othr/ecm.hpp"
#include "othr/estimation.hpp"
#include "othr/geometry.hpp"
#include "othr/gmrf.hpp"
#include "othr/iono_obs.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace othr {

struct LayerPrior {
  double diag = 0.0;
  double offdiag = 0.0;
  double mean_km = 0.0;
  double nominal_std_km = 0.0;  // reference spread used for improvement ratios
};

struct IonosondeConfig {
  int subregion = 1;
  Layer layer = Layer::E;
  IonosondeSite::Kind kind = IonosondeSite::Kind::Vertical;
  double oblique_distance_km = 0.0;
  double noise_std_km = 10.0;  // height-equivalent
};

struct ScenarioConfig {
  int scans = 30;
  double dt_s = 20.0;
  double range_min_km = 1000.0;
  double range_max_km = 1400.0;
  double azimuth_min_deg = 4.0;
  double azimuth_max_deg = 12.0;
  double baseline_km = 50.0;
  LatticeGrid grid{8, 18, 480.0, 30.0, 15.0};
  double detection_probability = 0.7;
  double expected_clutter = 50.0;
  double range_rate_bound_km_s = 0.4;
  Eigen::Vector3d radar_noise_std{5.0, 0.001, 0.003};
  Eigen::Vector4d process_noise_std{0.1, 2e-3, 2e-4, 4e-6};
  Eigen::Vector4d initial_std{1.0, 0.01, 1e-3, 1e-5};
  double gate_probability = 0.9973;
  LayerPrior e_layer{0.082, -0.0205, 110.0, 11.0};
  LayerPrior f_layer{0.0587, -0.0147, 220.0, 13.0};
  std::vector<IonosondeConfig> ionosondes{
      {1, Layer::E}, {1, Layer::F}, {73, Layer::E}, {73, Layer::F}};
  std::vector<Eigen::Vector4d> targets{
      {1100.0, 0.15, 0.09472, 1.52665e-4},
      {1190.0, -0.14, 0.11432, 1.07266e-4},
      {1210.0, -0.185, 0.16401, -5.79865e-5},
      {1120.0, 0.08, 0.20201, -1.55665e-4},
      {1090.0, 0.185, 0.16251, -5.25665e-5},
  };
  std::uint64_t seed = 1;
  /// When false every scan uses the prior-mean heights (noise-free studies).
  bool random_fields = true;

  static ScenarioConfig table2() { return {}; }
};

/// Axis-aligned measurement-space region clutter is drawn from.
struct ClutterBox {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();

  double volume() const { return (hi - lo).prod(); }
  bool contains(const Eigen::Vector3d& y) const {
    return (y.array() >= lo.array()).all() && (y.array() <= hi.array()).all();
  }
};

ClutterBox clutter_box(const ScenarioConfig& config);

/// Everything a tracker needs that follows from the configuration.
struct ScenarioModels {
  OthrMeasurementModel measurement;
  ConstantVelocityModel motion;
  JointField field;
  std::vector<IonosondeSite> sites;
  ClutterBox box;
  AssociationParams association;

  explicit ScenarioModels(const ScenarioConfig& config);
  TrackerModels view() const { return {&measurement, &motion, &field, sites}; }
};

struct Scenario {
  std::vector<std::vector<Eigen::Vector4d>> states;  // [0..scans][target]
  std::vector<Eigen::VectorXd> h_e;                   // [scan-1], scans 1..N
  std::vector<Eigen::VectorXd> h_f;
  std::vector<ScanData> scans;                        // scans 1..N
  std::vector<std::vector<std::pair<int, int>>> cells;  // [scan-1][target] (i_t, i_r), 0 = off grid
  int skipped_detections = 0;
};

enum class SeedStream : std::uint64_t { Targets = 1, Fields, Detections, Clutter, Ionosondes };

/// Independent engine for one named stream of a run.
std::mt19937_64 make_stream(std::uint64_t seed, SeedStream stream);

std::vector<std::vector<Eigen::Vector4d>> generate_targets(const ScenarioConfig& config,
                                                           std::mt19937_64& rng);

/// One independent draw of both layers per scan.
void sample_fields(const ScenarioModels& models, int scans, std::mt19937_64& rng,
                   std::vector<Eigen::VectorXd>& h_e, std::vector<Eigen::VectorXd>& h_f);

/// Detections and clutter for one scan. Measurements are shuffled; `origin`
/// keeps the labels. Returns the number of detections skipped off-grid.
int generate_radar(const ScenarioConfig& config, const ScenarioModels& models,
                   std::span<const Eigen::Vector4d> states, const Eigen::VectorXd& h_e,
                   const Eigen::VectorXd& h_f, std::mt19937_64& detection_rng,
                   std::mt19937_64& clutter_rng, ScanData& out);

std::vector<IonosondeMeasurement> generate_ionosondes(const ScenarioModels& models,
                                                      const Eigen::VectorXd& h_e,
                                                      const Eigen::VectorXd& h_f, int scan,
                                                      std::mt19937_64& rng);

Scenario simulate(const ScenarioConfig& config, const ScenarioModels& models);

/// Initial tracker states: configured states with covariance diag(initial_std²).
std::vector<FilterState> initial_filter_states(const ScenarioConfig& config);

}  // namespace othr
