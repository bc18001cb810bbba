#include "othr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace othr {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

RadarGeometry radar_geometry(const ScenarioConfig& config) {
  return {config.baseline_km, config.grid};
}

Eigen::Matrix3d radar_covariance(const ScenarioConfig& config) {
  return config.radar_noise_std.array().square().matrix().asDiagonal();
}

std::vector<IonosondeSite> make_sites(const ScenarioConfig& config) {
  std::vector<IonosondeSite> sites;
  for (const IonosondeConfig& c : config.ionosondes) {
    IonosondeSite site;
    site.kind = c.kind;
    site.oblique_distance_km = c.oblique_distance_km;
    site.layer = c.layer;
    site.subregion = c.subregion;
    site.noise_var_s2 = delay_variance_from_height_std(c.noise_std_km);
    sites.push_back(site);
  }
  return sites;
}

JointField make_field(const ScenarioConfig& config) {
  return combine(
      build_precision(config.grid, config.e_layer.diag, config.e_layer.offdiag, config.e_layer.mean_km),
      build_precision(config.grid, config.f_layer.diag, config.f_layer.offdiag, config.f_layer.mean_km));
}

double height_at(const Eigen::VectorXd& h, int subregion) { return h(subregion - 1); }

}  // namespace

ClutterBox clutter_box(const ScenarioConfig& config) {
  const RadarGeometry geom = radar_geometry(config);
  ClutterBox box;
  box.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  box.hi = -box.lo;
  const double heights[2] = {config.e_layer.mean_km, config.f_layer.mean_km};
  const double ranges[2] = {config.range_min_km, config.range_max_km};
  const double bearings[2] = {config.azimuth_min_deg * kDegToRad, config.azimuth_max_deg * kDegToRad};
  for (double rho : ranges) {
    for (double b : bearings) {
      for (double h_t : heights) {
        for (double h_r : heights) {
          const Eigen::Vector3d y = slant_transform({rho, 0.0, b, 0.0}, h_t, h_r, geom).vector();
          box.lo = box.lo.cwiseMin(y);
          box.hi = box.hi.cwiseMax(y);
        }
      }
    }
  }
  box.lo(1) = -config.range_rate_bound_km_s;
  box.hi(1) = config.range_rate_bound_km_s;
  return box;
}

ScenarioModels::ScenarioModels(const ScenarioConfig& config)
    : measurement(radar_geometry(config)),
      motion(config.dt_s, config.process_noise_std),
      field(make_field(config)),
      sites(make_sites(config)),
      box(clutter_box(config)) {
  for (const IonosondeSite& site : sites) field.node(site.layer, site.subregion);
  association.p_d.fill(config.detection_probability);
  association.p_g = config.gate_probability;
  const double V = box.volume();
  association.clutter = {config.expected_clutter / V, V};
  association.R.fill(radar_covariance(config));
}

std::mt19937_64 make_stream(std::uint64_t seed, SeedStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<std::vector<Eigen::Vector4d>> generate_targets(const ScenarioConfig& config,
                                                           std::mt19937_64& rng) {
  const ConstantVelocityModel motion(config.dt_s, config.process_noise_std);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<Eigen::Vector4d>> states(static_cast<std::size_t>(config.scans) + 1);
  states[0] = config.targets;
  for (std::size_t k = 1; k < states.size(); ++k) {
    for (const Eigen::Vector4d& prev : states[k - 1]) {
      Eigen::Vector4d noise;
      for (int i = 0; i < 4; ++i) noise(i) = normal(rng) * config.process_noise_std(i);
      states[k].push_back(motion.propagate(prev) + noise);
    }
  }
  return states;
}

void sample_fields(const ScenarioModels& models, int scans, std::mt19937_64& rng,
                   std::vector<Eigen::VectorXd>& h_e, std::vector<Eigen::VectorXd>& h_f) {
  const GmrfSampler e(models.field.e);
  const GmrfSampler f(models.field.f);
  h_e.clear();
  h_f.clear();
  for (int k = 0; k < scans; ++k) {
    h_e.push_back(e.draw(rng));
    h_f.push_back(f.draw(rng));
  }
}

int generate_radar(const ScenarioConfig& config, const ScenarioModels& models,
                   std::span<const Eigen::Vector4d> states, const Eigen::VectorXd& h_e,
                   const Eigen::VectorXd& h_f, std::mt19937_64& detection_rng,
                   std::mt19937_64& clutter_rng, ScanData& out) {
  std::bernoulli_distribution detect(config.detection_probability);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::pair<Eigen::Vector3d, int>> items;
  int skipped = 0;

  for (std::size_t l = 0; l < states.size(); ++l) {
    const auto [cell_t, cell_r] = models.measurement.leg_cells(states[l]);
    for (PropagationMode mode : kAllModes) {
      // Draws are consumed unconditionally so streams stay aligned across configs.
      const bool detected = detect(detection_rng);
      const Eigen::Vector3d noise(normal(detection_rng), normal(detection_rng), normal(detection_rng));
      if (!detected) continue;
      if (cell_t == 0 || cell_r == 0) {
        ++skipped;
        continue;
      }
      const ModeLayers layers = layers_of(mode);
      const double h_t = height_at(layers.transmit == Layer::E ? h_e : h_f, cell_t);
      const double h_r = height_at(layers.receive == Layer::E ? h_e : h_f, cell_r);
      const Eigen::Vector3d y = models.measurement.predict(states[l], h_t, h_r) +
                                config.radar_noise_std.cwiseProduct(noise);
      items.emplace_back(y, static_cast<int>(l) * kNumModes + mode_index(mode));
    }
  }

  std::poisson_distribution<int> count(config.expected_clutter);
  const int n_clutter = config.expected_clutter > 0.0 ? count(clutter_rng) : 0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < n_clutter; ++c) {
    Eigen::Vector3d y;
    for (int i = 0; i < 3; ++i) {
      y(i) = models.box.lo(i) + unit(clutter_rng) * (models.box.hi(i) - models.box.lo(i));
    }
    items.emplace_back(y, -1);
  }

  std::shuffle(items.begin(), items.end(), clutter_rng);
  out.radar.clear();
  out.origin.clear();
  for (const auto& [y, label] : items) {
    out.radar.push_back(y);
    out.origin.push_back(label);
  }
  return skipped;
}

std::vector<IonosondeMeasurement> generate_ionosondes(const ScenarioModels& models,
                                                      const Eigen::VectorXd& h_e,
                                                      const Eigen::VectorXd& h_f, int scan,
                                                      std::mt19937_64& rng) {
  return simulate_soundings(h_e, h_f, models.sites, scan, rng);
}

Scenario simulate(const ScenarioConfig& config, const ScenarioModels& models) {
  Scenario out;
  std::mt19937_64 target_rng = make_stream(config.seed, SeedStream::Targets);
  std::mt19937_64 field_rng = make_stream(config.seed, SeedStream::Fields);
  std::mt19937_64 detection_rng = make_stream(config.seed, SeedStream::Detections);
  std::mt19937_64 clutter_rng = make_stream(config.seed, SeedStream::Clutter);
  std::mt19937_64 iono_rng = make_stream(config.seed, SeedStream::Ionosondes);

  out.states = generate_targets(config, target_rng);
  if (config.random_fields) {
    sample_fields(models, config.scans, field_rng, out.h_e, out.h_f);
  } else {
    out.h_e.assign(static_cast<std::size_t>(config.scans), models.field.e.mean);
    out.h_f.assign(static_cast<std::size_t>(config.scans), models.field.f.mean);
  }
  out.scans.resize(static_cast<std::size_t>(config.scans));
  out.cells.resize(static_cast<std::size_t>(config.scans));
  for (int k = 1; k <= config.scans; ++k) {
    const std::size_t i = static_cast<std::size_t>(k - 1);
    ScanData& scan = out.scans[i];
    scan.scan = k;
    const auto& states = out.states[static_cast<std::size_t>(k)];
    for (const Eigen::Vector4d& x : states) out.cells[i].push_back(models.measurement.leg_cells(x));
    out.skipped_detections += generate_radar(config, models, states, out.h_e[i], out.h_f[i],
                                             detection_rng, clutter_rng, scan);
    scan.soundings = generate_ionosondes(models, out.h_e[i], out.h_f[i], k, iono_rng);
  }
  return out;
}

std::vector<FilterState> initial_filter_states(const ScenarioConfig& config) {
  std::vector<FilterState> out;
  const Eigen::Matrix4d P0 = config.initial_std.array().square().matrix().asDiagonal();
  for (const Eigen::Vector4d& x : config.targets) out.push_back({x, P0});
  return out;
}

}  // namespace othr
