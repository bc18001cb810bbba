#pragma once

// Scenario / tracker / experiment configuration loaded from YAML. Unknown keys
// are rejected so typos cannot silently fall back to defaults.

#include "othr/ecm.hpp"
#include "othr/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace othr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackerSettings {
  int max_iter = 20;
  double tol_range_km = 1e-3;
  double tol_bearing_rad = 1e-6;
  double tol_vih_km = 1e-2;
  LgbpOptions lgbp{1000, 1e-8, 0.0};
  std::size_t event_cap = kDefaultEventCap;
  UnscentedParams unscented;
};

struct ExperimentSettings {
  int case_id = 3;
  int runs = 100;
  int kappa = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  int reference_case = 0;  // 0 = none
  double max_excluded_fraction = 0.1;
};

struct AppConfig {
  ScenarioConfig scenario;
  TrackerSettings tracker;
  ExperimentSettings experiment;
};

AppConfig parse_config(const std::string& yaml_text);
AppConfig load_config(const std::filesystem::path& path);

/// YAML rendering of a configuration; parse_config(to_yaml(c)) reproduces c.
std::string to_yaml(const AppConfig& config);

}  // namespace othr
