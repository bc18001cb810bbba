#pragma once

// Monte Carlo experiment harness: case definitions, per-scan RMSE
// aggregation, and CSV / summary export.

#include "othr/config.hpp"
#include "othr/ecm.hpp"
#include "othr/sim.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace othr {

/// Tracker behaviour of the six experiment cases.
struct CaseDefinition {
  int id = 3;
  VihMode vih_mode = VihMode::Full;
  bool isolated = false;        // one tracker per target
  bool default_all_targets = false;
  const char* label = "";
};

CaseDefinition case_definition(int case_id);

struct ExperimentSpec {
  AppConfig config;
  int case_id = 3;
  int runs = 1;
  int kappa = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  /// Zero-based target indices into the configured targets; empty uses the
  /// case default (target 1 for Cases 1-3, all targets otherwise).
  std::vector<int> targets;
  bool force_true_association = false;
  bool zero_noise = false;  // noise, clutter and height variation off; heights at prior means

  static ExperimentSpec from_config(const AppConfig& config);
};

inline constexpr int kMetricsPerTarget = 6;
inline constexpr std::array<const char*, kMetricsPerTarget> kMetricNames{
    "rmse_range_km", "rmse_bearing_rad", "rmse_hE_it_km",
    "rmse_hE_ir_km", "rmse_hF_it_km",    "rmse_hF_ir_km"};

struct ScanRow {
  int scan = 0;
  int run_count = 0;
  std::vector<std::array<double, kMetricsPerTarget>> targets;
};

struct MetricsReport {
  int case_id = 0;
  int kappa = 0;
  int runs = 0;
  std::uint64_t seed = 0;
  std::vector<int> targets;  // configured target indices, zero-based
  std::vector<ScanRow> rows;
  int excluded_runs = 0;
  std::vector<std::string> exclusion_reasons;
  std::array<double, 2> nominal_vih_std_km{0.0, 0.0};  // E, F

  int completed_runs() const { return runs - excluded_runs; }
  /// Mean over scans of one metric for one target (NaN-free scans only).
  double mean_metric(std::size_t target, int metric) const;
  /// Mean over targets of mean_metric.
  double mean_metric(int metric) const;
  /// Mean used-VIH RMSE of a layer over targets and both legs.
  double mean_layer_vih(Layer layer) const;
};

/// Squared errors of one run: [scan][target][metric]; NaN marks a metric
/// that could not be evaluated (reflection point off the lattice).
using RunErrors = std::vector<std::vector<std::array<double, kMetricsPerTarget>>>;

/// Simulates and tracks one Monte Carlo run. Throws on tracker failure.
RunErrors run_once(const ExperimentSpec& spec, int run_index);

/// Per-scan RMSE: sqrt of the mean over runs of squared errors. Runs with NaN
/// for a metric are left out of that metric.
std::vector<ScanRow> compute_rmse(const std::vector<RunErrors>& runs);

MetricsReport run_experiment(const ExperimentSpec& spec);

/// (RMSE_ref − RMSE_case) / RMSE_ref.
double improvement_ratio(double reference, double value);

std::string to_csv(const MetricsReport& report);
/// Parses CSV produced by to_csv; header-derived target count.
MetricsReport parse_csv(const std::string& text);

std::string summary_text(const MetricsReport& report, const AppConfig& config,
                          const MetricsReport* reference = nullptr);

/// Writes `<stem>.csv` and/or `<stem>.summary.yaml` under `dir`; returns paths.
std::vector<std::filesystem::path> export_report(const MetricsReport& report,
                                                 const AppConfig& config,
                                                 const std::filesystem::path& dir,
                                                 const std::string& stem, bool csv, bool summary,
                                                 const MetricsReport* reference = nullptr);

}  // namespace othr
