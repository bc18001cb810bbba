#include "othr/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace othr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_finite(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / n : kNaN;
}

std::vector<int> selected_targets(const ExperimentSpec& spec) {
  if (!spec.targets.empty()) {
    for (int t : spec.targets) {
      if (t < 0 || t >= static_cast<int>(spec.config.scenario.targets.size())) {
        throw std::invalid_argument("experiment: target index out of range");
      }
    }
    return spec.targets;
  }
  if (case_definition(spec.case_id).default_all_targets) {
    std::vector<int> all(spec.config.scenario.targets.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }
  return {0};
}

EcmConfig ecm_config(const ExperimentSpec& spec, const ScenarioModels& models) {
  const TrackerSettings& t = spec.config.tracker;
  EcmConfig c;
  c.kappa = spec.kappa;
  c.max_iter = t.max_iter;
  c.tol_range_km = t.tol_range_km;
  c.tol_bearing_rad = t.tol_bearing_rad;
  c.tol_vih_km = t.tol_vih_km;
  c.vih_mode = case_definition(spec.case_id).vih_mode;
  c.force_true_association = spec.force_true_association;
  c.association = models.association;
  c.association.event_cap = t.event_cap;
  c.lgbp = t.lgbp;
  c.unscented = t.unscented;
  return c;
}

// Keeps only the returns of target `keep`, relabelled as target 0; other
// targets' returns become clutter labels.
std::vector<ScanData> isolate(const std::vector<ScanData>& scans, int keep) {
  std::vector<ScanData> out = scans;
  for (ScanData& s : out) {
    for (int& o : s.origin) {
      if (o < 0) continue;
      o = o / kNumModes == keep ? o % kNumModes : -1;
    }
  }
  return out;
}

}  // namespace

CaseDefinition case_definition(int case_id) {
  switch (case_id) {
    case 1: return {1, VihMode::Fixed, false, false, "fixed VIHs, single target (fixed-VIH baseline)"};
    case 2: return {2, VihMode::IonosondeOnly, false, false, "ionosonde-only VIH inference, single target"};
    case 3: return {3, VihMode::Full, false, false, "joint ionosonde and radar VIH inference, single target"};
    case 4:
      return {4, VihMode::Fixed, false, true,
              "fixed VIHs, multitarget (fixed-VIH baseline standing in for MD-JPDAF)"};
    case 5: return {5, VihMode::Full, true, true, "full inference, each target tracked in isolation"};
    case 6: return {6, VihMode::Full, false, true, "full inference, all targets tracked jointly"};
    default: throw std::invalid_argument("case id must be 1..6");
  }
}

ExperimentSpec ExperimentSpec::from_config(const AppConfig& config) {
  ExperimentSpec spec;
  spec.config = config;
  spec.case_id = config.experiment.case_id;
  spec.runs = config.experiment.runs;
  spec.kappa = config.experiment.kappa;
  spec.seed = config.experiment.seed;
  spec.workers = config.experiment.workers;
  return spec;
}

RunErrors run_once(const ExperimentSpec& spec, int run_index) {
  const CaseDefinition cd = case_definition(spec.case_id);
  const std::vector<int> chosen = selected_targets(spec);

  ScenarioConfig sc = spec.config.scenario;
  sc.targets.clear();
  for (int t : chosen) sc.targets.push_back(spec.config.scenario.targets[static_cast<std::size_t>(t)]);
  sc.seed = spec.seed + static_cast<std::uint64_t>(run_index);

  const ScenarioModels models(sc);
  Scenario scenario;
  if (spec.zero_noise) {
    ScenarioConfig quiet = sc;
    quiet.radar_noise_std.setZero();
    quiet.process_noise_std.setZero();
    quiet.expected_clutter = 0.0;
    quiet.random_fields = false;
    for (IonosondeConfig& ic : quiet.ionosondes) ic.noise_std_km = 0.0;
    const ScenarioModels quiet_models(quiet);
    scenario = simulate(quiet, quiet_models);
  } else {
    scenario = simulate(sc, models);
  }

  const EcmConfig ecm = ecm_config(spec, models);
  const std::vector<FilterState> initial = initial_filter_states(sc);
  const std::size_t L = sc.targets.size();

  std::vector<TrackResult> tracks;
  if (cd.isolated) {
    for (std::size_t l = 0; l < L; ++l) {
      const std::vector<ScanData> scans = isolate(scenario.scans, static_cast<int>(l));
      const std::vector<FilterState> init{initial[l]};
      tracks.push_back(track_scenario(models.view(), ecm, scans, init));
    }
  } else {
    tracks.push_back(track_scenario(models.view(), ecm, scenario.scans, initial));
  }

  const JointField& field = models.field;
  RunErrors errors(scenario.scans.size(),
                   std::vector<std::array<double, kMetricsPerTarget>>(L));
  for (std::size_t i = 0; i < scenario.scans.size(); ++i) {
    for (std::size_t l = 0; l < L; ++l) {
      const TrackResult& tr = cd.isolated ? tracks[l] : tracks[0];
      const std::size_t lt = cd.isolated ? 0 : l;
      const Eigen::Vector4d& est = tr.track.states[i][lt].x;
      const Eigen::Vector4d& truth = scenario.states[i + 1][l];
      auto& e = errors[i][l];
      e[0] = (est(0) - truth(0)) * (est(0) - truth(0));
      e[1] = (est(2) - truth(2)) * (est(2) - truth(2));
      const auto [cell_t, cell_r] = scenario.cells[i][l];
      for (int s = 0; s < 4; ++s) {
        const Layer layer = s < 2 ? Layer::E : Layer::F;
        const int cell = s % 2 == 0 ? cell_t : cell_r;
        if (cell == 0) {
          e[static_cast<std::size_t>(2 + s)] = kNaN;
          continue;
        }
        const double h_est = tr.track.field_mean[i](field.node(layer, cell));
        const Eigen::VectorXd& h_true = layer == Layer::E ? scenario.h_e[i] : scenario.h_f[i];
        const double d = h_est - h_true(cell - 1);
        e[static_cast<std::size_t>(2 + s)] = d * d;
      }
    }
  }
  return errors;
}

std::vector<ScanRow> compute_rmse(const std::vector<RunErrors>& runs) {
  std::vector<ScanRow> rows;
  if (runs.empty()) return rows;
  const std::size_t scans = runs.front().size();
  const std::size_t targets = scans > 0 ? runs.front().front().size() : 0;
  for (std::size_t k = 0; k < scans; ++k) {
    ScanRow row;
    row.scan = static_cast<int>(k) + 1;
    row.run_count = static_cast<int>(runs.size());
    row.targets.resize(targets);
    for (std::size_t l = 0; l < targets; ++l) {
      for (int m = 0; m < kMetricsPerTarget; ++m) {
        double sum = 0.0;
        int n = 0;
        for (const RunErrors& r : runs) {
          const double v = r[k][l][static_cast<std::size_t>(m)];
          if (std::isnan(v)) continue;
          sum += v;
          ++n;
        }
        row.targets[l][static_cast<std::size_t>(m)] = n > 0 ? std::sqrt(sum / n) : kNaN;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricsReport run_experiment(const ExperimentSpec& spec) {
  if (spec.runs < 1) throw std::invalid_argument("experiment: runs must be >= 1");
  std::vector<std::optional<RunErrors>> results(static_cast<std::size_t>(spec.runs));
  std::vector<std::string> failures(static_cast<std::size_t>(spec.runs));

  auto work = [&](int worker, int stride) {
    for (int r = worker; r < spec.runs; r += stride) {
      try {
        results[static_cast<std::size_t>(r)] = run_once(spec, r);
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(r)] = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min(spec.workers, spec.runs));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (std::thread& t : pool) t.join();
  }

  MetricsReport report;
  report.case_id = spec.case_id;
  report.kappa = spec.kappa;
  report.runs = spec.runs;
  report.seed = spec.seed;
  report.targets = selected_targets(spec);
  report.nominal_vih_std_km = {spec.config.scenario.e_layer.nominal_std_km,
                               spec.config.scenario.f_layer.nominal_std_km};
  std::vector<RunErrors> completed;
  for (int r = 0; r < spec.runs; ++r) {
    if (results[static_cast<std::size_t>(r)]) {
      completed.push_back(std::move(*results[static_cast<std::size_t>(r)]));
    } else {
      ++report.excluded_runs;
      report.exclusion_reasons.push_back("run " + std::to_string(r) + ": " +
                                         failures[static_cast<std::size_t>(r)]);
    }
  }
  report.rows = compute_rmse(completed);
  return report;
}

double MetricsReport::mean_metric(std::size_t target, int metric) const {
  std::vector<double> v;
  for (const ScanRow& row : rows) v.push_back(row.targets.at(target)[static_cast<std::size_t>(metric)]);
  return mean_finite(v);
}

double MetricsReport::mean_metric(int metric) const {
  if (rows.empty()) return kNaN;
  std::vector<double> v;
  for (std::size_t l = 0; l < rows.front().targets.size(); ++l) v.push_back(mean_metric(l, metric));
  return mean_finite(v);
}

double MetricsReport::mean_layer_vih(Layer layer) const {
  const int first = layer == Layer::E ? 2 : 4;
  return mean_finite({mean_metric(first), mean_metric(first + 1)});
}

double improvement_ratio(double reference, double value) {
  return (reference - value) / reference;
}

std::string to_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "scan,run_count";
  const std::size_t targets =
      report.rows.empty() ? report.targets.size() : report.rows.front().targets.size();
  for (std::size_t l = 0; l < targets; ++l) {
    const int label = l < report.targets.size() ? report.targets[l] + 1 : static_cast<int>(l) + 1;
    for (const char* name : kMetricNames) os << ",t" << label << '_' << name;
  }
  os << '\n';
  for (const ScanRow& row : report.rows) {
    os << row.scan << ',' << row.run_count;
    for (const auto& t : row.targets) {
      for (double v : t) os << ',' << format_double(v);
    }
    os << '\n';
  }
  return os.str();
}

MetricsReport parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "scan" || header[1] != "run_count" ||
      (header.size() - 2) % kMetricsPerTarget != 0) {
    throw std::runtime_error("csv: unexpected header");
  }
  MetricsReport report;
  const std::size_t targets = (header.size() - 2) / kMetricsPerTarget;
  for (std::size_t l = 0; l < targets; ++l) {
    const std::string& col = header[2 + l * kMetricsPerTarget];
    const std::size_t us = col.find('_');
    report.targets.push_back(std::stoi(col.substr(1, us - 1)) - 1);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw std::runtime_error("csv: ragged row");
    ScanRow row;
    row.scan = std::stoi(cells[0]);
    row.run_count = std::stoi(cells[1]);
    row.targets.resize(targets);
    for (std::size_t l = 0; l < targets; ++l) {
      for (int m = 0; m < kMetricsPerTarget; ++m) {
        row.targets[l][static_cast<std::size_t>(m)] =
            std::strtod(cells[2 + l * kMetricsPerTarget + static_cast<std::size_t>(m)].c_str(), nullptr);
      }
    }
    report.rows.push_back(std::move(row));
  }
  if (!report.rows.empty()) report.runs = report.rows.front().run_count;
  return report;
}

std::string summary_text(const MetricsReport& report, const AppConfig& config,
                         const MetricsReport* reference) {
  YAML::Emitter out;
  out.SetDoublePrecision(10);
  out << YAML::BeginMap;
  out << YAML::Key << "case" << YAML::Value << report.case_id;
  out << YAML::Key << "case_label" << YAML::Value << case_definition(report.case_id).label;
  out << YAML::Key << "kappa" << YAML::Value << report.kappa;
  out << YAML::Key << "runs" << YAML::Value << report.runs;
  out << YAML::Key << "completed_runs" << YAML::Value << report.completed_runs();
  out << YAML::Key << "excluded_runs" << YAML::Value << report.excluded_runs;
  if (!report.exclusion_reasons.empty()) {
    out << YAML::Key << "exclusion_reasons" << YAML::Value << report.exclusion_reasons;
  }
  out << YAML::Key << "seed" << YAML::Value << report.seed;
  std::vector<int> labels;
  for (int t : report.targets) labels.push_back(t + 1);
  out << YAML::Key << "targets" << YAML::Value << YAML::Flow << labels;

  out << YAML::Key << "aggregate_means" << YAML::Value << YAML::BeginMap;
  for (int m = 0; m < kMetricsPerTarget; ++m) {
    out << YAML::Key << kMetricNames[static_cast<std::size_t>(m)] << YAML::Value
        << report.mean_metric(m);
  }
  out << YAML::Key << "vih_layer_E_km" << YAML::Value << report.mean_layer_vih(Layer::E);
  out << YAML::Key << "vih_layer_F_km" << YAML::Value << report.mean_layer_vih(Layer::F);
  out << YAML::EndMap;

  out << YAML::Key << "per_target_means" << YAML::Value << YAML::BeginSeq;
  for (std::size_t l = 0; l < report.targets.size() && !report.rows.empty(); ++l) {
    out << YAML::BeginMap << YAML::Key << "target" << YAML::Value << report.targets[l] + 1;
    for (int m = 0; m < kMetricsPerTarget; ++m) {
      out << YAML::Key << kMetricNames[static_cast<std::size_t>(m)] << YAML::Value
          << report.mean_metric(l, m);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "vih_improvement_vs_prior_std" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "E" << YAML::Value
      << improvement_ratio(report.nominal_vih_std_km[0], report.mean_layer_vih(Layer::E));
  out << YAML::Key << "F" << YAML::Value
      << improvement_ratio(report.nominal_vih_std_km[1], report.mean_layer_vih(Layer::F));
  out << YAML::EndMap;

  if (reference) {
    out << YAML::Key << "improvement_vs_reference" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "reference_case" << YAML::Value << reference->case_id;
    for (int m = 0; m < kMetricsPerTarget; ++m) {
      out << YAML::Key << kMetricNames[static_cast<std::size_t>(m)] << YAML::Value
          << improvement_ratio(reference->mean_metric(m), report.mean_metric(m));
    }
    out << YAML::EndMap;
  }

  out << YAML::Key << "config" << YAML::Value << YAML::Load(to_yaml(config));
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<std::filesystem::path> export_report(const MetricsReport& report,
                                                 const AppConfig& config,
                                                 const std::filesystem::path& dir,
                                                 const std::string& stem, bool csv, bool summary,
                                                 const MetricsReport* reference) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
    written.push_back(path);
  };
  if (csv) write(dir / (stem + ".csv"), to_csv(report));
  if (summary) write(dir / (stem + ".summary.yaml"), summary_text(report, config, reference));
  return written;
}

}  // namespace othr
