// othrtrack: simulate scenarios, track them, run Monte Carlo experiments and
// verification oracles.

#include "scenario_io.hpp"

#include "othr/config.hpp"
#include "othr/experiment.hpp"
#include "othr/gmrf.hpp"
#include "othr/oracles/oracles.hpp"
#include "othr/vih_inference.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRunFailure = 2;

struct Common {
  std::string config_path;
  std::string out_dir = ".";
};

othr::AppConfig load(const Common& c) {
  return c.config_path.empty() ? othr::AppConfig{} : othr::load_config(c.config_path);
}

int cmd_config(const Common& c) {
  std::cout << othr::to_yaml(load(c));
  return 0;
}

int cmd_simulate(const Common& c, std::optional<std::uint64_t> seed) {
  othr::AppConfig cfg = load(c);
  if (seed) cfg.scenario.seed = *seed;
  const othr::ScenarioModels models(cfg.scenario);
  const othr::Scenario scenario = othr::simulate(cfg.scenario, models);
  for (const auto& p : othr::io::write_scenario(scenario, models, c.out_dir)) {
    std::cout << "wrote " << p.string() << '\n';
  }
  if (scenario.skipped_detections > 0) {
    std::cerr << "note: " << scenario.skipped_detections
              << " detections skipped (reflection point outside the ionosphere grid)\n";
  }
  return 0;
}

int cmd_track(const Common& c, const std::string& input, int case_id, std::optional<int> kappa,
              bool forced) {
  othr::AppConfig cfg = load(c);
  const othr::CaseDefinition cd = othr::case_definition(case_id);
  const othr::ScenarioModels models(cfg.scenario);
  const std::vector<othr::ScanData> scans = othr::io::read_scans(input, cfg.scenario.scans);

  othr::EcmConfig ecm;
  ecm.kappa = kappa.value_or(cfg.experiment.kappa);
  ecm.max_iter = cfg.tracker.max_iter;
  ecm.tol_range_km = cfg.tracker.tol_range_km;
  ecm.tol_bearing_rad = cfg.tracker.tol_bearing_rad;
  ecm.tol_vih_km = cfg.tracker.tol_vih_km;
  ecm.vih_mode = cd.vih_mode;
  ecm.force_true_association = forced;
  ecm.association = models.association;
  ecm.association.event_cap = cfg.tracker.event_cap;
  ecm.lgbp = cfg.tracker.lgbp;
  ecm.unscented = cfg.tracker.unscented;

  const othr::TrackResult result =
      othr::track_scenario(models.view(), ecm, scans, othr::initial_filter_states(cfg.scenario));
  std::filesystem::create_directories(c.out_dir);
  const auto path = othr::io::write_track(result, std::filesystem::path(c.out_dir) / "track.csv");
  std::cout << "wrote " << path.string() << " (" << result.windows << " windows, "
            << (result.track.converged ? "all converged" : "some windows hit max_ecm_iter") << ")\n";
  return 0;
}

int cmd_experiment(const Common& c, std::optional<int> case_id, std::optional<int> runs,
                   std::optional<int> kappa, std::optional<std::uint64_t> seed,
                   std::optional<int> workers, std::optional<int> reference,
                   const std::vector<std::string>& formats, const std::vector<int>& targets,
                   bool forced) {
  othr::AppConfig cfg = load(c);
  if (case_id) cfg.experiment.case_id = *case_id;
  if (runs) cfg.experiment.runs = *runs;
  if (kappa) cfg.experiment.kappa = *kappa;
  if (seed) cfg.experiment.seed = *seed;
  if (workers) cfg.experiment.workers = *workers;
  if (reference) cfg.experiment.reference_case = *reference;
  if (cfg.experiment.case_id < 1 || cfg.experiment.case_id > 6) {
    throw othr::ConfigError("--case must be 1..6");
  }
  if (cfg.experiment.runs < 1) throw othr::ConfigError("--runs must be >= 1");

  othr::ExperimentSpec spec = othr::ExperimentSpec::from_config(cfg);
  spec.force_true_association = forced;
  for (int t : targets) {
    if (t < 1 || t > static_cast<int>(cfg.scenario.targets.size())) {
      throw othr::ConfigError("--targets: no target " + std::to_string(t));
    }
    spec.targets.push_back(t - 1);
  }
  const othr::MetricsReport report = othr::run_experiment(spec);

  std::optional<othr::MetricsReport> ref;
  if (cfg.experiment.reference_case > 0) {
    othr::ExperimentSpec ref_spec = spec;
    ref_spec.case_id = cfg.experiment.reference_case;
    ref = othr::run_experiment(ref_spec);
  }

  bool csv = false, summary = false;
  for (const std::string& f : formats) {
    if (f == "csv") csv = true;
    if (f == "summary") summary = true;
  }
  const std::string stem = "case" + std::to_string(report.case_id) + "_kappa" +
                           std::to_string(report.kappa);
  for (const auto& p : othr::export_report(report, cfg, c.out_dir, stem, csv, summary,
                                           ref ? &*ref : nullptr)) {
    std::cout << "wrote " << p.string() << '\n';
  }
  std::cout << "mean range RMSE " << report.mean_metric(0) << " km over "
            << report.completed_runs() << " runs";
  if (report.excluded_runs > 0) std::cout << " (" << report.excluded_runs << " excluded)";
  std::cout << '\n';

  const double excluded = static_cast<double>(report.excluded_runs) / report.runs;
  if (excluded > cfg.experiment.max_excluded_fraction) {
    std::cerr << "error: " << report.excluded_runs << " of " << report.runs
              << " runs failed; first: " << report.exclusion_reasons.front() << '\n';
    return kExitRunFailure;
  }
  return 0;
}

int oracle_lgbp(const othr::AppConfig& cfg, std::uint64_t seed) {
  const othr::ScenarioModels models(cfg.scenario);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> node(0, models.field.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  othr::CanonicalUpdates updates;
  for (int i = 0; i < 12; ++i) {
    updates.add(othr::NodeIncrement{node(rng), 0.01 * unit(rng), 2.0 * unit(rng)});
  }
  for (int i = 0; i < 12; ++i) {
    const int a = node(rng), b = node(rng);
    const double qa = 0.02 * unit(rng), qb = 0.02 * unit(rng);
    updates.add(othr::RadarCanonicalTerm{a, b, qa, qb, -0.5 * std::sqrt(qa * qb), unit(rng), unit(rng)});
  }
  const othr::PosteriorField post = othr::assemble_posterior(models.field, updates);
  const othr::LgbpResult bp = othr::lgbp(post, {5000, 1e-10, 0.0});
  const othr::Marginals dense = othr::dense_marginals(post.precision, post.potential);
  const double rel =
      ((bp.mean - dense.mean).cwiseAbs().array() / dense.mean.cwiseAbs().array()).maxCoeff();
  std::cout << "lgbp: " << bp.iterations << " iterations, converged=" << bp.converged
            << ", max relative mean error vs dense solve " << rel << '\n';
  return bp.converged && rel < 1e-6 ? 0 : kExitRunFailure;
}

int oracle_association(std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  int mismatches = 0;
  for (int t = 0; t < trials; ++t) {
    std::uniform_int_distribution<int> targets_d(1, 3), meas_d(0, 6);
    const int L = targets_d(rng), M = meas_d(rng);
    othr::GateResult g;
    g.gates.resize(static_cast<std::size_t>(L));
    std::bernoulli_distribution in_gate(0.35);
    for (auto& tg : g.gates) {
      for (auto& mg : tg) {
        mg.available = true;
        mg.probability = 0.99;
        mg.volume = 1.0;
        for (int j = 0; j < M; ++j) {
          if (in_gate(rng)) mg.measurements.push_back(j);
        }
      }
    }
    std::set<std::vector<int>> fast;
    for (const auto& e : othr::enumerate_events(g)) fast.insert(e.assignment);
    if (fast != othr::oracles::brute_force_events(g)) ++mismatches;
  }
  std::cout << "association: " << trials << " trials, " << mismatches << " mismatches\n";
  return mismatches == 0 ? 0 : kExitRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint multitarget tracking and ionospheric height inference for skywave radar"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "YAML configuration (defaults built in)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "Output directory");
  };

  CLI::App* config = app.add_subcommand("config", "Print the effective configuration as YAML");
  add_common(config);

  CLI::App* simulate = app.add_subcommand("simulate", "Generate one scenario and its ground truth");
  add_common(simulate);
  std::optional<std::uint64_t> sim_seed;
  simulate->add_option("--seed", sim_seed, "Scenario seed");

  CLI::App* track = app.add_subcommand("track", "Track a simulated scenario directory");
  add_common(track);
  std::string input;
  int track_case = 3;
  std::optional<int> track_kappa;
  bool track_forced = false;
  track->add_option("--input", input, "Directory written by `simulate`")->required();
  track->add_option("--case", track_case, "Case 1..6 (selects the VIH mode)")
      ->check(CLI::Range(1, 6));
  track->add_option("--kappa", track_kappa, "Window length minus one");
  track->add_flag("--true-association", track_forced, "Use the origin labels instead of the E-step");

  CLI::App* experiment = app.add_subcommand("experiment", "Monte Carlo RMSE study of one case");
  add_common(experiment);
  std::optional<int> case_id, runs, kappa, workers, reference;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> formats{"csv", "summary"};
  bool forced = false;
  std::vector<int> targets;
  experiment->add_option("--case", case_id, "Case 1..6");
  experiment->add_option("--runs", runs, "Monte Carlo runs");
  experiment->add_option("--kappa", kappa, "Window length minus one");
  experiment->add_option("--seed", seed, "Base seed; run r uses seed + r");
  experiment->add_option("--workers", workers, "Worker threads");
  experiment->add_option("--reference-case", reference, "Case for improvement ratios");
  experiment->add_option("--format", formats, "Output formats: csv, summary")
      ->check(CLI::IsMember({"csv", "summary"}))
      ->delimiter(',');
  experiment->add_option("--targets", targets, "1-based targets to simulate (default per case)")
      ->delimiter(',');
  experiment->add_flag("--true-association", forced, "Use the origin labels instead of the E-step");

  CLI::App* oracle = app.add_subcommand("oracle", "Cross-check LGBP and association against oracles");
  add_common(oracle);
  std::string check = "all";
  std::uint64_t oracle_seed = 1;
  int trials = 200;
  oracle->add_option("--check", check, "lgbp, association or all")
      ->check(CLI::IsMember({"lgbp", "association", "all"}));
  oracle->add_option("--seed", oracle_seed, "Seed for random instances");
  oracle->add_option("--trials", trials, "Association trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (config->parsed()) return cmd_config(common);
    if (simulate->parsed()) return cmd_simulate(common, sim_seed);
    if (track->parsed()) return cmd_track(common, input, track_case, track_kappa, track_forced);
    if (experiment->parsed()) {
      return cmd_experiment(common, case_id, runs, kappa, seed, workers, reference, formats, targets,
                            forced);
    }
    if (oracle->parsed()) {
      int rc = 0;
      if (check == "lgbp" || check == "all") rc = std::max(rc, oracle_lgbp(load(common), oracle_seed));
      if (check == "association" || check == "all") rc = std::max(rc, oracle_association(oracle_seed, trials));
      return rc;
    }
  } catch (const othr::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return 0;
}
