#include "othr/ecm.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace othr {

namespace {

double layer_mean(const JointField& field, Layer layer) {
  const GmrfField& f = layer == Layer::E ? field.e : field.f;
  return f.mean.size() > 0 ? f.mean.mean() : 0.0;
}

// β at the cells `x` reflects from, read from a height field. Legs outside the
// lattice carry the layer's average prior mean so predictions stay finite.
UsedVihs used_vihs_from_field(const Eigen::Vector4d& x, const Eigen::VectorXd& mean,
                              const Eigen::VectorXd& variance, const JointField& field,
                              const MeasurementModel& model) {
  UsedVihs beta;
  resolve_subregions(beta, x, model);
  for (UsedVih& entry : beta.entries) {
    entry.height_km = layer_mean(field, entry.layer);
    entry.variance_km2 = 0.0;
  }
  return extract_used_vihs(mean, variance, field, beta);
}

double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

struct EStep {
  std::vector<EquivalentSet> equivalents;  // [target]
  std::size_t events = 0;
  double entropy = 0.0;
  double log_mixture = 0.0;
};

EStep e_step(const TrackerModels& models, const EcmConfig& config, const ScanData& scan,
             std::span<const FilterState> states, std::span<const UsedVihs> betas,
             bool want_mixture) {
  const std::size_t L = states.size();
  const AssociationParams& ap = config.association;
  std::vector<TargetPredictions> preds(L);
  for (std::size_t l = 0; l < L; ++l) {
    preds[l] = gate_input(predict_measurement(states[l], betas[l], *models.measurement, ap.R));
  }

  EStep out;
  out.equivalents.resize(L);
  if (config.force_true_association) {
    AssociationEvent event;
    event.assignment.assign(L * kNumModes, -1);
    event.prior = 1.0;
    event.posterior = 1.0;
    for (std::size_t j = 0; j < scan.origin.size() && j < scan.radar.size(); ++j) {
      const int slot = scan.origin[j];
      if (slot < 0) continue;
      const std::size_t l = static_cast<std::size_t>(slot / kNumModes);
      const std::size_t m = static_cast<std::size_t>(slot % kNumModes);
      if (l >= L || !preds[l][m].available) continue;
      event.assignment[static_cast<std::size_t>(slot)] = static_cast<int>(j);
    }
    const std::vector<AssociationEvent> events{event};
    for (std::size_t l = 0; l < L; ++l) {
      out.equivalents[l] = synthesize_equivalent(events, static_cast<int>(l), scan.radar, ap.R);
    }
    out.events = 1;
    if (want_mixture) out.log_mixture = event_log_likelihood(event, preds, scan.radar, ap.R);
    return out;
  }

  const ScanAssociation assoc = associate_scan(preds, scan.radar, ap);
  out.events = assoc.event_count;
  out.entropy = assoc.weight_entropy;
  for (const AssociationCluster& cluster : assoc.clusters) {
    for (std::size_t li = 0; li < cluster.targets.size(); ++li) {
      out.equivalents[static_cast<std::size_t>(cluster.targets[li])] =
          synthesize_equivalent(cluster.events, static_cast<int>(li), scan.radar, ap.R);
    }
    if (want_mixture) {
      std::vector<TargetPredictions> sub;
      for (int l : cluster.targets) sub.push_back(preds[static_cast<std::size_t>(l)]);
      std::vector<double> terms;
      terms.reserve(cluster.events.size());
      for (const AssociationEvent& e : cluster.events) {
        terms.push_back(std::log(e.prior) + event_log_likelihood(e, sub, scan.radar, ap.R));
      }
      out.log_mixture += log_sum_exp(terms);
    }
  }
  return out;
}

struct FieldEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  bool converged = true;
  int iterations = 0;
};

FieldEstimate cm_step_heights(const TrackerModels& models, const EcmConfig& config,
                              const ScanData& scan, std::span<const FilterState> states,
                              std::span<const EquivalentSet> equivalents) {
  const JointField& field = *models.field;
  CanonicalUpdates updates;
  if (config.vih_mode == VihMode::Full) {
    for (std::size_t l = 0; l < states.size(); ++l) {
      const auto [cell_t, cell_r] = models.measurement->leg_cells(states[l].x);
      if (cell_t == 0 || cell_r == 0) continue;
      for (PropagationMode mode : kAllModes) {
        const EquivalentMeasurement& eq = equivalents[l][static_cast<std::size_t>(mode_index(mode))];
        if (!eq.present) continue;
        const ModeLayers layers = layers_of(mode);
        const int node_t = field.node(layers.transmit, cell_t);
        const int node_r = field.node(layers.receive, cell_r);
        updates.add(canonical_update_radar(eq.y, eq.R, states[l].x, field.mean(node_t),
                                           field.mean(node_r), node_t, node_r,
                                           *models.measurement));
      }
    }
  }
  for (const IonosondeMeasurement& z : scan.soundings) {
    const IonosondeSite& site = models.sites[static_cast<std::size_t>(z.site)];
    const int node = field.node(site.layer, site.subregion);
    updates.add(canonical_update_iono(z.delay_s, site, field.mean(node), node));
  }
  const LgbpResult res = lgbp(assemble_posterior(field, updates), config.lgbp);
  return {res.mean, res.variance, res.converged, res.iterations};
}

}  // namespace

UsedVihs initial_used_vihs(const Eigen::Vector4d& x, const JointField& field,
                           const MeasurementModel& model) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(field.size());
  return used_vihs_from_field(x, field.mean, zero, field, model);
}

std::vector<FilterState> initialize(std::span<const FilterState> terminal,
                                    const MotionModel& motion) {
  std::vector<FilterState> out;
  out.reserve(terminal.size());
  for (const FilterState& s : terminal) out.push_back(predict(s, motion));
  return out;
}

double window_objective(const TrackerModels& models, const EcmConfig& config,
                        std::span<const ScanData> window, std::span<const FilterState> prior,
                        const EcmResult& iterate) {
  const MotionModel& motion = *models.motion;
  const JointField& field = *models.field;
  const std::size_t T = window.size();
  const std::size_t L = prior.size();
  double total = 0.0;

  Eigen::LLT<Eigen::Matrix4d> b_llt(motion.process_noise());
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::LLT<Eigen::Matrix4d> p_llt(prior[l].P);
    const Eigen::Vector4d d0 = iterate.states[0][l].x - prior[l].x;
    total -= 0.5 * d0.dot(p_llt.solve(d0));
    for (std::size_t k = 1; k < T; ++k) {
      const Eigen::Vector4d d =
          iterate.states[k][l].x - motion.propagate(iterate.states[k - 1][l].x);
      total -= 0.5 * d.dot(b_llt.solve(d));
    }
  }

  for (std::size_t k = 0; k < T; ++k) {
    const Eigen::VectorXd& h = iterate.field_mean[k];
    const Eigen::VectorXd dh = h - field.mean;
    total -= 0.5 * dh.dot(field.precision * dh);
    for (const IonosondeMeasurement& z : window[k].soundings) {
      const IonosondeSite& site = models.sites[static_cast<std::size_t>(z.site)];
      const double r = z.delay_s - site.delay(h(field.node(site.layer, site.subregion)));
      total -= 0.5 * r * r / site.noise_var_s2;
    }
    total += e_step(models, config, window[k], iterate.states[k], iterate.used_vihs[k], true)
                 .log_mixture;
  }
  return total;
}

EcmResult run_window(const TrackerModels& models, const EcmConfig& config,
                     std::span<const ScanData> window, std::span<const FilterState> prior) {
  if (window.empty()) throw std::invalid_argument("run_window: empty window");
  if (prior.empty()) throw std::invalid_argument("run_window: no targets");
  if (config.max_iter < 1) throw std::invalid_argument("run_window: max_iter must be >= 1");

  const MeasurementModel& model = *models.measurement;
  const MotionModel& motion = *models.motion;
  const JointField& field = *models.field;
  const std::size_t T = window.size();
  const std::size_t L = prior.size();

  EcmResult result;
  result.states.assign(T, std::vector<FilterState>(L));
  result.used_vihs.assign(T, std::vector<UsedVihs>(L));
  result.field_mean.assign(T, field.mean);
  result.field_variance.assign(T, Eigen::VectorXd::Zero(field.size()));

  FieldEstimate fixed_field;
  if (config.vih_mode == VihMode::Fixed) {
    const LgbpResult res = lgbp(field.precision, field.potential, config.lgbp);
    fixed_field = {field.mean, res.variance, res.converged, res.iterations};
    std::fill(result.field_variance.begin(), result.field_variance.end(), res.variance);
  }

  std::vector<std::vector<EquivalentSet>> equivalents(T);
  std::vector<std::vector<FilterState>> filtered(T, std::vector<FilterState>(L));

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    IterationDiagnostics diag;
    diag.iteration = iter;

    // E-step: online during the first forward pass, then at the smoothed iterate.
    if (iter > 1) {
      for (std::size_t k = 0; k < T; ++k) {
        EStep e = e_step(models, config, window[k], result.states[k], result.used_vihs[k], false);
        equivalents[k] = std::move(e.equivalents);
        diag.event_count += e.events;
        diag.weight_entropy += e.entropy;
      }
    }

    // CM-1: forward filter with the equivalent measurements, then smooth.
    for (std::size_t k = 0; k < T; ++k) {
      std::vector<FilterState> preds(L);
      for (std::size_t l = 0; l < L; ++l) {
        preds[l] = k == 0 ? prior[l] : predict(filtered[k - 1][l], motion);
      }
      if (iter == 1) {
        for (std::size_t l = 0; l < L; ++l) {
          result.used_vihs[k][l] = initial_used_vihs(preds[l].x, field, model);
        }
        EStep e = e_step(models, config, window[k], preds, result.used_vihs[k], false);
        equivalents[k] = std::move(e.equivalents);
        diag.event_count += e.events;
        diag.weight_entropy += e.entropy;
      }
      for (std::size_t l = 0; l < L; ++l) {
        filtered[k][l] = update(preds[l], equivalents[k][l], result.used_vihs[k][l], model);
      }
    }

    const std::vector<std::vector<FilterState>> previous_states = result.states;
    const std::vector<std::vector<UsedVihs>> previous_vihs = result.used_vihs;
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<FilterState> seq(T);
      for (std::size_t k = 0; k < T; ++k) seq[k] = filtered[k][l];
      const std::vector<FilterState> smoothed = urts_smooth(seq, motion, config.unscented);
      for (std::size_t k = 0; k < T; ++k) result.states[k][l] = smoothed[k];
    }

    // CM-2: heights given the new states.
    for (std::size_t k = 0; k < T; ++k) {
      FieldEstimate fe = config.vih_mode == VihMode::Fixed
                             ? fixed_field
                             : cm_step_heights(models, config, window[k], result.states[k],
                                               equivalents[k]);
      diag.lgbp_converged = diag.lgbp_converged && fe.converged;
      diag.lgbp_iterations = std::max(diag.lgbp_iterations, fe.iterations);
      for (std::size_t l = 0; l < L; ++l) {
        result.used_vihs[k][l] =
            used_vihs_from_field(result.states[k][l].x, fe.mean, fe.variance, field, model);
      }
      result.field_mean[k] = std::move(fe.mean);
      result.field_variance[k] = std::move(fe.variance);
    }

    for (std::size_t k = 0; k < T; ++k) {
      for (std::size_t l = 0; l < L; ++l) {
        const Eigen::Vector4d& a = result.states[k][l].x;
        const Eigen::Vector4d& b = iter == 1 ? a : previous_states[k][l].x;
        diag.range_change_km = std::max(diag.range_change_km, std::abs(a(0) - b(0)));
        diag.bearing_change_rad = std::max(diag.bearing_change_rad, std::abs(a(2) - b(2)));
        if (iter == 1) continue;
        for (std::size_t s = 0; s < 4; ++s) {
          const UsedVih& now = result.used_vihs[k][l].entries[s];
          const UsedVih& before = previous_vihs[k][l].entries[s];
          if (now.valid() && before.valid()) {
            diag.vih_change_km =
                std::max(diag.vih_change_km, std::abs(now.height_km - before.height_km));
          }
        }
      }
    }
    if (config.track_objective) {
      diag.objective = window_objective(models, config, window, prior, result);
    }
    result.iterations.push_back(diag);

    if (iter > 1 && diag.range_change_km < config.tol_range_km &&
        diag.bearing_change_rad < config.tol_bearing_rad && diag.vih_change_km < config.tol_vih_km) {
      result.converged = true;
      break;
    }
  }
  return result;
}

TrackResult track_scenario(const TrackerModels& models, const EcmConfig& config,
                           std::span<const ScanData> scans, std::span<const FilterState> initial) {
  if (config.kappa < 0) throw std::invalid_argument("track_scenario: kappa must be >= 0");
  TrackResult out;
  out.track.converged = true;
  std::vector<FilterState> prior = initialize(initial, *models.motion);
  const std::size_t span_len = static_cast<std::size_t>(config.kappa) + 1;
  for (std::size_t start = 0; start < scans.size(); start += span_len) {
    const std::size_t len = std::min(span_len, scans.size() - start);
    EcmResult res = run_window(models, config, scans.subspan(start, len), prior);
    prior = initialize(res.states.back(), *models.motion);
    auto& t = out.track;
    t.states.insert(t.states.end(), res.states.begin(), res.states.end());
    t.used_vihs.insert(t.used_vihs.end(), res.used_vihs.begin(), res.used_vihs.end());
    t.field_mean.insert(t.field_mean.end(), res.field_mean.begin(), res.field_mean.end());
    t.field_variance.insert(t.field_variance.end(), res.field_variance.begin(),
                            res.field_variance.end());
    t.iterations.insert(t.iterations.end(), res.iterations.begin(), res.iterations.end());
    t.converged = t.converged && res.converged;
    out.window_diagnostics.push_back(std::move(res.iterations));
    ++out.windows;
  }
  return out;
}

}  // namespace othr
