#include "othr/association.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace othr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t slot_of(int target, int mode) {
  return static_cast<std::size_t>(target * kNumModes + mode);
}

double log_poisson(int n, double mean) {
  if (n < 0) return kNegInf;
  if (mean <= 0.0) return n == 0 ? 0.0 : kNegInf;
  if (!std::isfinite(mean)) return kNegInf;
  return n * std::log(mean) - mean - std::lgamma(n + 1.0);
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

// Normalises log-weights in place and writes exp() into `out`. Returns false
// when every weight is -inf.
bool normalise_log(std::vector<double>& logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(top)) return false;
  double total = 0.0;
  for (double& v : logs) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logs) v /= total;
  return true;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

double chi_square3_quantile(double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("gate probability must be in [0, 1]");
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (p == 0.0) return 0.0;
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(3.0), p);
}

GateResult gate(std::span<const TargetPredictions> predictions,
                std::span<const Eigen::Vector3d> measurements, double p_g) {
  const double threshold = chi_square3_quantile(p_g);
  GateResult result;
  result.gates.resize(predictions.size());
  for (std::size_t l = 0; l < predictions.size(); ++l) {
    for (int m = 0; m < kNumModes; ++m) {
      const SlotPrediction& pred = predictions[l][static_cast<std::size_t>(m)];
      ModeGate& g = result.gates[l][static_cast<std::size_t>(m)];
      g.available = pred.available;
      g.threshold = threshold;
      g.probability = p_g;
      if (!pred.available) continue;

      const Eigen::Matrix3d S = 0.5 * (pred.S + pred.S.transpose());
      Eigen::LLT<Eigen::Matrix3d> llt(S);
      if (llt.info() != Eigen::Success) {
        throw AssociationError("innovation covariance is not positive definite");
      }
      const double sqrt_det = llt.matrixL().determinant();
      g.volume = std::isfinite(threshold)
                     ? 4.0 / 3.0 * std::numbers::pi * std::pow(threshold, 1.5) * sqrt_det
                     : std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < measurements.size(); ++j) {
        const Eigen::Vector3d r = measurements[j] - pred.y;
        const double d2 = llt.matrixL().solve(r).squaredNorm();
        if (d2 <= threshold) g.measurements.push_back(static_cast<int>(j));
      }
    }
  }
  return result;
}

int phi_max(const GateResult& gate, int target) {
  int count = 0;
  for (const ModeGate& g : gate.gates.at(static_cast<std::size_t>(target))) {
    if (!g.measurements.empty()) ++count;
  }
  return count;
}

std::vector<AssociationEvent> enumerate_events(const GateResult& gate, std::size_t cap) {
  const int slots = gate.num_targets() * kNumModes;
  int max_index = -1;
  for (const auto& target : gate.gates) {
    for (const ModeGate& g : target) {
      if (!g.measurements.empty()) max_index = std::max(max_index, g.measurements.back());
    }
  }
  std::vector<char> used(static_cast<std::size_t>(max_index + 1), 0);
  std::vector<int> current(static_cast<std::size_t>(slots), -1);
  std::vector<AssociationEvent> events;

  auto visit = [&](auto&& self, int slot) -> void {
    if (slot == slots) {
      if (events.size() >= cap) {
        throw EventCapExceeded("association event count exceeds cap of " + std::to_string(cap));
      }
      events.push_back({current, 0.0, 0.0});
      return;
    }
    self(self, slot + 1);
    const ModeGate& g = gate.gates[static_cast<std::size_t>(slot / kNumModes)]
                                  [static_cast<std::size_t>(slot % kNumModes)];
    for (int j : g.measurements) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = 1;
      current[static_cast<std::size_t>(slot)] = j;
      self(self, slot + 1);
      current[static_cast<std::size_t>(slot)] = -1;
      used[static_cast<std::size_t>(j)] = 0;
    }
  };
  visit(visit, 0);
  return events;
}

double event_log_prior(const AssociationEvent& event, const ModeProbabilities& p_d,
                       const GateResult& gate, const ClutterModel& clutter) {
  double total = 0.0;
  for (int l = 0; l < gate.num_targets(); ++l) {
    for (int m = 0; m < kNumModes; ++m) {
      const ModeGate& g = gate.gates[static_cast<std::size_t>(l)][static_cast<std::size_t>(m)];
      if (!g.available) continue;
      const double pdg = p_d[static_cast<std::size_t>(m)] * g.probability;
      double gate_volume = g.volume;
      if (clutter.volume > 0.0) gate_volume = std::min(gate_volume, clutter.volume);
      const double mean = clutter.density * gate_volume;
      const int count = static_cast<int>(g.measurements.size());
      if (event.assignment[slot_of(l, m)] >= 0) {
        total += safe_log(pdg) + log_poisson(count - 1, mean);
      } else {
        total += safe_log(1.0 - pdg) + log_poisson(count, mean);
      }
    }
  }
  return total;
}

void assign_priors(std::vector<AssociationEvent>& events, const ModeProbabilities& p_d,
                   const GateResult& gate, const ClutterModel& clutter) {
  if (events.empty()) return;
  std::vector<double> logs(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    logs[i] = event_log_prior(events[i], p_d, gate, clutter);
  }
  if (!normalise_log(logs)) std::fill(logs.begin(), logs.end(), 1.0 / logs.size());
  for (std::size_t i = 0; i < events.size(); ++i) events[i].prior = logs[i];
}

double event_log_likelihood(const AssociationEvent& event,
                            std::span<const TargetPredictions> predictions,
                            std::span<const Eigen::Vector3d> measurements,
                            const ModeCovariances& R) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double total = 0.0;
  for (std::size_t l = 0; l < predictions.size(); ++l) {
    for (int m = 0; m < kNumModes; ++m) {
      const int j = event.assignment[slot_of(static_cast<int>(l), m)];
      if (j < 0) continue;
      const Eigen::Matrix3d& cov = R[static_cast<std::size_t>(m)];
      Eigen::LLT<Eigen::Matrix3d> llt(cov);
      if (llt.info() != Eigen::Success) {
        throw AssociationError("measurement covariance is not positive definite");
      }
      const Eigen::Vector3d r =
          measurements[static_cast<std::size_t>(j)] - predictions[l][static_cast<std::size_t>(m)].expected;
      const double maha = llt.matrixL().solve(r).squaredNorm();
      const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      total += -0.5 * (3.0 * kLog2Pi + log_det + maha);
    }
  }
  return total;
}

void posterior_weights(std::vector<AssociationEvent>& events,
                       std::span<const double> log_likelihoods) {
  if (events.empty()) throw AssociationError("posterior_weights needs at least one event");
  if (log_likelihoods.size() != events.size()) {
    throw AssociationError("posterior_weights: likelihood count mismatch");
  }
  std::vector<double> logs(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    logs[i] = safe_log(events[i].prior) + log_likelihoods[i];
  }
  if (!normalise_log(logs)) {
    for (std::size_t i = 0; i < events.size(); ++i) events[i].posterior = events[i].prior;
    return;
  }
  for (std::size_t i = 0; i < events.size(); ++i) events[i].posterior = logs[i];
}

ScanAssociation associate_scan(std::span<const TargetPredictions> predictions,
                               std::span<const Eigen::Vector3d> measurements,
                               const AssociationParams& params) {
  ScanAssociation out;
  out.gate = gate(predictions, measurements, params.p_g);
  const int num_targets = out.gate.num_targets();

  UnionFind uf(num_targets);
  std::vector<int> owner(measurements.size(), -1);
  for (int l = 0; l < num_targets; ++l) {
    for (const ModeGate& g : out.gate.gates[static_cast<std::size_t>(l)]) {
      for (int j : g.measurements) {
        int& o = owner[static_cast<std::size_t>(j)];
        if (o < 0) {
          o = l;
        } else {
          uf.unite(o, l);
        }
      }
    }
  }

  std::vector<int> cluster_of(static_cast<std::size_t>(num_targets), -1);
  for (int l = 0; l < num_targets; ++l) {
    const int root = uf.find(l);
    if (cluster_of[static_cast<std::size_t>(root)] < 0) {
      cluster_of[static_cast<std::size_t>(root)] = static_cast<int>(out.clusters.size());
      out.clusters.emplace_back();
    }
    out.clusters[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(root)])]
        .targets.push_back(l);
  }

  for (AssociationCluster& cluster : out.clusters) {
    GateResult sub_gate;
    std::vector<TargetPredictions> sub_pred;
    for (int l : cluster.targets) {
      sub_gate.gates.push_back(out.gate.gates[static_cast<std::size_t>(l)]);
      sub_pred.push_back(predictions[static_cast<std::size_t>(l)]);
    }
    const std::size_t remaining =
        params.event_cap > out.event_count ? params.event_cap - out.event_count : 0;
    cluster.events = enumerate_events(sub_gate, remaining);
    assign_priors(cluster.events, params.p_d, sub_gate, params.clutter);
    std::vector<double> logs(cluster.events.size());
    for (std::size_t i = 0; i < cluster.events.size(); ++i) {
      logs[i] = event_log_likelihood(cluster.events[i], sub_pred, measurements, params.R);
    }
    posterior_weights(cluster.events, logs);
    out.event_count += cluster.events.size();
    for (const AssociationEvent& e : cluster.events) {
      if (e.posterior > 0.0) out.weight_entropy -= e.posterior * std::log(e.posterior);
    }
  }
  return out;
}

}  // namespace othr
