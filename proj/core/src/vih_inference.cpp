#include "othr/vih_inference.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace othr {

RadarCanonicalTerm canonical_update_radar(const Eigen::Vector3d& y, const Eigen::Matrix3d& R,
                                          const Eigen::Vector4d& x, double h_t0, double h_r0,
                                          int node_t, int node_r,
                                          const MeasurementModel& model) {
  Eigen::LLT<Eigen::Matrix3d> llt(0.5 * (R + R.transpose()));
  if (llt.info() != Eigen::Success) {
    throw VihInferenceError("radar equivalent covariance is not positive definite");
  }
  const Eigen::Vector3d u = model.predict(x, h_t0, h_r0);
  const HeightJacobian J = model.jacobian_heights(x, h_t0, h_r0);
  const Eigen::Vector3d Rinv_ut = llt.solve(J.d_transmit);
  const Eigen::Vector3d Rinv_ur = llt.solve(J.d_receive);
  // Linear model in the heights: ỹ − u + U_t h_t0 + U_r h_r0 ≈ U_t h_t + U_r h_r.
  const Eigen::Vector3d target = y - u + J.d_transmit * h_t0 + J.d_receive * h_r0;

  RadarCanonicalTerm term;
  term.node_t = node_t;
  term.node_r = node_r;
  term.q_tt = J.d_transmit.dot(Rinv_ut);
  term.q_rr = J.d_receive.dot(Rinv_ur);
  term.q_tr = J.d_transmit.dot(Rinv_ur);
  term.eta_t = Rinv_ut.dot(target);
  term.eta_r = Rinv_ur.dot(target);
  return term;
}

void CanonicalUpdates::add(const RadarCanonicalTerm& term) {
  if (term.node_t == term.node_r) {
    nodes.push_back({term.node_t, term.q_tt + term.q_rr + 2.0 * term.q_tr,
                     term.eta_t + term.eta_r});
    return;
  }
  nodes.push_back({term.node_t, term.q_tt, term.eta_t});
  nodes.push_back({term.node_r, term.q_rr, term.eta_r});
  edges.push_back({term.node_t, term.node_r, term.q_tr});
}

PosteriorField assemble_posterior(const JointField& prior, const CanonicalUpdates& updates) {
  const int n = prior.size();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(prior.precision.nonZeros()) + updates.nodes.size() +
                   2 * updates.edges.size());
  for (int k = 0; k < prior.precision.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(prior.precision, k); it; ++it) {
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  PosteriorField post;
  post.potential = prior.potential;
  auto check = [n](int i) {
    if (i < 0 || i >= n) {
      std::ostringstream os;
      os << "canonical update references node " << i << " outside the joint field (" << n << ")";
      throw VihInferenceError(os.str());
    }
  };
  for (const NodeIncrement& inc : updates.nodes) {
    check(inc.node);
    triplets.emplace_back(inc.node, inc.node, inc.d_precision);
    post.potential(inc.node) += inc.d_potential;
  }
  for (const EdgeIncrement& e : updates.edges) {
    check(e.i);
    check(e.j);
    triplets.emplace_back(e.i, e.j, e.d_precision);
    triplets.emplace_back(e.j, e.i, e.d_precision);
  }
  post.precision.resize(n, n);
  post.precision.setFromTriplets(triplets.begin(), triplets.end());
  post.precision.makeCompressed();
  if (!is_positive_definite(post.precision)) {
    throw VihInferenceError("posterior VIH precision is not positive definite");
  }
  return post;
}

LgbpResult lgbp(const SparseMatrix& precision, const Eigen::VectorXd& potential,
                const LgbpOptions& options) {
  const int n = static_cast<int>(precision.rows());
  if (precision.cols() != n || potential.size() != n) {
    throw VihInferenceError("lgbp: dimension mismatch");
  }
  if (!(options.damping >= 0.0 && options.damping < 1.0)) {
    throw VihInferenceError("lgbp: damping must lie in [0, 1)");
  }

  // Directed edges grouped by target node: incoming[j] lists edges k→j.
  struct Edge {
    int from;
    int to;
    double q;        // Q̃_{to,from}
    int reverse = -1;
  };
  std::vector<Edge> edges;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  const SparseMatrix colmajor = precision;
  for (int col = 0; col < colmajor.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(colmajor, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (row == col) {
        diag(row) += it.value();
      } else if (it.value() != 0.0) {
        edges.push_back({col, row, it.value()});
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.to != b.to ? a.to < b.to : a.from < b.from;
  });
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge probe{edges[e].to, edges[e].from, 0.0};
    auto it = std::lower_bound(edges.begin(), edges.end(), probe, [](const Edge& a, const Edge& b) {
      return a.to != b.to ? a.to < b.to : a.from < b.from;
    });
    if (it == edges.end() || it->to != probe.to || it->from != probe.from) {
      throw VihInferenceError("lgbp: precision matrix is not structurally symmetric");
    }
    edges[e].reverse = static_cast<int>(it - edges.begin());
  }

  const std::size_t m = edges.size();
  std::vector<double> dq(m, 0.0), deta(m, 0.0), dq_next(m), deta_next(m);
  Eigen::VectorXd q_in(n), eta_in(n);

  auto gather = [&]() {
    q_in = diag;
    eta_in = potential;
    for (std::size_t e = 0; e < m; ++e) {
      q_in(edges[e].to) += dq[e];
      eta_in(edges[e].to) += deta[e];
    }
  };

  LgbpResult result;
  for (int iter = 0; iter < options.max_iter; ++iter) {
    gather();
    double change = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      const Edge& edge = edges[e];
      const std::size_t rev = static_cast<std::size_t>(edge.reverse);
      // Cavity at the sender excludes the message the receiver sent it.
      const double q_cav = q_in(edge.from) - dq[rev];
      const double eta_cav = eta_in(edge.from) - deta[rev];
      if (!(q_cav > 0.0)) {
        std::ostringstream os;
        os << "lgbp: non-positive cavity precision at node " << edge.from << " (iteration "
           << iter + 1 << ")";
        throw VihInferenceError(os.str());
      }
      double new_q = -edge.q * edge.q / q_cav;
      double new_eta = -edge.q * eta_cav / q_cav;
      if (options.damping > 0.0) {
        new_q = (1.0 - options.damping) * new_q + options.damping * dq[e];
        new_eta = (1.0 - options.damping) * new_eta + options.damping * deta[e];
      }
      change = std::max({change, std::abs(new_q - dq[e]), std::abs(new_eta - deta[e])});
      dq_next[e] = new_q;
      deta_next[e] = new_eta;
    }
    dq.swap(dq_next);
    deta.swap(deta_next);
    result.iterations = iter + 1;
    result.max_change = change;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  if (m == 0) result.converged = true;

  gather();
  for (int i = 0; i < n; ++i) {
    if (!(q_in(i) > 0.0)) {
      std::ostringstream os;
      os << "lgbp: non-positive marginal precision at node " << i;
      throw VihInferenceError(os.str());
    }
  }
  result.mean = eta_in.cwiseQuotient(q_in);
  result.variance = q_in.cwiseInverse();
  return result;
}

UsedVihs extract_used_vihs(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                           const JointField& field, UsedVihs cells) {
  for (UsedVih& entry : cells.entries) {
    if (!entry.valid()) continue;
    const int node = field.node(entry.layer, entry.subregion);
    if (node >= mean.size() || node >= variance.size()) {
      throw VihInferenceError("marginals do not cover a referenced node");
    }
    entry.height_km = mean(node);
    entry.variance_km2 = variance(node);
  }
  return cells;
}

}  // namespace othr
