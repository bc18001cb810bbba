#pragma once

// Virtual ionospheric height inference: canonical-form evidence from radar
// equivalent measurements and ionosonde soundings, posterior assembly on the
// joint E/F field, and loopy Gaussian belief propagation for the marginals.

#include "othr/estimation.hpp"
#include "othr/geometry.hpp"
#include "othr/gmrf.hpp"
#include "othr/iono_obs.hpp"
#include "othr/used_vihs.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace othr {

class VihInferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linearised evidence of one radar equivalent measurement on the pair of
/// heights (h_t, h_r) it depends on. Node indices are joint-field indices.
struct RadarCanonicalTerm {
  int node_t = 0;
  int node_r = 0;
  double q_tt = 0.0;
  double q_rr = 0.0;
  double q_tr = 0.0;
  double eta_t = 0.0;
  double eta_r = 0.0;
};

/// U_tᵀR̃⁻¹U_t, U_rᵀR̃⁻¹U_r, U_tᵀR̃⁻¹U_r and the matching potentials, with the
/// measurement function linearised in the heights at (h_t0, h_r0).
RadarCanonicalTerm canonical_update_radar(const Eigen::Vector3d& y, const Eigen::Matrix3d& R,
                                          const Eigen::Vector4d& x, double h_t0, double h_r0,
                                          int node_t, int node_r,
                                          const MeasurementModel& model);

struct EdgeIncrement {
  int i = 0;
  int j = 0;
  double d_precision = 0.0;
};

struct CanonicalUpdates {
  std::vector<NodeIncrement> nodes;
  std::vector<EdgeIncrement> edges;

  void add(const NodeIncrement& inc) { nodes.push_back(inc); }
  /// Splits a radar term into node and edge increments; when both legs hit
  /// the same node the cross term lands twice on its diagonal.
  void add(const RadarCanonicalTerm& term);
};

struct PosteriorField {
  SparseMatrix precision;  // full symmetric
  Eigen::VectorXd potential;
};

/// Q̃ = Q + ΣΔQ, η̃ = η + ΣΔη. Throws VihInferenceError if Q̃ is not PD.
PosteriorField assemble_posterior(const JointField& prior, const CanonicalUpdates& updates);

struct LgbpOptions {
  int max_iter = 200;
  double tol = 1e-8;
  double damping = 0.0;  // weight kept from the previous message, in [0, 1)
};

struct LgbpResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  int iterations = 0;
  bool converged = false;
  double max_change = 0.0;
};

/// Synchronous (flooding) Gaussian belief propagation on the graph of Q̃'s
/// off-diagonal nonzeros. Throws VihInferenceError on a non-positive cavity or
/// marginal precision.
LgbpResult lgbp(const SparseMatrix& precision, const Eigen::VectorXd& potential,
                const LgbpOptions& options = {});

inline LgbpResult lgbp(const PosteriorField& posterior, const LgbpOptions& options = {}) {
  return lgbp(posterior.precision, posterior.potential, options);
}

/// Copies marginal means and variances into the valid entries of `cells`.
/// Entries with subregion 0 keep their height.
UsedVihs extract_used_vihs(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                           const JointField& field, UsedVihs cells);

}  // namespace othr
