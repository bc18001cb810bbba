#pragma once

// Lattice Gaussian Markov random fields in canonical (precision, potential)
// form, the two-layer joint field, sampling, and an exact dense solver.

#include "othr/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>

namespace othr {

using SparseMatrix = Eigen::SparseMatrix<double>;

class GmrfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable lattice field. `precision` holds the full symmetric matrix
/// (both triangles) in km⁻², `potential` = precision · mean in km⁻¹.
struct GmrfField {
  LatticeGrid grid;
  SparseMatrix precision;
  Eigen::VectorXd mean;
  Eigen::VectorXd potential;

  int size() const { return static_cast<int>(mean.size()); }
};

/// First-order (4-neighbour) lattice precision with `diag` on the diagonal and
/// `offdiag` on every lattice edge. Boundary nodes keep the same diagonal.
/// Throws GmrfError when the result is not positive definite.
GmrfField build_precision(const LatticeGrid& grid, double diag, double offdiag, double mean_km);

/// Draws from N(mean, precision⁻¹) through a cached Cholesky factor of the
/// precision: h = mean + L⁻ᵀ z.
class GmrfSampler {
 public:
  explicit GmrfSampler(const GmrfField& field);
  ~GmrfSampler();
  GmrfSampler(GmrfSampler&&) noexcept;
  GmrfSampler& operator=(GmrfSampler&&) noexcept;

  Eigen::VectorXd draw(std::mt19937_64& rng) const;

 private:
  struct Factor;
  std::unique_ptr<Factor> factor_;
  Eigen::VectorXd mean_;
};

Eigen::VectorXd sample(const GmrfField& field, std::uint64_t seed);

/// Block-diagonal union of the E- and F-layer fields; E nodes first.
struct JointField {
  GmrfField e;
  GmrfField f;
  SparseMatrix precision;
  Eigen::VectorXd potential;
  Eigen::VectorXd mean;

  int size() const { return static_cast<int>(mean.size()); }
  int offset(Layer layer) const { return layer == Layer::E ? 0 : e.size(); }
  /// Joint node index for a 1-based subregion number of a layer.
  int node(Layer layer, int subregion) const;
  Layer layer_of(int node) const { return node < e.size() ? Layer::E : Layer::F; }
};

JointField combine(const GmrfField& e, const GmrfField& f);

struct Marginals {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Exact marginals by dense Cholesky: mean = Q⁻¹η, variance = diag(Q⁻¹).
Marginals dense_marginals(const Eigen::MatrixXd& precision, const Eigen::VectorXd& potential);
Marginals dense_marginals(const SparseMatrix& precision, const Eigen::VectorXd& potential);

/// True when the sparse symmetric matrix admits a Cholesky factorisation.
bool is_positive_definite(const SparseMatrix& m);

}  // namespace othr
