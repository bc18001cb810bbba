#include "othr/gmrf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <sstream>
#include <vector>

namespace othr {

namespace {

using Triplet = Eigen::Triplet<double>;
using NaturalLlt = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

}  // namespace

bool is_positive_definite(const SparseMatrix& m) {
  Eigen::SimplicialLLT<SparseMatrix> llt(m);
  return llt.info() == Eigen::Success;
}

GmrfField build_precision(const LatticeGrid& grid, double diag, double offdiag, double mean_km) {
  if (grid.rows <= 0 || grid.cols <= 0) {
    throw GmrfError("lattice dimensions must be positive");
  }
  const int n = grid.size();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(5 * n));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const int i = grid.node(r, c);
      triplets.emplace_back(i, i, diag);
      if (offdiag != 0.0) {
        if (c + 1 < grid.cols) {
          const int j = grid.node(r, c + 1);
          triplets.emplace_back(i, j, offdiag);
          triplets.emplace_back(j, i, offdiag);
        }
        if (r + 1 < grid.rows) {
          const int j = grid.node(r + 1, c);
          triplets.emplace_back(i, j, offdiag);
          triplets.emplace_back(j, i, offdiag);
        }
      }
    }
  }

  GmrfField field;
  field.grid = grid;
  field.precision.resize(n, n);
  field.precision.setFromTriplets(triplets.begin(), triplets.end());
  field.precision.makeCompressed();
  if (!is_positive_definite(field.precision)) {
    std::ostringstream os;
    os << "lattice precision (diag " << diag << ", offdiag " << offdiag
       << ") is not positive definite";
    throw GmrfError(os.str());
  }
  field.mean = Eigen::VectorXd::Constant(n, mean_km);
  field.potential = field.precision * field.mean;
  return field;
}

struct GmrfSampler::Factor {
  NaturalLlt llt;
};

GmrfSampler::GmrfSampler(const GmrfField& field)
    : factor_(std::make_unique<Factor>()), mean_(field.mean) {
  factor_->llt.compute(field.precision);
  if (factor_->llt.info() != Eigen::Success) {
    throw GmrfError("cannot factorise field precision for sampling");
  }
}

GmrfSampler::~GmrfSampler() = default;
GmrfSampler::GmrfSampler(GmrfSampler&&) noexcept = default;
GmrfSampler& GmrfSampler::operator=(GmrfSampler&&) noexcept = default;

Eigen::VectorXd GmrfSampler::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  // Q = L Lᵀ, so Lᵀ y = z gives Cov(y) = Q⁻¹.
  Eigen::VectorXd y = factor_->llt.matrixU().solve(z);
  return mean_ + y;
}

Eigen::VectorXd sample(const GmrfField& field, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return GmrfSampler(field).draw(rng);
}

int JointField::node(Layer layer, int subregion) const {
  const int n = layer == Layer::E ? e.size() : f.size();
  if (subregion < 1 || subregion > n) {
    std::ostringstream os;
    os << "subregion " << subregion << " outside layer " << to_string(layer) << " (1.." << n << ")";
    throw std::out_of_range(os.str());
  }
  return offset(layer) + subregion - 1;
}

JointField combine(const GmrfField& e, const GmrfField& f) {
  JointField joint;
  joint.e = e;
  joint.f = f;
  const int ne = e.size();
  const int n = ne + f.size();

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(e.precision.nonZeros() + f.precision.nonZeros()));
  for (int k = 0; k < e.precision.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(e.precision, k); it; ++it) {
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int k = 0; k < f.precision.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(f.precision, k); it; ++it) {
      triplets.emplace_back(static_cast<int>(it.row()) + ne, static_cast<int>(it.col()) + ne,
                            it.value());
    }
  }
  joint.precision.resize(n, n);
  joint.precision.setFromTriplets(triplets.begin(), triplets.end());
  joint.precision.makeCompressed();

  joint.mean.resize(n);
  joint.mean << e.mean, f.mean;
  joint.potential.resize(n);
  joint.potential << e.potential, f.potential;
  return joint;
}

Marginals dense_marginals(const Eigen::MatrixXd& precision, const Eigen::VectorXd& potential) {
  if (precision.rows() != precision.cols() || precision.rows() != potential.size()) {
    throw GmrfError("dense_marginals: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw GmrfError("dense_marginals: precision is singular or indefinite");
  }
  Marginals m;
  m.mean = llt.solve(potential);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  m.variance = cov.diagonal();
  return m;
}

Marginals dense_marginals(const SparseMatrix& precision, const Eigen::VectorXd& potential) {
  return dense_marginals(Eigen::MatrixXd(precision), potential);
}

}  // namespace othr
