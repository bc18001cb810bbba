#include <gtest/gtest.h>

#include "linear_stub.hpp"
#include "othr/oracles/oracles.hpp"
#include "othr/vih_inference.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace othr;

namespace {

const LatticeGrid kGrid{8, 18, 480.0, 30.0, 15.0};
const Eigen::Vector4d kTarget1(1100.0, 0.15, 0.09472, 1.52665e-4);

JointField table2_field() {
  return combine(build_precision(kGrid, 0.082, -0.0205, 110.0),
                 build_precision(kGrid, 0.0587, -0.0147, 220.0));
}

double max_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return ((a - b).array().abs() / b.array().abs().max(1e-300)).maxCoeff();
}

// Random spanning tree over n nodes with a diagonally dominant precision.
SparseMatrix random_tree_precision(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(-0.5, 0.5), d(0.5, 2.0);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    const int p = parent(rng);
    const double v = w(rng);
    Q(i, p) = Q(p, i) = v;
  }
  for (int i = 0; i < n; ++i) Q(i, i) = Q.row(i).cwiseAbs().sum() + d(rng);
  return Q.sparseView();
}

}  // namespace

TEST(RadarTerm, VanishesForHugeCovariance) {
  const OthrMeasurementModel model({50.0, kGrid});
  const RadarCanonicalTerm t = canonical_update_radar(
      Eigen::Vector3d(1200.0, 0.15, 0.1), 1e30 * Eigen::Matrix3d::Identity(), kTarget1, 220.0,
      220.0, 150, 160, model);
  EXPECT_LT(std::abs(t.q_tt) + std::abs(t.q_rr) + std::abs(t.q_tr), 1e-28);
  EXPECT_LT(std::abs(t.eta_t) + std::abs(t.eta_r), 1e-25);
}

// Independent route: finite-difference height Jacobian in multiprecision and
// the 2×2 normal equations of the linearised least-squares problem.
TEST(RadarTerm, MatchesLeastSquaresOracleForFFMode) {
  const RadarGeometry geom{50.0, kGrid};
  const OthrMeasurementModel model(geom);
  const Eigen::Matrix3d R = Eigen::Vector3d(25.0, 1e-6, 9e-6).asDiagonal();
  const Eigen::Vector3d u0 = oracles::slant_transform_mp(kTarget1, 220.0, 220.0, 50.0);
  const Eigen::Vector3d y = u0 + Eigen::Vector3d(6.0, 2e-4, -1.5e-3);
  const RadarCanonicalTerm t = canonical_update_radar(y, R, kTarget1, 220.0, 220.0, 150, 160, model);

  const HeightJacobian fd = oracles::fd_jacobian_heights(kTarget1, 220.0, 220.0, geom);
  Eigen::Matrix<double, 3, 2> U;
  U << fd.d_transmit, fd.d_receive;
  const Eigen::Matrix3d Ri = R.inverse();
  const Eigen::Matrix2d Q = U.transpose() * Ri * U;
  const Eigen::Vector2d eta = U.transpose() * Ri * (y - u0 + U * Eigen::Vector2d(220.0, 220.0));
  EXPECT_NEAR(t.q_tt / Q(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(t.q_rr / Q(1, 1), 1.0, 1e-6);
  EXPECT_NEAR(t.q_tr / Q(0, 1), 1.0, 1e-6);
  EXPECT_NEAR(t.eta_t / eta(0), 1.0, 1e-6);
  EXPECT_NEAR(t.eta_r / eta(1), 1.0, 1e-6);
}

TEST(RadarTerm, ZeroInnovationKeepsLinearisationPoint) {
  const othr::testing::LinearStubModel model;
  const Eigen::Matrix3d R = Eigen::Vector3d(25.0, 1e-6, 9e-6).asDiagonal();
  const Eigen::Vector3d y = model.predict(kTarget1, 104.0, 231.0);
  const RadarCanonicalTerm t = canonical_update_radar(y, R, kTarget1, 104.0, 231.0, 0, 1, model);
  Eigen::Matrix2d Q;
  Q << t.q_tt, t.q_tr, t.q_tr, t.q_rr;
  const Eigen::Vector2d mode = Q.ldlt().solve(Eigen::Vector2d(t.eta_t, t.eta_r));
  EXPECT_NEAR(mode(0), 104.0, 1e-8);
  EXPECT_NEAR(mode(1), 231.0, 1e-8);
}

TEST(CanonicalUpdates, SameNodeFoldsCrossTermOntoDiagonal) {
  CanonicalUpdates u;
  u.add(RadarCanonicalTerm{7, 7, 1.0, 2.0, 0.5, 3.0, 4.0});
  ASSERT_EQ(u.nodes.size(), 1u);
  EXPECT_TRUE(u.edges.empty());
  EXPECT_DOUBLE_EQ(u.nodes[0].d_precision, 4.0);
  EXPECT_DOUBLE_EQ(u.nodes[0].d_potential, 7.0);

  u.add(RadarCanonicalTerm{3, 150, 1.0, 2.0, 0.5, 3.0, 4.0});
  EXPECT_EQ(u.nodes.size(), 3u);
  ASSERT_EQ(u.edges.size(), 1u);
  EXPECT_EQ(u.edges[0].i, 3);
  EXPECT_EQ(u.edges[0].j, 150);
}

TEST(AssemblePosterior, IdentityAndLocality) {
  const JointField f = table2_field();
  const PosteriorField same = assemble_posterior(f, {});
  EXPECT_TRUE(Eigen::MatrixXd(same.precision).isApprox(Eigen::MatrixXd(f.precision), 0.0));
  EXPECT_EQ(same.potential, f.potential);

  CanonicalUpdates one;
  one.add(NodeIncrement{20, 0.01, 1.3});
  const PosteriorField p = assemble_posterior(f, one);
  const Eigen::MatrixXd diff = Eigen::MatrixXd(p.precision) - Eigen::MatrixXd(f.precision);
  EXPECT_EQ((diff.array() != 0.0).count(), 1);
  EXPECT_DOUBLE_EQ(diff(20, 20), 0.01);
  EXPECT_EQ(((p.potential - f.potential).array() != 0.0).count(), 1);

  CanonicalUpdates cross;
  cross.add(RadarCanonicalTerm{5, 200, 0.01, 0.02, -0.005, 1.0, 2.0});
  const Eigen::MatrixXd Qc(assemble_posterior(f, cross).precision);
  EXPECT_EQ(Qc(5, 200), Qc(200, 5));
  EXPECT_DOUBLE_EQ(Qc(5, 200), -0.005);

  CanonicalUpdates bad;
  bad.add(NodeIncrement{400, 1.0, 0.0});
  EXPECT_THROW(assemble_posterior(f, bad), VihInferenceError);
}

TEST(Lgbp, DiagonalPrecisionIsExactImmediately) {
  const Eigen::Vector3d d(2.0, 4.0, 8.0);
  const SparseMatrix Q = Eigen::MatrixXd(d.asDiagonal()).sparseView();
  const LgbpResult r = lgbp(Q, Eigen::Vector3d(1.0, 2.0, 4.0));
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_DOUBLE_EQ(r.mean(2), 0.5);
  EXPECT_DOUBLE_EQ(r.variance(0), 0.5);
}

TEST(Lgbp, ThreeNodeChainIsExact) {
  Eigen::Matrix3d Q;
  Q << 2.0, -0.7, 0.0, -0.7, 3.0, 0.4, 0.0, 0.4, 1.5;
  const Eigen::Vector3d eta(1.0, -2.0, 0.5);
  const LgbpResult r = lgbp(Eigen::MatrixXd(Q).sparseView(), eta);
  const Marginals m = dense_marginals(Eigen::MatrixXd(Q), eta);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.mean - m.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r.variance - m.variance).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lgbp, TreesAreExactInMeansAndVariances) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const SparseMatrix Q = random_tree_precision(144, rng);
    Eigen::VectorXd eta(144);
    for (auto& v : eta) v = n01(rng);
    const LgbpResult r = lgbp(Q, eta, {1000, 1e-14, 0.0});
    const Marginals m = dense_marginals(Q, eta);
    ASSERT_TRUE(r.converged);
    EXPECT_LT((r.mean - m.mean).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, m.mean.cwiseAbs().maxCoeff()));
    EXPECT_LT(max_rel(r.variance, m.variance), 1e-12);
  }
}

TEST(Lgbp, LoopyLatticeMeansMatchDenseSolve) {
  const JointField f = table2_field();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> e_node(0, 143), any(0, 287);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CanonicalUpdates updates;
  for (int i = 0; i < 4; ++i) {
    updates.add(NodeIncrement{any(rng), 0.01, 0.01 * (100.0 + 150.0 * u(rng))});
  }
  for (int i = 0; i < 10; ++i) {
    const int a = e_node(rng), b = any(rng);
    updates.add(RadarCanonicalTerm{a, b, 0.02 * u(rng), 0.02 * u(rng), 0.005 * u(rng),
                                   2.0 * u(rng), 4.0 * u(rng)});
  }
  const PosteriorField post = assemble_posterior(f, updates);
  const LgbpResult r = lgbp(post, {2000, 1e-10, 0.0});
  const Marginals m = dense_marginals(post.precision, post.potential);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(max_rel(r.mean, m.mean), 1e-6);

  const LgbpResult prior = lgbp(f.precision, f.potential, {2000, 1e-10, 0.0});
  EXPECT_LT(max_rel(prior.mean, f.mean), 1e-6);
}

TEST(Lgbp, DampingReachesTheSameFixedPoint) {
  const JointField f = table2_field();
  CanonicalUpdates updates;
  updates.add(NodeIncrement{30, 0.05, 6.0});
  const PosteriorField post = assemble_posterior(f, updates);
  const LgbpResult plain = lgbp(post, {2000, 1e-11, 0.0});
  const LgbpResult damped = lgbp(post, {4000, 1e-11, 0.5});
  ASSERT_TRUE(plain.converged);
  ASSERT_TRUE(damped.converged);
  EXPECT_LT(max_rel(damped.mean, plain.mean), 1e-8);
  EXPECT_THROW(lgbp(post, {10, 1e-8, 1.0}), VihInferenceError);
}

TEST(Lgbp, ReportsNonConvergence) {
  const JointField f = table2_field();
  const LgbpResult r = lgbp(f.precision, f.potential, {2, 1e-15, 0.0});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_TRUE(r.mean.allFinite());
}

TEST(ExtractUsedVihs, PureProjection) {
  const JointField f = table2_field();
  Eigen::VectorXd mean = Eigen::VectorXd::LinSpaced(288, 0.0, 287.0);
  Eigen::VectorXd var = Eigen::VectorXd::Constant(288, 2.0);
  UsedVihs cells;
  cells.entries[UsedVihs::kEt].subregion = 5;
  cells.entries[UsedVihs::kEr].subregion = 5;
  cells.entries[UsedVihs::kFt].subregion = 5;
  cells.entries[UsedVihs::kFr].subregion = 0;
  cells.entries[UsedVihs::kFr].height_km = 999.0;
  const UsedVihs a = extract_used_vihs(mean, var, f, cells);
  EXPECT_DOUBLE_EQ(a.entries[UsedVihs::kEt].height_km, 4.0);
  EXPECT_DOUBLE_EQ(a.entries[UsedVihs::kEr].height_km, 4.0);
  EXPECT_DOUBLE_EQ(a.entries[UsedVihs::kFt].height_km, 148.0);
  EXPECT_DOUBLE_EQ(a.entries[UsedVihs::kFr].height_km, 999.0);
  EXPECT_DOUBLE_EQ(a.entries[UsedVihs::kEt].variance_km2, 2.0);

  mean(100) = -1.0;
  const UsedVihs b = extract_used_vihs(mean, var, f, cells);
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(a.entries[static_cast<std::size_t>(s)].height_km, b.entries[static_cast<std::size_t>(s)].height_km);
  }
}
