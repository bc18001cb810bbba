#include "othr/estimation.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace othr {

namespace {

Eigen::Matrix4d symmetrize(const Eigen::Matrix4d& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

ConstantVelocityModel::ConstantVelocityModel(double dt_s, const Eigen::Vector4d& noise_std)
    : dt_(dt_s) {
  F_.setIdentity();
  F_(0, 1) = dt_s;
  F_(2, 3) = dt_s;
  B_ = noise_std.array().square().matrix().asDiagonal();
}

FilterState predict(const FilterState& prior, const MotionModel& motion) {
  const Eigen::Matrix4d J = motion.jacobian(prior.x);
  FilterState out;
  out.x = motion.propagate(prior.x);
  out.P = symmetrize(J * prior.P * J.transpose() + motion.process_noise());
  return out;
}

ModePredictions predict_measurement(const FilterState& pred, const UsedVihs& beta,
                                    const MeasurementModel& model, const ModeCovariances& R) {
  ModePredictions out;
  for (PropagationMode mode : kAllModes) {
    ModePrediction& p = out[static_cast<std::size_t>(mode_index(mode))];
    if (!beta.mode_valid(mode)) continue;
    const auto [h_t, h_r] = beta.heights(mode);
    p.available = true;
    p.y = model.predict(pred.x, h_t, h_r);
    p.H = model.jacobian_state(pred.x, h_t, h_r);
    const Eigen::Matrix3d S = p.H * pred.P * p.H.transpose() + R[static_cast<std::size_t>(mode_index(mode))];
    p.S = 0.5 * (S + S.transpose());
  }
  return out;
}

TargetPredictions gate_input(const ModePredictions& predictions) {
  TargetPredictions out;
  for (std::size_t m = 0; m < out.size(); ++m) {
    out[m].available = predictions[m].available;
    out[m].y = predictions[m].y;
    out[m].S = predictions[m].S;
    out[m].expected = predictions[m].y;
  }
  return out;
}

EquivalentSet synthesize_equivalent(std::span<const AssociationEvent> events, int target,
                                    std::span<const Eigen::Vector3d> measurements,
                                    const ModeCovariances& R) {
  EquivalentSet out;
  for (int m = 0; m < kNumModes; ++m) {
    EquivalentMeasurement& eq = out[static_cast<std::size_t>(m)];
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    double w = 0.0;
    for (const AssociationEvent& e : events) {
      const int j = e.assignment[static_cast<std::size_t>(target * kNumModes + m)];
      if (j < 0 || e.posterior <= 0.0) continue;
      sum += e.posterior * measurements[static_cast<std::size_t>(j)];
      w += e.posterior;
    }
    if (w < kMinEquivalentWeight) continue;
    eq.present = true;
    eq.weight = std::min(w, 1.0);
    eq.y = sum / w;
    eq.R = R[static_cast<std::size_t>(m)] / eq.weight;
  }
  return out;
}

FilterState update(const FilterState& pred, const EquivalentSet& equivalents,
                   const UsedVihs& beta, const MeasurementModel& model) {
  int present = 0;
  for (const EquivalentMeasurement& eq : equivalents) {
    if (eq.present) ++present;
  }
  if (present == 0) return pred;

  const int dim = 3 * present;
  Eigen::MatrixXd H(dim, 4);
  Eigen::VectorXd nu(dim);
  Eigen::MatrixXd Rc = Eigen::MatrixXd::Zero(dim, dim);
  int row = 0;
  for (PropagationMode mode : kAllModes) {
    const EquivalentMeasurement& eq = equivalents[static_cast<std::size_t>(mode_index(mode))];
    if (!eq.present) continue;
    if (!beta.mode_valid(mode)) {
      throw EstimationError("equivalent measurement for a mode without valid reflection cells");
    }
    const auto [h_t, h_r] = beta.heights(mode);
    H.block(row, 0, 3, 4) = model.jacobian_state(pred.x, h_t, h_r);
    nu.segment(row, 3) = eq.y - model.predict(pred.x, h_t, h_r);
    Rc.block(row, row, 3, 3) = eq.R;
    row += 3;
  }

  const Eigen::MatrixXd S = H * pred.P * H.transpose() + Rc;
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (S + S.transpose()));
  if (llt.info() != Eigen::Success) {
    throw EstimationError("stacked innovation covariance is singular");
  }
  const Eigen::MatrixXd K = llt.solve(H * pred.P).transpose();
  FilterState out;
  out.x = pred.x + K * nu;
  const Eigen::Matrix4d IKH = Eigen::Matrix4d::Identity() - K * H;
  out.P = symmetrize(IKH * pred.P * IKH.transpose() + K * Rc * K.transpose());
  return out;
}

Eigen::Matrix4d covariance_sqrt(const Eigen::Matrix4d& P) {
  const Eigen::Matrix4d sym = symmetrize(P);
  Eigen::LLT<Eigen::Matrix4d> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  llt.compute(sym + 1e-9 * Eigen::Matrix4d::Identity());
  if (llt.info() != Eigen::Success) {
    throw EstimationError("covariance is not positive semidefinite");
  }
  return llt.matrixL();
}

std::vector<FilterState> urts_smooth(std::span<const FilterState> filtered,
                                     const MotionModel& motion, UnscentedParams params,
                                     std::vector<SmootherGain>* gains) {
  if (filtered.empty()) throw EstimationError("urts_smooth needs a nonempty sequence");
  const std::size_t n = filtered.size();
  std::vector<FilterState> smoothed(filtered.begin(), filtered.end());
  if (gains) gains->assign(n - 1, SmootherGain{});

  const double spread = params.sigma + params.varsigma;
  if (!(spread > 0.0)) throw EstimationError("sigma-point spread σ + ς must be positive");
  const double w0 = params.varsigma / spread;
  const double wi = 1.0 / (2.0 * spread);
  const double scale = std::sqrt(spread);

  for (std::size_t k = n - 1; k-- > 0;) {
    const FilterState& f = filtered[k];
    const Eigen::Matrix4d L = scale * covariance_sqrt(f.P);

    std::array<Eigen::Vector4d, 9> chi;
    chi[0] = f.x;
    for (int i = 0; i < 4; ++i) {
      chi[static_cast<std::size_t>(1 + i)] = f.x + L.col(i);
      chi[static_cast<std::size_t>(5 + i)] = f.x - L.col(i);
    }
    std::array<Eigen::Vector4d, 9> prop;
    Eigen::Vector4d x_pred = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < chi.size(); ++i) {
      prop[i] = motion.propagate(chi[i]);
      x_pred += (i == 0 ? w0 : wi) * prop[i];
    }
    Eigen::Matrix4d P_pred = motion.process_noise();
    Eigen::Matrix4d O = Eigen::Matrix4d::Zero();
    for (std::size_t i = 0; i < chi.size(); ++i) {
      const double w = i == 0 ? w0 : wi;
      const Eigen::Vector4d dp = prop[i] - x_pred;
      P_pred += w * dp * dp.transpose();
      O += w * (chi[i] - f.x) * dp.transpose();
    }
    P_pred = symmetrize(P_pred);

    Eigen::LLT<Eigen::Matrix4d> llt(P_pred);
    if (llt.info() != Eigen::Success) {
      throw EstimationError("smoother predicted covariance is not positive definite");
    }
    const Eigen::Matrix4d D = llt.solve(O.transpose()).transpose();

    const FilterState& next = smoothed[k + 1];
    smoothed[k].x = f.x + D * (next.x - x_pred);
    smoothed[k].P = symmetrize(f.P + D * (next.P - P_pred) * D.transpose());
    if (gains) (*gains)[k] = {D, O, x_pred, P_pred};
  }
  return smoothed;
}

}  // namespace othr
