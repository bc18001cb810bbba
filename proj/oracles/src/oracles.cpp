#include "othr/oracles/oracles.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>

namespace othr::oracles {

std::set<std::vector<int>> brute_force_events(const GateResult& gate) {
  const std::size_t slots = static_cast<std::size_t>(gate.num_targets()) * kNumModes;
  std::vector<std::vector<int>> choices(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    choices[s].push_back(-1);
    const ModeGate& g = gate.gates[s / kNumModes][s % kNumModes];
    for (int j : g.measurements) choices[s].push_back(j);
  }
  std::set<std::vector<int>> out;
  std::vector<std::size_t> odometer(slots, 0);
  while (true) {
    std::vector<int> event(slots);
    std::set<int> used;
    bool ok = true;
    for (std::size_t s = 0; s < slots; ++s) {
      event[s] = choices[s][odometer[s]];
      if (event[s] >= 0 && !used.insert(event[s]).second) ok = false;
    }
    if (ok) out.insert(event);
    std::size_t s = 0;
    while (s < slots && ++odometer[s] == choices[s].size()) {
      odometer[s] = 0;
      ++s;
    }
    if (s == slots) break;
  }
  return out;
}

Eigen::Vector3d slant_transform_mp(const Eigen::Vector4d& x, double h_t, double h_r, double d) {
  using mp = boost::multiprecision::cpp_bin_float_50;
  const mp rho = x(0), rho_dot = x(1), b = x(2), ht = h_t, hr = h_r, dd = d;
  const mp half = rho / 2;
  const mp r1 = sqrt(half * half + hr * hr);
  const mp r2 = sqrt(half * half - dd * rho * sin(b) / 2 + (dd / 2) * (dd / 2) + ht * ht);
  const mp rg = r1 + r2;
  const mp rr = rho_dot / 4 * (rho / r1 + (rho - dd * sin(b)) / r2);
  const mp az = asin(rho * sin(b) / (2 * r1));
  return {rg.convert_to<double>(), rr.convert_to<double>(), az.convert_to<double>()};
}

namespace {

double step_for(double v, double rel, double floor) { return rel * std::max(std::abs(v), floor); }

}  // namespace

StateJacobian fd_jacobian_state(const Eigen::Vector4d& x, double h_t, double h_r,
                                const RadarGeometry& geom, double rel_step) {
  // Floors keep steps meaningful for components that may be near zero.
  const Eigen::Vector4d floors(1.0, 1e-2, 1e-2, 1e-5);
  StateJacobian J;
  for (int i = 0; i < 4; ++i) {
    const double h = step_for(x(i), rel_step, floors(i));
    Eigen::Vector4d xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    J.col(i) = (slant_transform_mp(xp, h_t, h_r, geom.baseline_km) -
                slant_transform_mp(xm, h_t, h_r, geom.baseline_km)) /
               (2.0 * h);
  }
  return J;
}

HeightJacobian fd_jacobian_heights(const Eigen::Vector4d& x, double h_t, double h_r,
                                   const RadarGeometry& geom, double rel_step) {
  const double dt = step_for(h_t, rel_step, 1.0);
  const double dr = step_for(h_r, rel_step, 1.0);
  HeightJacobian J;
  J.d_transmit = (slant_transform_mp(x, h_t + dt, h_r, geom.baseline_km) -
                  slant_transform_mp(x, h_t - dt, h_r, geom.baseline_km)) /
                 (2.0 * dt);
  J.d_receive = (slant_transform_mp(x, h_t, h_r + dr, geom.baseline_km) -
                 slant_transform_mp(x, h_t, h_r - dr, geom.baseline_km)) /
                (2.0 * dr);
  return J;
}

double chi_square3_quantile_bisect(double p) {
  auto cdf = [](double x) {
    return std::erf(std::sqrt(x / 2.0)) - std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-x / 2.0);
  };
  double lo = 0.0, hi = 1.0;
  while (cdf(hi) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<FilterState> linear_kalman(const FilterState& prior, const Eigen::Matrix4d& F,
                                       const Eigen::Matrix4d& Q,
                                       std::span<const LinearMeasurement> measurements) {
  std::vector<FilterState> out;
  FilterState cur = prior;
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    if (k > 0) {
      cur.x = F * cur.x;
      cur.P = F * cur.P * F.transpose() + Q;
    }
    const LinearMeasurement& m = measurements[k];
    if (m.present) {
      const Eigen::MatrixXd S = m.H * cur.P * m.H.transpose() + m.R;
      const Eigen::MatrixXd K = cur.P * m.H.transpose() * S.inverse();
      cur.x = cur.x + K * (m.y - m.H * cur.x);
      cur.P = (Eigen::Matrix4d::Identity() - K * m.H) * cur.P;
      cur.P = 0.5 * (cur.P + cur.P.transpose()).eval();
    }
    out.push_back(cur);
  }
  return out;
}

std::vector<FilterState> linear_rts(std::span<const FilterState> filtered, const Eigen::Matrix4d& F,
                                    const Eigen::Matrix4d& Q) {
  std::vector<FilterState> s(filtered.begin(), filtered.end());
  for (std::size_t k = s.size() - 1; k-- > 0;) {
    const Eigen::Matrix4d P_pred = F * filtered[k].P * F.transpose() + Q;
    const Eigen::Matrix4d G = filtered[k].P * F.transpose() * P_pred.inverse();
    s[k].x = filtered[k].x + G * (s[k + 1].x - F * filtered[k].x);
    s[k].P = filtered[k].P + G * (s[k + 1].P - P_pred) * G.transpose();
  }
  return s;
}

std::vector<Eigen::Vector4d> batch_map_states(const FilterState& prior, const Eigen::Matrix4d& F,
                                              const Eigen::Matrix4d& Q,
                                              std::span<const LinearMeasurement> measurements) {
  const int T = static_cast<int>(measurements.size());
  const int n = 4 * T;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  const Eigen::Matrix4d P0i = prior.P.inverse();
  const Eigen::Matrix4d Qi = Q.inverse();
  A.block(0, 0, 4, 4) += P0i;
  rhs.segment(0, 4) += P0i * prior.x;
  for (int k = 0; k + 1 < T; ++k) {
    // (x_{k+1} − F x_k)ᵀ Q⁻¹ (x_{k+1} − F x_k)
    A.block(4 * k, 4 * k, 4, 4) += F.transpose() * Qi * F;
    A.block(4 * k, 4 * (k + 1), 4, 4) -= F.transpose() * Qi;
    A.block(4 * (k + 1), 4 * k, 4, 4) -= Qi * F;
    A.block(4 * (k + 1), 4 * (k + 1), 4, 4) += Qi;
  }
  for (int k = 0; k < T; ++k) {
    const LinearMeasurement& m = measurements[static_cast<std::size_t>(k)];
    if (!m.present) continue;
    const Eigen::MatrixXd Ri = m.R.inverse();
    A.block(4 * k, 4 * k, 4, 4) += m.H.transpose() * Ri * m.H;
    rhs.segment(4 * k, 4) += m.H.transpose() * Ri * m.y;
  }
  const Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
  std::vector<Eigen::Vector4d> out;
  for (int k = 0; k < T; ++k) out.push_back(sol.segment(4 * k, 4));
  return out;
}

void dense_lu_marginals(const Eigen::MatrixXd& Q, const Eigen::VectorXd& eta,
                        Eigen::VectorXd& mean, Eigen::VectorXd& variance) {
  const Eigen::MatrixXd cov = Q.fullPivLu().inverse();
  mean = cov * eta;
  variance = cov.diagonal();
}

}  // namespace othr::oracles
