#include "othr/iono_obs.hpp"

#include <cmath>
#include <stdexcept>

namespace othr {

double g_vertical(double h_km) { return 2.0 * h_km / kSpeedOfLightKmPerS; }

double g_oblique(double h_km, double dbar_km) {
  const double half = 0.5 * dbar_km;
  return 2.0 * std::sqrt(h_km * h_km + half * half) / kSpeedOfLightKmPerS;
}

double delay_variance_from_height_std(double std_km) {
  const double s = g_vertical(std_km);
  return s * s;
}

double IonosondeSite::delay(double h_km) const {
  return kind == Kind::Vertical ? g_vertical(h_km) : g_oblique(h_km, oblique_distance_km);
}

double IonosondeSite::delay_derivative(double h_km) const {
  if (kind == Kind::Vertical) return 2.0 / kSpeedOfLightKmPerS;
  const double half = 0.5 * oblique_distance_km;
  const double slant = std::sqrt(h_km * h_km + half * half);
  if (slant == 0.0) return 0.0;
  return 2.0 * h_km / (slant * kSpeedOfLightKmPerS);
}

std::vector<IonosondeMeasurement> simulate_soundings(const Eigen::VectorXd& h_e,
                                                     const Eigen::VectorXd& h_f,
                                                     std::span<const IonosondeSite> sites,
                                                     int scan, std::mt19937_64& rng) {
  std::vector<IonosondeMeasurement> out;
  out.reserve(sites.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const IonosondeSite& site = sites[i];
    const Eigen::VectorXd& h = site.layer == Layer::E ? h_e : h_f;
    if (site.subregion < 1 || site.subregion > h.size()) {
      throw std::out_of_range("ionosonde subregion outside the height field");
    }
    const double truth = h(site.subregion - 1);
    // Always consume one draw so the stream layout is independent of A.
    const double noise = normal(rng) * std::sqrt(site.noise_var_s2);
    out.push_back({static_cast<int>(i), site.delay(truth) + noise, scan});
  }
  return out;
}

NodeIncrement canonical_update_iono(double z, const IonosondeSite& site, double h_lin, int node) {
  if (!(site.noise_var_s2 > 0.0)) {
    throw std::invalid_argument("ionosonde noise variance must be positive");
  }
  const double slope = site.delay_derivative(h_lin);
  NodeIncrement inc;
  inc.node = node;
  inc.d_precision = slope * slope / site.noise_var_s2;
  inc.d_potential = slope * (slope * h_lin - site.delay(h_lin) + z) / site.noise_var_s2;
  return inc;
}

}  // namespace othr
