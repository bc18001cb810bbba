#pragma once

// Ionosonde delay models (vertical and oblique incidence), sounding
// simulation, and the linearised canonical-form evidence they contribute.

#include "othr/geometry.hpp"
#include "othr/gmrf.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <vector>

namespace othr {

inline constexpr double kSpeedOfLightKmPerS = 299792.458;

/// Round-trip group delay (s) of a vertical sounding reflecting at height h km.
double g_vertical(double h_km);
/// Delay (s) of an oblique sounding over a flat earth with ground separation dbar km.
double g_oblique(double h_km, double dbar_km);

/// Delay variance (s²) equivalent to a height-domain noise std (km).
double delay_variance_from_height_std(double std_km);

struct IonosondeSite {
  enum class Kind { Vertical, Oblique };

  Kind kind = Kind::Vertical;
  double oblique_distance_km = 0.0;
  Layer layer = Layer::E;
  int subregion = 1;          // 1-based lattice cell under the sounding
  double noise_var_s2 = 0.0;  // A

  double delay(double h_km) const;
  double delay_derivative(double h_km) const;
};

struct IonosondeMeasurement {
  int site = 0;   // index into the site list
  double delay_s = 0.0;
  int scan = 0;
};

/// One sounding per site: z = g(h_true) + N(0, A).
std::vector<IonosondeMeasurement> simulate_soundings(const Eigen::VectorXd& h_e,
                                                     const Eigen::VectorXd& h_f,
                                                     std::span<const IonosondeSite> sites,
                                                     int scan, std::mt19937_64& rng);

struct NodeIncrement {
  int node = 0;
  double d_precision = 0.0;  // km⁻²
  double d_potential = 0.0;  // km⁻¹
};

/// Canonical evidence of one sounding linearised at h_lin:
/// ΔQ = g'(h°)²/A, Δη = g'(h°)(g'(h°)h° − g(h°) + z)/A.
NodeIncrement canonical_update_iono(double z, const IonosondeSite& site, double h_lin,
                                    int node);

}  // namespace othr
