#include "othr/geometry.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace othr {

std::string_view to_string(PropagationMode mode) {
  switch (mode) {
    case PropagationMode::EE: return "EE";
    case PropagationMode::EF: return "EF";
    case PropagationMode::FE: return "FE";
    case PropagationMode::FF: return "FF";
  }
  return "?";
}

std::string_view to_string(Layer layer) { return layer == Layer::E ? "E" : "F"; }

namespace {

// Intermediate quantities shared by the transform and its derivatives.
struct Legs {
  double r1;     // receive leg, uses h_r
  double r2;     // transmit leg, uses h_t
  double sin_b;
  double cos_b;
  double s;      // argument of the azimuth arcsine
};

Legs compute_legs(const TargetState& x, double h_t, double h_r, double d) {
  if (!(x.rho > 0.0) || !std::isfinite(x.rho) || !std::isfinite(x.b)) {
    throw GeometryDomainError("slant transform requires finite rho > 0 and finite bearing");
  }
  if (!(h_t > 0.0) || !(h_r > 0.0)) {
    throw GeometryDomainError("slant transform requires positive reflection heights");
  }
  Legs l{};
  l.sin_b = std::sin(x.b);
  l.cos_b = std::cos(x.b);
  const double half = 0.5 * x.rho;
  l.r1 = std::sqrt(half * half + h_r * h_r);
  const double r2_sq = half * half - 0.5 * d * x.rho * l.sin_b + 0.25 * d * d + h_t * h_t;
  l.r2 = std::sqrt(r2_sq);
  l.s = x.rho * l.sin_b / (2.0 * l.r1);
  if (!(std::abs(l.s) <= 1.0)) {
    std::ostringstream os;
    os << "azimuth arcsine argument " << l.s << " outside [-1, 1]";
    throw GeometryDomainError(os.str());
  }
  return l;
}

}  // namespace

RadarMeasurement slant_transform(const TargetState& x, double h_t, double h_r,
                                 const RadarGeometry& geom) {
  const double d = geom.baseline_km;
  const Legs l = compute_legs(x, h_t, h_r, d);
  RadarMeasurement m;
  m.r_g = l.r1 + l.r2;
  m.r_r = 0.25 * x.rho_dot * (x.rho / l.r1 + (x.rho - d * l.sin_b) / l.r2);
  m.a_z = std::asin(l.s);
  return m;
}

StateJacobian jacobian_state(const TargetState& x, double h_t, double h_r,
                             const RadarGeometry& geom) {
  const double d = geom.baseline_km;
  const Legs l = compute_legs(x, h_t, h_r, d);
  const double rho = x.rho;
  const double r1 = l.r1;
  const double r2 = l.r2;
  const double lean = rho - d * l.sin_b;  // 4·r2·∂r2/∂ρ

  const double dr1_drho = rho / (4.0 * r1);
  const double dr2_drho = lean / (4.0 * r2);
  const double dr2_db = -d * rho * l.cos_b / (4.0 * r2);

  StateJacobian J = StateJacobian::Zero();
  // slant range
  J(0, 0) = dr1_drho + dr2_drho;
  J(0, 2) = dr2_db;

  // slant range rate
  const double q = 0.25 * x.rho_dot;
  J(1, 0) = q * ((1.0 / r1 - rho * dr1_drho / (r1 * r1)) + (1.0 / r2 - lean * dr2_drho / (r2 * r2)));
  J(1, 1) = 0.25 * (rho / r1 + lean / r2);
  J(1, 2) = q * (-d * l.cos_b / r2 - lean * dr2_db / (r2 * r2));

  // azimuth
  const double inv_cos_az = 1.0 / std::sqrt(1.0 - l.s * l.s);
  const double ds_drho = l.sin_b / (2.0 * r1) - rho * l.sin_b * dr1_drho / (2.0 * r1 * r1);
  const double ds_db = rho * l.cos_b / (2.0 * r1);
  J(2, 0) = ds_drho * inv_cos_az;
  J(2, 2) = ds_db * inv_cos_az;
  return J;
}

HeightJacobian jacobian_heights(const TargetState& x, double h_t, double h_r,
                                const RadarGeometry& geom) {
  const double d = geom.baseline_km;
  const Legs l = compute_legs(x, h_t, h_r, d);
  const double rho = x.rho;
  const double lean = rho - d * l.sin_b;
  const double dr1_dhr = h_r / l.r1;
  const double dr2_dht = h_t / l.r2;
  const double q = 0.25 * x.rho_dot;
  const double inv_cos_az = 1.0 / std::sqrt(1.0 - l.s * l.s);

  HeightJacobian out;
  out.d_transmit = {dr2_dht, -q * lean * dr2_dht / (l.r2 * l.r2), 0.0};
  out.d_receive = {dr1_dhr, -q * rho * dr1_dhr / (l.r1 * l.r1),
                   -rho * l.sin_b * dr1_dhr / (2.0 * l.r1 * l.r1) * inv_cos_az};
  return out;
}

std::pair<GroundPoint, GroundPoint> reflection_points(const TargetState& state,
                                                      const RadarGeometry& geom) {
  const double tx = state.rho * std::cos(state.b);
  const double ty = state.rho * std::sin(state.b);
  const GroundPoint transmit{0.5 * tx, 0.5 * (ty + geom.baseline_km)};
  const GroundPoint receive{0.5 * tx, 0.5 * ty};
  return {transmit, receive};
}

namespace {

// Cell index along one axis; an exact edge belongs to the lower cell.
int axis_cell(double v, double origin, double cell, int count) {
  const double t = (v - origin) / cell;
  if (!(t >= 0.0) || t > static_cast<double>(count)) return -1;
  const int c = static_cast<int>(std::ceil(t)) - 1;
  return c < 0 ? 0 : c;
}

}  // namespace

int subregion_at(const GroundPoint& p, const LatticeGrid& grid) {
  const int col = axis_cell(p.x_km, grid.x0_km, grid.cell_km, grid.cols);
  const int row = axis_cell(p.y_km, grid.y0_km, grid.cell_km, grid.rows);
  if (col < 0 || row < 0) {
    std::ostringstream os;
    os << "reflection point (" << p.x_km << ", " << p.y_km << ") km lies outside the ionosphere grid";
    throw OutOfCoverageError(os.str());
  }
  return grid.node(row, col) + 1;
}

ReflectionCells reflection_subregions(const TargetState& state, PropagationMode mode,
                                      const RadarGeometry& geom) {
  const auto [transmit, receive] = reflection_points(state, geom);
  const ModeLayers layers = layers_of(mode);
  ReflectionCells cells;
  cells.transmit_layer = layers.transmit;
  cells.receive_layer = layers.receive;
  cells.transmit = subregion_at(transmit, geom.grid);
  cells.receive = subregion_at(receive, geom.grid);
  return cells;
}

Eigen::Vector3d OthrMeasurementModel::predict(const Eigen::Vector4d& x, double h_t,
                                              double h_r) const {
  return slant_transform(TargetState::from_vector(x), h_t, h_r, geom_).vector();
}

StateJacobian OthrMeasurementModel::jacobian_state(const Eigen::Vector4d& x, double h_t,
                                                   double h_r) const {
  return othr::jacobian_state(TargetState::from_vector(x), h_t, h_r, geom_);
}

HeightJacobian OthrMeasurementModel::jacobian_heights(const Eigen::Vector4d& x, double h_t,
                                                      double h_r) const {
  return othr::jacobian_heights(TargetState::from_vector(x), h_t, h_r, geom_);
}

std::pair<int, int> OthrMeasurementModel::leg_cells(const Eigen::Vector4d& x) const {
  const auto [transmit, receive] = reflection_points(TargetState::from_vector(x), geom_);
  auto cell = [&](const GroundPoint& p) {
    try {
      return subregion_at(p, geom_.grid);
    } catch (const OutOfCoverageError&) {
      return 0;
    }
  };
  return {cell(transmit), cell(receive)};
}

ReflectionCells MeasurementModel::reflection_cells(const Eigen::Vector4d& x,
                                                   PropagationMode mode) const {
  const auto [t, r] = leg_cells(x);
  if (t == 0 || r == 0) {
    throw OutOfCoverageError(std::string("mode ") + std::string(to_string(mode)) +
                             " reflects outside the ionosphere grid");
  }
  const ModeLayers layers = layers_of(mode);
  return {layers.transmit, t, layers.receive, r};
}

}  // namespace othr
