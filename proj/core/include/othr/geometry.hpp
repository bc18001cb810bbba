#pragma once

// Coordinate registration for a bistatic skywave radar: ground state to slant
// measurement transform, its Jacobians, and the ionospheric cell each
// propagation leg reflects from.

#include <Eigen/Core>

#include <array>
#include <stdexcept>
#include <string_view>
#include <utility>

namespace othr {

enum class Layer { E = 0, F = 1 };

/// One-hop propagation modes. The first letter is the layer used by the
/// transmit leg, the second by the receive leg.
enum class PropagationMode { EE = 0, EF = 1, FE = 2, FF = 3 };

inline constexpr int kNumModes = 4;
inline constexpr std::array<PropagationMode, kNumModes> kAllModes{
    PropagationMode::EE, PropagationMode::EF, PropagationMode::FE, PropagationMode::FF};

struct ModeLayers {
  Layer transmit;
  Layer receive;
};

constexpr ModeLayers layers_of(PropagationMode mode) {
  switch (mode) {
    case PropagationMode::EE: return {Layer::E, Layer::E};
    case PropagationMode::EF: return {Layer::E, Layer::F};
    case PropagationMode::FE: return {Layer::F, Layer::E};
    case PropagationMode::FF: return {Layer::F, Layer::F};
  }
  return {Layer::E, Layer::E};
}

constexpr int mode_index(PropagationMode mode) { return static_cast<int>(mode); }
constexpr PropagationMode mode_from_index(int i) { return static_cast<PropagationMode>(i); }

std::string_view to_string(PropagationMode mode);
std::string_view to_string(Layer layer);

/// Ground-coordinate kinematics: range (km), range rate (km/s), bearing (rad),
/// bearing rate (rad/s).
struct TargetState {
  double rho = 0.0;
  double rho_dot = 0.0;
  double b = 0.0;
  double b_dot = 0.0;

  Eigen::Vector4d vector() const { return {rho, rho_dot, b, b_dot}; }
  static TargetState from_vector(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

/// Slant range (km), slant range rate (km/s), azimuth (rad).
struct RadarMeasurement {
  double r_g = 0.0;
  double r_r = 0.0;
  double a_z = 0.0;

  Eigen::Vector3d vector() const { return {r_g, r_r, a_z}; }
  static RadarMeasurement from_vector(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
};

/// Regular lattice of ionospheric subregions in local ground coordinates.
/// Cells are numbered row-major with X varying fastest; subregion numbers are
/// 1-based, node indices 0-based.
struct LatticeGrid {
  int rows = 1;
  int cols = 1;
  double x0_km = 0.0;
  double y0_km = 0.0;
  double cell_km = 15.0;

  int size() const { return rows * cols; }
  int node(int row, int col) const { return row * cols + col; }
  int row_of(int node) const { return node / cols; }
  int col_of(int node) const { return node % cols; }
};

struct RadarGeometry {
  /// Transmitter-to-receiver separation. The receiver sits at the origin and
  /// the transmitter at (0, d), matching the d·sin(b) term of the slant range.
  double baseline_km = 0.0;
  LatticeGrid grid;
};

class GeometryDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class OutOfCoverageError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

RadarMeasurement slant_transform(const TargetState& state, double h_t, double h_r,
                                 const RadarGeometry& geom);

using StateJacobian = Eigen::Matrix<double, 3, 4>;

StateJacobian jacobian_state(const TargetState& state, double h_t, double h_r,
                             const RadarGeometry& geom);

struct HeightJacobian {
  Eigen::Vector3d d_transmit;  // ∂u/∂h_t
  Eigen::Vector3d d_receive;   // ∂u/∂h_r
};

HeightJacobian jacobian_heights(const TargetState& state, double h_t, double h_r,
                                const RadarGeometry& geom);

/// Cells a propagation mode reflects from. Subregions are 1-based.
struct ReflectionCells {
  Layer transmit_layer = Layer::E;
  int transmit = 1;
  Layer receive_layer = Layer::E;
  int receive = 1;
};

struct GroundPoint {
  double x_km;
  double y_km;
};

/// Ground midpoints of the transmit leg (transmitter to target) and the
/// receive leg (target to receiver).
std::pair<GroundPoint, GroundPoint> reflection_points(const TargetState& state,
                                                      const RadarGeometry& geom);

/// Lattice cell containing a ground point. Points on a shared cell edge go to
/// the lower-index cell. Throws OutOfCoverageError outside the lattice.
int subregion_at(const GroundPoint& p, const LatticeGrid& grid);

ReflectionCells reflection_subregions(const TargetState& state, PropagationMode mode,
                                      const RadarGeometry& geom);

/// Measurement function abstraction used by the tracker. The OTHR model is the
/// production implementation; tests substitute exactly linear stubs.
class MeasurementModel {
 public:
  virtual ~MeasurementModel() = default;

  virtual Eigen::Vector3d predict(const Eigen::Vector4d& x, double h_t, double h_r) const = 0;
  virtual StateJacobian jacobian_state(const Eigen::Vector4d& x, double h_t,
                                       double h_r) const = 0;
  virtual HeightJacobian jacobian_heights(const Eigen::Vector4d& x, double h_t,
                                          double h_r) const = 0;
  /// Ground-lattice cells of the transmit and receive legs, 0 when a leg
  /// reflects outside the lattice. The same cell applies to both layers.
  virtual std::pair<int, int> leg_cells(const Eigen::Vector4d& x) const = 0;

  /// Cells of one mode; throws OutOfCoverageError if either leg is outside.
  ReflectionCells reflection_cells(const Eigen::Vector4d& x, PropagationMode mode) const;
};

class OthrMeasurementModel final : public MeasurementModel {
 public:
  explicit OthrMeasurementModel(RadarGeometry geom) : geom_(geom) {}

  const RadarGeometry& geometry() const { return geom_; }

  Eigen::Vector3d predict(const Eigen::Vector4d& x, double h_t, double h_r) const override;
  StateJacobian jacobian_state(const Eigen::Vector4d& x, double h_t, double h_r) const override;
  HeightJacobian jacobian_heights(const Eigen::Vector4d& x, double h_t,
                                  double h_r) const override;
  std::pair<int, int> leg_cells(const Eigen::Vector4d& x) const override;

 private:
  RadarGeometry geom_;
};

}  // namespace othr
