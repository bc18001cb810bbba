#pragma once

#include "othr/geometry.hpp"

#include <array>
#include <utility>

namespace othr {

/// One reflection height a target uses. `subregion` is 1-based; 0 marks a leg
/// whose reflection point falls outside the lattice.
struct UsedVih {
  Layer layer = Layer::E;
  int subregion = 0;
  double height_km = 0.0;
  double variance_km2 = 0.0;

  bool valid() const { return subregion > 0; }
};

/// β = [h^E(i_t), h^E(i_r), h^F(i_t), h^F(i_r)] for one target at one scan.
struct UsedVihs {
  enum Slot { kEt = 0, kEr = 1, kFt = 2, kFr = 3 };

  std::array<UsedVih, 4> entries{
      UsedVih{Layer::E}, UsedVih{Layer::E}, UsedVih{Layer::F}, UsedVih{Layer::F}};

  static constexpr int transmit_slot(PropagationMode mode) {
    return layers_of(mode).transmit == Layer::E ? kEt : kFt;
  }
  static constexpr int receive_slot(PropagationMode mode) {
    return layers_of(mode).receive == Layer::E ? kEr : kFr;
  }

  /// (h_t, h_r) of a mode.
  std::pair<double, double> heights(PropagationMode mode) const {
    return {entries[transmit_slot(mode)].height_km, entries[receive_slot(mode)].height_km};
  }
  bool mode_valid(PropagationMode mode) const {
    return entries[transmit_slot(mode)].valid() && entries[receive_slot(mode)].valid();
  }
};

/// Resolves the reflection subregions of all four legs for a state. Legs
/// outside the lattice get subregion 0; heights are left untouched.
inline void resolve_subregions(UsedVihs& beta, const Eigen::Vector4d& x,
                               const MeasurementModel& model) {
  const auto [t, r] = model.leg_cells(x);
  beta.entries[UsedVihs::kEt].subregion = t;
  beta.entries[UsedVihs::kFt].subregion = t;
  beta.entries[UsedVihs::kEr].subregion = r;
  beta.entries[UsedVihs::kFr].subregion = r;
}

}  // namespace othr
