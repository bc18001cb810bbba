#pragma once

// Plain CSV bundle for simulated scenarios, so `simulate` output can be fed to
// `track` and inspected with ordinary tools.

#include "othr/ecm.hpp"
#include "othr/sim.hpp"

#include <filesystem>
#include <vector>

namespace othr::io {

/// Writes radar.csv, soundings.csv, truth_states.csv and truth_heights.csv.
std::vector<std::filesystem::path> write_scenario(const Scenario& scenario,
                                                  const ScenarioModels& models,
                                                  const std::filesystem::path& dir);

/// Reads radar.csv and soundings.csv back into per-scan data (scans 1..N).
std::vector<ScanData> read_scans(const std::filesystem::path& dir, int scans);

std::filesystem::path write_track(const TrackResult& track, const std::filesystem::path& path);

}  // namespace othr::io
