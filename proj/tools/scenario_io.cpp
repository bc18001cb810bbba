#include "scenario_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace othr::io {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::vector<std::filesystem::path> write_scenario(const Scenario& scenario,
                                                  const ScenarioModels& models,
                                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;

  {
    const auto path = dir / "radar.csv";
    auto out = open_out(path);
    out << "scan,index,r_g_km,r_r_km_s,a_z_rad,origin_target,origin_mode\n";
    for (const ScanData& s : scenario.scans) {
      for (std::size_t j = 0; j < s.radar.size(); ++j) {
        const int o = s.origin[j];
        out << s.scan << ',' << j << ',' << num(s.radar[j](0)) << ',' << num(s.radar[j](1)) << ','
            << num(s.radar[j](2)) << ',' << (o < 0 ? 0 : o / kNumModes + 1) << ','
            << (o < 0 ? std::string("clutter") : std::string(to_string(mode_from_index(o % kNumModes))))
            << '\n';
      }
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "soundings.csv";
    auto out = open_out(path);
    out << "scan,site,layer,subregion,delay_s\n";
    for (const ScanData& s : scenario.scans) {
      for (const IonosondeMeasurement& z : s.soundings) {
        const IonosondeSite& site = models.sites[static_cast<std::size_t>(z.site)];
        out << s.scan << ',' << z.site << ',' << to_string(site.layer) << ',' << site.subregion
            << ',' << num(z.delay_s) << '\n';
      }
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "truth_states.csv";
    auto out = open_out(path);
    out << "scan,target,rho_km,rho_dot_km_s,b_rad,b_dot_rad_s,cell_t,cell_r\n";
    for (std::size_t k = 0; k < scenario.states.size(); ++k) {
      for (std::size_t l = 0; l < scenario.states[k].size(); ++l) {
        const Eigen::Vector4d& x = scenario.states[k][l];
        out << k << ',' << l + 1 << ',' << num(x(0)) << ',' << num(x(1)) << ',' << num(x(2)) << ','
            << num(x(3));
        if (k == 0) {
          out << ",,\n";
        } else {
          const auto [t, r] = scenario.cells[k - 1][l];
          out << ',' << t << ',' << r << '\n';
        }
      }
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "truth_heights.csv";
    auto out = open_out(path);
    out << "scan,layer,subregion,height_km\n";
    for (std::size_t k = 0; k < scenario.h_e.size(); ++k) {
      for (Eigen::Index i = 0; i < scenario.h_e[k].size(); ++i) {
        out << k + 1 << ",E," << i + 1 << ',' << num(scenario.h_e[k](i)) << '\n';
      }
      for (Eigen::Index i = 0; i < scenario.h_f[k].size(); ++i) {
        out << k + 1 << ",F," << i + 1 << ',' << num(scenario.h_f[k](i)) << '\n';
      }
    }
    written.push_back(path);
  }
  return written;
}

std::vector<ScanData> read_scans(const std::filesystem::path& dir, int scans) {
  std::vector<ScanData> out(static_cast<std::size_t>(scans));
  for (int k = 0; k < scans; ++k) out[static_cast<std::size_t>(k)].scan = k + 1;
  auto at = [&](int scan, const std::string& file) -> ScanData& {
    if (scan < 1 || scan > scans) {
      throw std::runtime_error(file + ": scan " + std::to_string(scan) + " outside 1.." +
                               std::to_string(scans));
    }
    return out[static_cast<std::size_t>(scan - 1)];
  };

  for (const auto& row : read_rows(dir / "radar.csv")) {
    if (row.size() < 5) throw std::runtime_error("radar.csv: short row");
    ScanData& s = at(std::stoi(row[0]), "radar.csv");
    s.radar.emplace_back(std::stod(row[2]), std::stod(row[3]), std::stod(row[4]));
    int origin = -1;
    if (row.size() >= 7 && row[6] != "clutter") {
      const int target = std::stoi(row[5]) - 1;
      for (PropagationMode m : kAllModes) {
        if (to_string(m) == row[6]) origin = target * kNumModes + mode_index(m);
      }
    }
    s.origin.push_back(origin);
  }
  for (const auto& row : read_rows(dir / "soundings.csv")) {
    if (row.size() < 5) throw std::runtime_error("soundings.csv: short row");
    const int scan = std::stoi(row[0]);
    at(scan, "soundings.csv").soundings.push_back({std::stoi(row[1]), std::stod(row[4]), scan});
  }
  return out;
}

std::filesystem::path write_track(const TrackResult& track, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "scan,target,rho_km,rho_dot_km_s,b_rad,b_dot_rad_s,hE_it_km,hE_ir_km,hF_it_km,hF_ir_km\n";
  for (std::size_t k = 0; k < track.track.states.size(); ++k) {
    for (std::size_t l = 0; l < track.track.states[k].size(); ++l) {
      const Eigen::Vector4d& x = track.track.states[k][l].x;
      out << k + 1 << ',' << l + 1 << ',' << num(x(0)) << ',' << num(x(1)) << ',' << num(x(2))
          << ',' << num(x(3));
      for (const UsedVih& v : track.track.used_vihs[k][l].entries) {
        out << ',' << (v.valid() ? num(v.height_km) : std::string());
      }
      out << '\n';
    }
  }
  return path;
}

}  // namespace othr::io
