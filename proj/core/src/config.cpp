#include "othr/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace othr {

namespace {

// Reads keys from one mapping and rejects any it did not consume.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail("", "expected a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      fail(key, "has the wrong type");
    }
  }

  void read_pair(const std::string& key, double& lo, double& hi) {
    if (!has(key)) return;
    seen_.insert(key);
    const YAML::Node n = node_[key];
    if (!n.IsSequence() || n.size() != 2) fail(key, "expected [min, max]");
    try {
      lo = n[0].as<double>();
      hi = n[1].as<double>();
    } catch (const YAML::Exception&) {
      fail(key, "expected numbers");
    }
    if (!(lo < hi)) fail(key, "min must be below max");
  }

  void read_vec4(const std::string& key, Eigen::Vector4d& out) {
    if (!has(key)) return;
    seen_.insert(key);
    out = vec4(node_[key], key);
  }

  Eigen::Vector4d vec4(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence() || n.size() != 4) fail(key, "expected a list of four numbers");
    Eigen::Vector4d v;
    try {
      for (int i = 0; i < 4; ++i) v(i) = n[static_cast<std::size_t>(i)].as<double>();
    } catch (const YAML::Exception&) {
      fail(key, "expected numbers");
    }
    return v;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(has(key) ? node_[key] : YAML::Node(), join(key));
  }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    return has(key) ? node_[key] : YAML::Node();
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(key, "is not a recognised key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config: '" + join(key) + "' " + what);
  }

  std::string join(const std::string& key) const {
    if (key.empty()) return path_.empty() ? std::string("<root>") : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

Layer parse_layer(const std::string& s, const Section& where, const std::string& key) {
  if (s == "E") return Layer::E;
  if (s == "F") return Layer::F;
  where.fail(key, "must be E or F");
}

void read_layer(Section s, LayerPrior& p) {
  s.read("diagonal", p.diag);
  s.read("off_diagonal", p.offdiag);
  s.read("mean_km", p.mean_km);
  s.read("std_km", p.nominal_std_km);
  s.finish();
}

int lattice_count(double lo, double hi, double cell, const Section& where, const std::string& key) {
  const double n = (hi - lo) / cell;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-9) {
    where.fail(key, "extent is not a whole number of cells");
  }
  return static_cast<int>(rounded);
}

void read_scenario(Section s, ScenarioConfig& c) {
  s.read("scans", c.scans);
  s.read("sampling_period_s", c.dt_s);
  s.read("detection_probability", c.detection_probability);
  s.read("expected_clutter_per_scan", c.expected_clutter);
  s.read("range_rate_bound_km_s", c.range_rate_bound_km_s);
  s.read("baseline_km", c.baseline_km);
  s.read("seed", c.seed);

  {
    Section sv = s.child("surveillance");
    sv.read_pair("range_km", c.range_min_km, c.range_max_km);
    sv.read_pair("azimuth_deg", c.azimuth_min_deg, c.azimuth_max_deg);
    sv.finish();
  }
  {
    Section io = s.child("ionosphere");
    double x_lo = c.grid.x0_km, x_hi = c.grid.x0_km + c.grid.cols * c.grid.cell_km;
    double y_lo = c.grid.y0_km, y_hi = c.grid.y0_km + c.grid.rows * c.grid.cell_km;
    io.read_pair("x_km", x_lo, x_hi);
    io.read_pair("y_km", y_lo, y_hi);
    io.read("cell_km", c.grid.cell_km);
    if (!(c.grid.cell_km > 0.0)) io.fail("cell_km", "must be positive");
    c.grid.x0_km = x_lo;
    c.grid.y0_km = y_lo;
    c.grid.cols = lattice_count(x_lo, x_hi, c.grid.cell_km, io, "x_km");
    c.grid.rows = lattice_count(y_lo, y_hi, c.grid.cell_km, io, "y_km");
    read_layer(io.child("e_layer"), c.e_layer);
    read_layer(io.child("f_layer"), c.f_layer);
    io.finish();
  }
  {
    Section mn = s.child("measurement_noise_std");
    mn.read("slant_range_km", c.radar_noise_std(0));
    mn.read("slant_range_rate_km_s", c.radar_noise_std(1));
    mn.read("azimuth_rad", c.radar_noise_std(2));
    mn.finish();
  }
  if (s.has("ionosondes")) {
    const YAML::Node list = s.raw("ionosondes");
    if (!list.IsSequence()) s.fail("ionosondes", "expected a list");
    c.ionosondes.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section site(list[i], s.join("ionosondes") + "[" + std::to_string(i) + "]");
      IonosondeConfig ic;
      std::string layer = "E";
      std::string kind = "vertical";
      site.read("subregion", ic.subregion);
      site.read("layer", layer);
      site.read("kind", kind);
      site.read("oblique_distance_km", ic.oblique_distance_km);
      site.read("noise_std_km", ic.noise_std_km);
      site.finish();
      ic.layer = parse_layer(layer, site, "layer");
      if (kind == "vertical") {
        ic.kind = IonosondeSite::Kind::Vertical;
      } else if (kind == "oblique") {
        ic.kind = IonosondeSite::Kind::Oblique;
      } else {
        site.fail("kind", "must be vertical or oblique");
      }
      if (!(ic.noise_std_km > 0.0)) site.fail("noise_std_km", "must be positive");
      c.ionosondes.push_back(ic);
    }
  }
  if (s.has("targets")) {
    const YAML::Node list = s.raw("targets");
    if (!list.IsSequence() || list.size() == 0) s.fail("targets", "expected a nonempty list");
    c.targets.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.targets.push_back(s.vec4(list[i], "targets[" + std::to_string(i) + "]"));
    }
  }
  s.finish();

  if (c.scans < 1) throw ConfigError("config: 'scenario.scans' must be >= 1");
  if (!(c.dt_s > 0.0)) throw ConfigError("config: 'scenario.sampling_period_s' must be positive");
  if (!(c.detection_probability >= 0.0 && c.detection_probability <= 1.0)) {
    throw ConfigError("config: 'scenario.detection_probability' must lie in [0, 1]");
  }
  if (!(c.expected_clutter >= 0.0)) {
    throw ConfigError("config: 'scenario.expected_clutter_per_scan' must be >= 0");
  }
  if (!(c.baseline_km >= 0.0)) throw ConfigError("config: 'scenario.baseline_km' must be >= 0");
  if (!(c.radar_noise_std.array() > 0.0).all()) {
    throw ConfigError("config: 'scenario.measurement_noise_std' entries must be positive");
  }
}

void read_tracker(Section s, AppConfig& c) {
  s.read_vec4("process_noise_std", c.scenario.process_noise_std);
  s.read_vec4("initial_std", c.scenario.initial_std);
  s.read("gate_probability", c.scenario.gate_probability);
  s.read("max_ecm_iter", c.tracker.max_iter);
  s.read("event_cap", c.tracker.event_cap);
  {
    Section t = s.child("tolerances");
    t.read("range_km", c.tracker.tol_range_km);
    t.read("bearing_rad", c.tracker.tol_bearing_rad);
    t.read("vih_km", c.tracker.tol_vih_km);
    t.finish();
  }
  {
    Section l = s.child("lgbp");
    l.read("max_iter", c.tracker.lgbp.max_iter);
    l.read("tol", c.tracker.lgbp.tol);
    l.read("damping", c.tracker.lgbp.damping);
    l.finish();
  }
  {
    Section u = s.child("sigma_points");
    u.read("sigma", c.tracker.unscented.sigma);
    u.read("varsigma", c.tracker.unscented.varsigma);
    u.finish();
  }
  s.finish();

  if (c.tracker.max_iter < 1) throw ConfigError("config: 'tracker.max_ecm_iter' must be >= 1");
  if (!(c.scenario.gate_probability > 0.0 && c.scenario.gate_probability <= 1.0)) {
    throw ConfigError("config: 'tracker.gate_probability' must lie in (0, 1]");
  }
  if (!(c.tracker.lgbp.damping >= 0.0 && c.tracker.lgbp.damping < 1.0)) {
    throw ConfigError("config: 'tracker.lgbp.damping' must lie in [0, 1)");
  }
}

void read_experiment(Section s, ExperimentSettings& e) {
  s.read("case", e.case_id);
  s.read("runs", e.runs);
  s.read("kappa", e.kappa);
  s.read("seed", e.seed);
  s.read("workers", e.workers);
  s.read("reference_case", e.reference_case);
  s.read("max_excluded_fraction", e.max_excluded_fraction);
  s.finish();
  if (e.case_id < 1 || e.case_id > 6) throw ConfigError("config: 'experiment.case' must be 1..6");
  if (e.reference_case < 0 || e.reference_case > 6) {
    throw ConfigError("config: 'experiment.reference_case' must be 0..6");
  }
  if (e.runs < 1) throw ConfigError("config: 'experiment.runs' must be >= 1");
  if (e.kappa < 0) throw ConfigError("config: 'experiment.kappa' must be >= 0");
  if (e.workers < 1) throw ConfigError("config: 'experiment.workers' must be >= 1");
}

// The emitter prints 17 significant digits; rewrite long numerals in their
// shortest round-trip form so 0.7 stays 0.7.
std::string shorten_numerals(const std::string& text) {
  static const std::regex numeral(R"(-?\d+\.\d{10,}(?:e[-+]?\d+)?)");
  std::string out;
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), numeral), end; it != end; ++it) {
    out.append(last, text.cbegin() + it->position());
    const double v = std::strtod(it->str().c_str(), nullptr);
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
    last = text.cbegin() + it->position() + it->length();
  }
  out.append(last, text.cend());
  return out;
}

}  // namespace

AppConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: YAML parse error: ") + e.what());
  }
  AppConfig config;
  Section top(root, "");
  read_scenario(top.child("scenario"), config.scenario);
  read_tracker(top.child("tracker"), config);
  read_experiment(top.child("experiment"), config.experiment);
  top.finish();
  return config;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_yaml(const AppConfig& config) {
  const ScenarioConfig& s = config.scenario;
  const TrackerSettings& t = config.tracker;
  const ExperimentSettings& e = config.experiment;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  auto pair = [&](double a, double b) { out << YAML::Flow << YAML::BeginSeq << a << b << YAML::EndSeq; };
  auto vec = [&](const auto& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << v(i);
    out << YAML::EndSeq;
  };
  auto layer = [&](const LayerPrior& p) {
    out << YAML::BeginMap << YAML::Key << "diagonal" << YAML::Value << p.diag << YAML::Key
        << "off_diagonal" << YAML::Value << p.offdiag << YAML::Key << "mean_km" << YAML::Value
        << p.mean_km << YAML::Key << "std_km" << YAML::Value << p.nominal_std_km << YAML::EndMap;
  };

  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "scans" << YAML::Value << s.scans;
  out << YAML::Key << "sampling_period_s" << YAML::Value << s.dt_s;
  out << YAML::Key << "detection_probability" << YAML::Value << s.detection_probability;
  out << YAML::Key << "expected_clutter_per_scan" << YAML::Value << s.expected_clutter;
  out << YAML::Key << "range_rate_bound_km_s" << YAML::Value << s.range_rate_bound_km_s;
  out << YAML::Key << "baseline_km" << YAML::Value << s.baseline_km;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "surveillance" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "range_km" << YAML::Value;
  pair(s.range_min_km, s.range_max_km);
  out << YAML::Key << "azimuth_deg" << YAML::Value;
  pair(s.azimuth_min_deg, s.azimuth_max_deg);
  out << YAML::EndMap;
  out << YAML::Key << "ionosphere" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "x_km" << YAML::Value;
  pair(s.grid.x0_km, s.grid.x0_km + s.grid.cols * s.grid.cell_km);
  out << YAML::Key << "y_km" << YAML::Value;
  pair(s.grid.y0_km, s.grid.y0_km + s.grid.rows * s.grid.cell_km);
  out << YAML::Key << "cell_km" << YAML::Value << s.grid.cell_km;
  out << YAML::Key << "e_layer" << YAML::Value;
  layer(s.e_layer);
  out << YAML::Key << "f_layer" << YAML::Value;
  layer(s.f_layer);
  out << YAML::EndMap;
  out << YAML::Key << "measurement_noise_std" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "slant_range_km" << YAML::Value << s.radar_noise_std(0);
  out << YAML::Key << "slant_range_rate_km_s" << YAML::Value << s.radar_noise_std(1);
  out << YAML::Key << "azimuth_rad" << YAML::Value << s.radar_noise_std(2);
  out << YAML::EndMap;
  out << YAML::Key << "ionosondes" << YAML::Value << YAML::BeginSeq;
  for (const IonosondeConfig& ic : s.ionosondes) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "subregion" << YAML::Value << ic.subregion;
    out << YAML::Key << "layer" << YAML::Value << std::string(to_string(ic.layer));
    out << YAML::Key << "kind" << YAML::Value
        << (ic.kind == IonosondeSite::Kind::Vertical ? "vertical" : "oblique");
    if (ic.kind == IonosondeSite::Kind::Oblique) {
      out << YAML::Key << "oblique_distance_km" << YAML::Value << ic.oblique_distance_km;
    }
    out << YAML::Key << "noise_std_km" << YAML::Value << ic.noise_std_km;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "targets" << YAML::Value << YAML::BeginSeq;
  for (const Eigen::Vector4d& x : s.targets) vec(x);
  out << YAML::EndSeq;
  out << YAML::EndMap;

  out << YAML::Key << "tracker" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "process_noise_std" << YAML::Value;
  vec(s.process_noise_std);
  out << YAML::Key << "initial_std" << YAML::Value;
  vec(s.initial_std);
  out << YAML::Key << "gate_probability" << YAML::Value << s.gate_probability;
  out << YAML::Key << "max_ecm_iter" << YAML::Value << t.max_iter;
  out << YAML::Key << "event_cap" << YAML::Value << t.event_cap;
  out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "range_km" << YAML::Value << t.tol_range_km;
  out << YAML::Key << "bearing_rad" << YAML::Value << t.tol_bearing_rad;
  out << YAML::Key << "vih_km" << YAML::Value << t.tol_vih_km;
  out << YAML::EndMap;
  out << YAML::Key << "lgbp" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "max_iter" << YAML::Value << t.lgbp.max_iter;
  out << YAML::Key << "tol" << YAML::Value << t.lgbp.tol;
  out << YAML::Key << "damping" << YAML::Value << t.lgbp.damping;
  out << YAML::EndMap;
  out << YAML::Key << "sigma_points" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sigma" << YAML::Value << t.unscented.sigma;
  out << YAML::Key << "varsigma" << YAML::Value << t.unscented.varsigma;
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "case" << YAML::Value << e.case_id;
  out << YAML::Key << "runs" << YAML::Value << e.runs;
  out << YAML::Key << "kappa" << YAML::Value << e.kappa;
  out << YAML::Key << "seed" << YAML::Value << e.seed;
  out << YAML::Key << "workers" << YAML::Value << e.workers;
  out << YAML::Key << "reference_case" << YAML::Value << e.reference_case;
  out << YAML::Key << "max_excluded_fraction" << YAML::Value << e.max_excluded_fraction;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return shorten_numerals(out.c_str()) + "\n";
}

}  // namespace othr
