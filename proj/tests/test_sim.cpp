#include <gtest/gtest.h>

#include "othr/sim.hpp"

#include <cmath>
#include <set>

using namespace othr;

namespace {

ScenarioConfig quiet_config() {
  ScenarioConfig c;
  c.detection_probability = 1.0;
  c.expected_clutter = 0.0;
  return c;
}

}  // namespace

TEST(ClutterBox, CoversEveryNominalMeasurement) {
  const ScenarioConfig c;
  const ScenarioModels m(c);
  EXPECT_GT(m.box.volume(), 0.0);
  EXPECT_DOUBLE_EQ(m.box.lo(1), -0.4);
  EXPECT_DOUBLE_EQ(m.box.hi(1), 0.4);
  EXPECT_NEAR(m.association.clutter.density * m.association.clutter.volume, 50.0, 1e-9);
  for (const Eigen::Vector4d& x : c.targets) {
    const Eigen::Vector4d still(x(0), 0.0, x(2), 0.0);
    for (double h_t : {110.0, 220.0}) {
      for (double h_r : {110.0, 220.0}) {
        EXPECT_TRUE(m.box.contains(m.measurement.predict(still, h_t, h_r)));
      }
    }
  }
}

TEST(Simulate, ShapesAndLabels) {
  const ScenarioConfig c;
  const ScenarioModels m(c);
  const Scenario s = simulate(c, m);
  ASSERT_EQ(s.states.size(), 31u);
  ASSERT_EQ(s.scans.size(), 30u);
  ASSERT_EQ(s.h_e.size(), 30u);
  EXPECT_EQ(s.h_e[0].size(), 144);
  EXPECT_EQ(s.states[0], c.targets);
  for (std::size_t k = 0; k < s.scans.size(); ++k) {
    const ScanData& scan = s.scans[k];
    EXPECT_EQ(scan.scan, static_cast<int>(k) + 1);
    ASSERT_EQ(scan.radar.size(), scan.origin.size());
    ASSERT_EQ(scan.soundings.size(), 4u);
    std::set<int> seen;
    for (std::size_t j = 0; j < scan.radar.size(); ++j) {
      const int o = scan.origin[j];
      if (o < 0) {
        EXPECT_TRUE(m.box.contains(scan.radar[j]));
        continue;
      }
      EXPECT_LT(o, 5 * kNumModes);
      EXPECT_TRUE(seen.insert(o).second) << "slot reported twice";
    }
  }
}

TEST(Simulate, FullDetectionNoClutterGivesEveryReturn) {
  const ScenarioConfig c = quiet_config();
  const ScenarioModels m(c);
  const Scenario s = simulate(c, m);
  EXPECT_EQ(s.skipped_detections, 0);
  for (const ScanData& scan : s.scans) {
    EXPECT_EQ(scan.radar.size(), 20u);
    for (int o : scan.origin) EXPECT_GE(o, 0);
  }
}

TEST(Simulate, NoiseFreeReturnsMatchTheModel) {
  ScenarioConfig c = quiet_config();
  c.radar_noise_std.setZero();
  const ScenarioModels m(c);
  const Scenario s = simulate(c, m);
  const ScanData& scan = s.scans[4];
  for (std::size_t j = 0; j < scan.radar.size(); ++j) {
    const int l = scan.origin[j] / kNumModes;
    const PropagationMode mode = mode_from_index(scan.origin[j] % kNumModes);
    const auto [t, r] = s.cells[4][static_cast<std::size_t>(l)];
    const ModeLayers ly = layers_of(mode);
    const double ht = (ly.transmit == Layer::E ? s.h_e[4] : s.h_f[4])(t - 1);
    const double hr = (ly.receive == Layer::E ? s.h_e[4] : s.h_f[4])(r - 1);
    EXPECT_EQ(scan.radar[j], m.measurement.predict(s.states[5][static_cast<std::size_t>(l)], ht, hr));
  }
}

TEST(Simulate, SeedDeterminism) {
  ScenarioConfig c;
  const ScenarioModels m(c);
  const Scenario a = simulate(c, m);
  const Scenario b = simulate(c, m);
  c.seed = 2;
  const Scenario other = simulate(c, m);
  EXPECT_EQ(a.scans[10].radar, b.scans[10].radar);
  EXPECT_EQ(a.h_f[3], b.h_f[3]);
  EXPECT_NE(a.scans[10].radar.size() == other.scans[10].radar.size() &&
                a.scans[10].radar == other.scans[10].radar,
            true);
  EXPECT_NE(a.h_e[0], other.h_e[0]);
}

TEST(Simulate, PriorMeanFieldsWhenRandomFieldsOff) {
  ScenarioConfig c;
  c.random_fields = false;
  const ScenarioModels m(c);
  const Scenario s = simulate(c, m);
  for (const Eigen::VectorXd& h : s.h_e) EXPECT_EQ(h, m.field.e.mean);
  for (const Eigen::VectorXd& h : s.h_f) EXPECT_EQ(h, m.field.f.mean);
}

TEST(Simulate, FieldsAreIndependentAcrossScans) {
  ScenarioConfig c;
  c.scans = 400;
  const ScenarioModels m(c);
  std::mt19937_64 rng = make_stream(3, SeedStream::Fields);
  std::vector<Eigen::VectorXd> he, hf;
  sample_fields(m, c.scans, rng, he, hf);
  const int node = 60;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k + 1 < he.size(); ++k) {
    num += (he[k](node) - 110.0) * (he[k + 1](node) - 110.0);
    den += (he[k](node) - 110.0) * (he[k](node) - 110.0);
  }
  EXPECT_LT(std::abs(num / den), 4.0 / std::sqrt(400.0));
}

TEST(Simulate, DetectionAndClutterRates) {
  ScenarioConfig c;
  c.scans = 200;
  const ScenarioModels m(c);
  const Scenario s = simulate(c, m);
  double detections = 0.0, clutter = 0.0;
  for (const ScanData& scan : s.scans) {
    for (int o : scan.origin) (o < 0 ? clutter : detections) += 1.0;
  }
  const double slots = 200.0 * 20.0;
  const double pd = (detections + s.skipped_detections) / slots;
  EXPECT_NEAR(pd, 0.7, 4.0 * std::sqrt(0.21 / slots));
  EXPECT_NEAR(clutter / 200.0, 50.0, 4.0 * std::sqrt(50.0 / 200.0));
}

TEST(Simulate, StreamsAreIndependent) {
  std::mt19937_64 a = make_stream(1, SeedStream::Targets);
  std::mt19937_64 b = make_stream(1, SeedStream::Clutter);
  std::mt19937_64 c = make_stream(2, SeedStream::Targets);
  const auto x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_EQ(x, make_stream(1, SeedStream::Targets)());
}

TEST(InitialFilterStates, UsesConfiguredSpread) {
  const ScenarioConfig c;
  const std::vector<FilterState> s = initial_filter_states(c);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s[2].x, c.targets[2]);
  EXPECT_DOUBLE_EQ(s[0].P(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s[0].P(3, 3), 1e-10);
  EXPECT_EQ(s[0].P(0, 1), 0.0);
}
