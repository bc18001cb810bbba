#include <gtest/gtest.h>

#include "othr/config.hpp"

#include <filesystem>
#include <fstream>

using namespace othr;

TEST(Config, EmptyDocumentGivesDefaults) {
  const AppConfig c = parse_config("{}");
  EXPECT_EQ(c.scenario.scans, 30);
  EXPECT_EQ(c.scenario.grid.cols, 18);
  EXPECT_EQ(c.scenario.grid.rows, 8);
  EXPECT_EQ(c.scenario.targets.size(), 5u);
  EXPECT_EQ(c.experiment.case_id, 3);
  EXPECT_EQ(c.tracker.lgbp.max_iter, 1000);
}

TEST(Config, RoundTripsThroughYaml) {
  AppConfig c;
  c.scenario.scans = 12;
  c.scenario.detection_probability = 0.55;
  c.scenario.radar_noise_std = {4.0, 2e-3, 1e-3};
  c.scenario.ionosondes.push_back({40, Layer::F, IonosondeSite::Kind::Oblique, 300.0, 7.5});
  c.scenario.targets.resize(2);
  c.tracker.max_iter = 9;
  c.tracker.lgbp.damping = 0.25;
  c.experiment.case_id = 6;
  c.experiment.kappa = 4;
  c.experiment.seed = 123456789012345ull;

  const std::string text = to_yaml(c);
  const AppConfig back = parse_config(text);
  EXPECT_EQ(to_yaml(back), text);
  EXPECT_EQ(back.scenario.scans, 12);
  EXPECT_EQ(back.scenario.radar_noise_std, c.scenario.radar_noise_std);
  ASSERT_EQ(back.scenario.ionosondes.size(), 5u);
  EXPECT_EQ(back.scenario.ionosondes[4].kind, IonosondeSite::Kind::Oblique);
  EXPECT_EQ(back.scenario.ionosondes[4].layer, Layer::F);
  EXPECT_DOUBLE_EQ(back.scenario.ionosondes[4].oblique_distance_km, 300.0);
  EXPECT_EQ(back.scenario.targets, c.scenario.targets);
  EXPECT_EQ(back.experiment.seed, c.experiment.seed);
  EXPECT_DOUBLE_EQ(back.tracker.lgbp.damping, 0.25);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_config("scenario:\n  scan_count: 30\n"), ConfigError);
  EXPECT_THROW(parse_config("trackr: {}\n"), ConfigError);
  EXPECT_THROW(parse_config("tracker:\n  lgbp:\n    iterations: 4\n"), ConfigError);
  try {
    parse_config("scenario:\n  scan_count: 30\n");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("scenario.scan_count"), std::string::npos);
  }
}

TEST(Config, RejectsMalformedValues) {
  EXPECT_THROW(parse_config("scenario:\n  scans: many\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario:\n  surveillance:\n    range_km: [1400, 1000]\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario:\n  ionosphere:\n    x_km: [480, 751]\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario:\n  targets: []\n"), ConfigError);
  EXPECT_THROW(parse_config("- 1\n- 2\n"), ConfigError);
}

TEST(Config, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "othr_config_test.yaml";
  {
    std::ofstream out(path);
    out << "experiment:\n  runs: 7\n";
  }
  EXPECT_EQ(load_config(path).experiment.runs, 7);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}
