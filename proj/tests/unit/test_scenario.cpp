#include <gtest/gtest.h>

#include <sstream>

#include "photonsync/errors.hpp"
#include "photonsync/scenario.hpp"

using namespace photonsync;

namespace {

void expect_same(const ScenarioConfig& a, const ScenarioConfig& b) {
  EXPECT_EQ(a.r_A, b.r_A);
  EXPECT_EQ(a.r_B, b.r_B);
  EXPECT_EQ(a.r_C, b.r_C);
  EXPECT_EQ(a.r_dark, b.r_dark);
  EXPECT_EQ(a.transmission_T, b.transmission_T);
  EXPECT_EQ(a.sigma_det, b.sigma_det);
  EXPECT_EQ(a.T_A, b.T_A);
  EXPECT_EQ(a.T_feed, b.T_feed);
  EXPECT_EQ(a.duration, b.duration);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.clock.offset_t0, b.clock.offset_t0);
  EXPECT_EQ(a.clock.skew_u, b.clock.skew_u);
  EXPECT_EQ(a.clock.drift_a, b.clock.drift_a);
  EXPECT_EQ(a.clock.rw_sigma, b.clock.rw_sigma);
}

}  // namespace

TEST(Scenario, ShippedFilesMatchPresets) {
  for (const auto& name : scenario_preset_names()) {
    SCOPED_TRACE(name);
    const auto from_file = load_scenario(std::string(PHOTONSYNC_SOURCE_DIR) + "/scenarios/" + name + ".conf");
    expect_same(from_file, scenario_preset(name));
    EXPECT_NO_THROW(from_file.validate());
  }
}

TEST(Scenario, WriteParseRoundTrip) {
  for (const auto& name : scenario_preset_names()) {
    std::stringstream buf;
    write_scenario(buf, scenario_preset(name));
    expect_same(parse_scenario(buf), scenario_preset(name));
  }
}

TEST(Scenario, TableRates) {
  const auto a = scenario_preset("low-loss");
  EXPECT_EQ(a.r_A, 271e3);
  EXPECT_EQ(a.r_B, 283e3);
  EXPECT_EQ(a.r_C, 10.3e3);
  const auto b = scenario_preset("high-loss");
  EXPECT_EQ(b.r_C, 360);
  EXPECT_DOUBLE_EQ(b.r_C * b.T_A, 36.0);
  EXPECT_EQ(scenario_preset("fig3a").r_C, 1200);
}

TEST(Scenario, CommentsDefaultsAndUnknownKeys) {
  std::stringstream ok("# comment\n r_C = 500   # trailing\n\nclock.skew_u=1e-6\n");
  const auto c = parse_scenario(ok);
  EXPECT_EQ(c.r_C, 500);
  EXPECT_EQ(c.clock.skew_u, 1e-6);
  EXPECT_EQ(c.r_A, ScenarioConfig{}.r_A);
  std::stringstream unknown("r_Q = 1\n");
  EXPECT_THROW(parse_scenario(unknown), ConfigError);
  std::stringstream bad_value("r_A = fast\n");
  EXPECT_THROW(parse_scenario(bad_value), ConfigError);
  std::stringstream no_eq("r_A 5\n");
  EXPECT_THROW(parse_scenario(no_eq), ConfigError);
  EXPECT_THROW(scenario_preset("nope"), ConfigError);
}

TEST(Scenario, EveryKeyHasAUnit) {
  for (const auto& k : scenario_keys()) {
    EXPECT_FALSE(k.unit.empty()) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
  }
}
