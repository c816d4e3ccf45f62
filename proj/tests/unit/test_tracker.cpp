#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "photonsync/errors.hpp"
#include "photonsync/scenario.hpp"
#include "photonsync/session_generator.hpp"
#include "photonsync/tracker.hpp"

using namespace photonsync;

namespace {

ScenarioConfig steady(double seconds, double skew = 2.5e-6) {
  ScenarioConfig c = scenario_preset("micro");
  c.clock = ClockModel{3.2e-6, skew, 0.0, 0.0};
  c.duration = seconds;
  return c;
}

// Ground-truth mapping of the offset against Bob local time.
OffsetMapping truth_mapping(const ScenarioConfig& c) {
  const double u = c.clock.skew_u;
  return OffsetMapping{0.0, c.clock.offset_t0 * 1e12, u / (1.0 + u)};
}

TrackerConfig fast_config(const ScenarioConfig& c) {
  TrackerConfig t;
  t.T_feed = c.T_feed;
  t.T_meas = c.T_feed;
  t.expected_sigma_ps = c.sigma_det * 1e12;
  return t;
}

}  // namespace

TEST(OffsetMappingTest, LinearAroundPivot) {
  const OffsetMapping m{1000.0, 50.0, 1e-3};
  EXPECT_DOUBLE_EQ(m.at(1000.0), 50.0);
  EXPECT_DOUBLE_EQ(m.at(3000.0), 52.0);
  EXPECT_DOUBLE_EQ(m.at(0.0), 49.0);
  EXPECT_EQ(m.correct(3000), 2948);
  EXPECT_EQ(to_string(SyncStatus::Locked), "LOCKED");
  EXPECT_EQ(to_string(SyncStatus::Lost), "LOST");
  EXPECT_EQ(to_string(SyncStatus::Acquiring), "ACQUIRING");
}

TEST(TrackerConfigTest, Validation) {
  TrackerConfig t;
  EXPECT_NO_THROW(t.validate());
  t.T_meas = 0.9;  // not a multiple
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.T_meas = 1.2;
  EXPECT_NO_THROW(t.validate());
  t = {};
  t.T_feed = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.lost_after = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.half_window = 100;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.ewma_alpha = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
  EXPECT_THROW(SyncTracker(TrackerConfig{}, {}, 0.0), ConfigError);
}

TEST(Tracker, WindowSizeFollowsFeedbackPeriod) {
  TrackerConfig t;
  SyncTracker tracker(t, {}, 0.1);
  EXPECT_EQ(tracker.packages_per_window(), 6u);
}

TEST(Tracker, LocksAndFollowsConstantSkew) {
  const auto cfg = steady(12.0);
  const auto s = generate_session(cfg);
  SyncTracker tracker(fast_config(cfg), truth_mapping(cfg), cfg.T_A);
  const double u = cfg.clock.skew_u / (1.0 + cfg.clock.skew_u);

  std::vector<double> skew_errors;
  double last_time = -1e300;
  for (std::size_t i = 0; i < s.alice.packages.size(); ++i) {
    if (!tracker.push(s.alice.packages[i], s.bob.packages[i])) continue;
    const auto& st = tracker.state();
    EXPECT_EQ(st.status, SyncStatus::Locked);
    ASSERT_FALSE(st.history.empty());
    EXPECT_GT(st.history.back().time, last_time);
    last_time = st.history.back().time;
    if (st.updates >= 2) skew_errors.push_back(st.skew_est() - u);
  }
  ASSERT_GE(skew_errors.size(), 10u);

  // Spread of the skew updates against sqrt(2) * sigma / sqrt(N) / T_meas.
  const double pairs_per_window = cfg.r_C * cfg.T_feed;
  const double location_error = cfg.sigma_det * 1e12 / std::sqrt(pairs_per_window);
  const double predicted = std::sqrt(2.0) * location_error / (cfg.T_feed * 1e12);
  double ss = 0.0;
  for (double e : skew_errors) ss += e * e;
  const double rms = std::sqrt(ss / static_cast<double>(skew_errors.size()));
  EXPECT_LT(rms, 1.6 * predicted) << "predicted " << predicted;
  EXPECT_GT(rms, 0.4 * predicted) << "predicted " << predicted;
}

TEST(Tracker, HistoryTimesStrictlyIncreasingAndBounded) {
  const auto cfg = steady(6.0);
  const auto s = generate_session(cfg);
  TrackerConfig t = fast_config(cfg);
  t.history_size = 4;
  SyncTracker tracker(t, truth_mapping(cfg), cfg.T_A);
  for (std::size_t i = 0; i < s.alice.packages.size(); ++i) tracker.push(s.alice.packages[i], s.bob.packages[i]);
  const auto& h = tracker.state().history;
  ASSERT_EQ(h.size(), 4u);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GT(h[i].time, h[i - 1].time);
}

TEST(Tracker, LiveTrackIsPure) {
  const auto cfg = steady(1.2);
  const auto s = generate_session(cfg);
  std::vector<MatchedPair> window;
  for (std::size_t i = 0; i < 6; ++i) window.push_back({&s.alice.packages[i], &s.bob.packages[i]});
  SyncState state;
  state.mapping = truth_mapping(cfg);
  const auto t = fast_config(cfg);
  const SyncState a = live_track(state, window, t);
  const SyncState b = live_track(state, window, t);
  EXPECT_EQ(a.mapping.offset, b.mapping.offset);
  EXPECT_EQ(a.mapping.skew, b.mapping.skew);
  EXPECT_EQ(a.last_significance, b.last_significance);
  EXPECT_EQ(state.updates, 0u);
  EXPECT_EQ(state.status, SyncStatus::Acquiring);
  EXPECT_EQ(a.status, SyncStatus::Locked);
  EXPECT_NEAR(a.mapping.at(a.mapping.pivot), truth_mapping(cfg).at(a.mapping.pivot), 50.0);
}

TEST(Tracker, EmptyPackagesHoldEstimatesThenLose) {
  const auto cfg = steady(4.8);
  const auto s = generate_session(cfg);
  const auto t = fast_config(cfg);
  SyncTracker tracker(t, truth_mapping(cfg), cfg.T_A);
  const std::size_t per = tracker.packages_per_window();

  std::size_t i = 0;
  for (; i < 2 * per; ++i) tracker.push(s.alice.packages[i], s.bob.packages[i]);
  ASSERT_EQ(tracker.state().status, SyncStatus::Locked);
  const OffsetMapping held = tracker.mapping();

  // Bob goes dark: empty packages with the right boundaries.
  std::vector<DataPackage> dark;
  for (std::size_t k = 0; k < 3 * per; ++k) {
    const auto& b = s.bob.packages[i + k];
    dark.emplace_back(b.index(), b.start(), b.duration(), std::vector<TimeTag>{});
  }
  for (std::size_t k = 0; k < 3 * per; ++k) {
    tracker.push(s.alice.packages[i + k], dark[k]);
    if ((k + 1) % per == 0 && k + 1 < 3 * per) EXPECT_EQ(tracker.state().status, SyncStatus::Locked);
  }
  EXPECT_EQ(tracker.state().status, SyncStatus::Lost);
  EXPECT_EQ(tracker.state().lost_transitions, 1u);
  EXPECT_EQ(tracker.mapping().offset, held.offset);
  EXPECT_EQ(tracker.mapping().skew, held.skew);
  i += 3 * per;

  // Signal returns on the held mapping.
  for (std::size_t k = 0; k < 2 * per && i < s.alice.packages.size(); ++k, ++i)
    tracker.push(s.alice.packages[i], s.bob.packages[i]);
  EXPECT_EQ(tracker.state().status, SyncStatus::Locked);
  EXPECT_EQ(tracker.state().lost_transitions, 1u);
}

TEST(Tracker, StaysLockedWithoutDrift) {
  // Zero drift and fixed rates: a LOCKED tracker must not drop out.
  auto cfg = steady(30.0, -4e-6);
  cfg.T_feed = 0.1;
  const auto s = generate_session(cfg);
  const auto t = fast_config(cfg);
  SyncTracker tracker(t, truth_mapping(cfg), cfg.T_A);
  std::size_t windows = 0;
  for (std::size_t i = 0; i < s.alice.packages.size(); ++i)
    if (tracker.push(s.alice.packages[i], s.bob.packages[i])) ++windows;
  EXPECT_GE(windows, 290u);
  EXPECT_EQ(tracker.state().lost_transitions, 0u);
  EXPECT_EQ(tracker.state().status, SyncStatus::Locked);
}

TEST(Tracker, HoldsLockUnderStrongConstantDrift) {
  // a * T_feed^2 of 4 ns smears each window far beyond the detector width.
  ScenarioConfig cfg = steady(30.0);
  cfg.clock.drift_a = 1e-9;
  cfg.T_feed = 2.0;
  const auto s = generate_session(cfg);
  SyncTracker tracker(fast_config(cfg), truth_mapping(cfg), cfg.T_A);
  std::size_t windows = 0;
  for (std::size_t i = 0; i < s.alice.packages.size(); ++i) {
    if (!tracker.push(s.alice.packages[i], s.bob.packages[i])) continue;
    ++windows;
    const auto& st = tracker.state();
    EXPECT_EQ(st.status, SyncStatus::Locked) << "window " << windows;
    if (windows < 3) continue;
    // Skew of the truth at the window end, against the estimate lagging it by
    // about one and a half feedback periods.
    const double t_end = static_cast<double>(s.bob.packages[i].end()) * 1e-12;
    const double truth = cfg.clock.skew_u + cfg.clock.drift_a * t_end;
    EXPECT_NEAR(st.skew_est(), truth, 2.0 * cfg.clock.drift_a * cfg.T_feed) << "window " << windows;
  }
  EXPECT_EQ(tracker.state().lost_transitions, 0u);
  EXPECT_GE(windows, 14u);
}
