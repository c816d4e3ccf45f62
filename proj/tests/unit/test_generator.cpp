#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "photonsync/correlation.hpp"
#include "photonsync/errors.hpp"
#include "photonsync/scenario.hpp"
#include "photonsync/session_generator.hpp"

using namespace photonsync;

namespace {

std::size_t tag_count(const PackageStream& s) {
  return std::accumulate(s.packages.begin(), s.packages.end(), std::size_t{0},
                         [](std::size_t n, const DataPackage& p) { return n + p.size(); });
}

std::vector<Ticks> all_times(const PackageStream& s) {
  std::vector<Ticks> v;
  for (const auto& p : s.packages)
    for (const auto& t : p.tags()) v.push_back(t.timestamp);
  return v;
}

void expect_poisson(double observed, double expected) {
  EXPECT_NEAR(observed, expected, 5.0 * std::sqrt(expected)) << "expected " << expected;
}

ScenarioConfig table1a(double seconds) {
  ScenarioConfig c = scenario_preset("low-loss");
  c.duration = seconds;
  return c;
}

}  // namespace

TEST(Generator, AliceCountAtTable1aRates) {
  const auto s = generate_session(table1a(10.0));
  expect_poisson(static_cast<double>(tag_count(s.alice)), 2.71e6);
  expect_poisson(static_cast<double>(tag_count(s.bob)), 2.83e6);
  expect_poisson(static_cast<double>(s.truth.pair_times.size()), 1.03e5);
}

TEST(Generator, PackagesAreContiguousAndCoverTheSession) {
  auto c = table1a(1.0);
  const auto s = generate_session(c);
  EXPECT_NO_THROW(s.alice.validate());
  EXPECT_NO_THROW(s.bob.validate());
  EXPECT_EQ(s.alice.packages.size(), 10u);
  EXPECT_EQ(s.bob.packages.size(), 10u);
  EXPECT_EQ(s.alice.party, Party::Alice);
  EXPECT_EQ(s.bob.party, Party::Bob);
  for (const auto& p : s.bob.packages)
    for (const auto& t : p.tags()) EXPECT_EQ(t.channel, default_channel(Party::Bob));
}

TEST(Generator, PairJitterMatchesSigmaDet) {
  ScenarioConfig c;
  c.r_A = c.r_B = c.r_C = 1e5;
  c.sigma_det = 300e-12;
  c.duration = 1.0;
  c.T_feed = 0.1;
  c.clock = ClockModel{};
  const auto s = generate_session(c);
  ASSERT_GT(s.truth.pair_times.size(), 90'000u);
  double sq = 0.0;
  for (const auto& p : s.truth.pair_times) sq += std::pow(static_cast<double>(p.bob - p.alice), 2);
  const double rms = std::sqrt(sq / static_cast<double>(s.truth.pair_times.size()));
  EXPECT_NEAR(rms, 300.0, 15.0);
}

TEST(Generator, NoCoincidencesNoPeak) {
  ScenarioConfig c;
  c.r_A = c.r_B = 1e5;
  c.r_C = 0.0;
  c.duration = 0.1;
  c.T_feed = 0.1;
  c.clock = ClockModel{};
  int peaks = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    c.seed = seed;
    const auto s = generate_session(c);
    const auto h = binned_xcorr(all_times(s.alice), all_times(s.bob), 100'000, {-10'000'000, 10'000'000});
    if (peak_stats(h, 3).significance > 5.0) ++peaks;
  }
  EXPECT_EQ(peaks, 0);
}

TEST(Generator, DeterministicGivenSeed) {
  auto c = table1a(0.3);
  const auto a = generate_session(c), b = generate_session(c);
  EXPECT_EQ(a.alice.packages, b.alice.packages);
  EXPECT_EQ(a.bob.packages, b.bob.packages);
  c.seed = 2;
  EXPECT_NE(generate_session(c).alice.packages, a.alice.packages);
}

TEST(Generator, StreamingMatchesWholeSession) {
  const auto c = table1a(0.5);
  const auto whole = generate_session(c);
  SessionGenerator gen(c);
  std::size_t i = 0, pairs = 0;
  while (auto p = gen.next()) {
    ASSERT_LT(i, whole.alice.packages.size());
    EXPECT_EQ(p->alice, whole.alice.packages[i]);
    EXPECT_EQ(p->bob, whole.bob.packages[i]);
    for (const auto& pr : p->pairs) {
      EXPECT_GE(pr.bob, p->bob.start());
      EXPECT_LT(pr.bob, p->bob.end());
    }
    pairs += p->pairs.size();
    ++i;
  }
  EXPECT_EQ(i, whole.alice.packages.size());
  EXPECT_EQ(pairs, whole.truth.pair_times.size());
}

TEST(Generator, BobTimesFollowTheClockModel) {
  auto c = table1a(1.0);
  c.clock = ClockModel{3.2e-6, 18.5e-6, 320e-12, 0.0};
  const auto s = generate_session(c);
  for (std::size_t i = 0; i < s.truth.pair_times.size(); i += 997) {
    const auto& p = s.truth.pair_times[i];
    const double expected = s.truth.local_time(static_cast<double>(p.bob_true) / kTicksPerSecond) * kTicksPerSecond;
    EXPECT_NEAR(static_cast<double>(p.bob), expected, 1.0);
  }
}

TEST(Generator, LossScaling) {
  auto c = table1a(10.0);
  const auto full = generate_session(c);
  c.transmission_T = 0.5;
  const auto half = generate_session(c);
  const double pairs_full = static_cast<double>(full.truth.pair_times.size());
  const double pairs_half = static_cast<double>(half.truth.pair_times.size());
  expect_poisson(pairs_half, 0.5 * 1.03e5);
  EXPECT_NEAR(pairs_half / pairs_full, 0.5, 5.0 * std::sqrt(0.25 / pairs_full + 0.25 / pairs_half) + 0.01);
  expect_poisson(static_cast<double>(tag_count(half.bob)), 0.5 * 2.83e6);
  expect_poisson(static_cast<double>(tag_count(half.alice)), 2.71e6);
}

TEST(Generator, DarkCountsUnaffectedByLoss) {
  auto c = table1a(2.0);
  c.r_dark = 50e3;
  c.transmission_T = 0.01;
  const auto s = generate_session(c);
  expect_poisson(static_cast<double>(tag_count(s.bob)), (283e3 * 0.01 + 50e3) * 2.0);
}

TEST(Generator, InconsistentRatesAreConfigErrors) {
  ScenarioConfig c;
  c.r_C = c.r_A + 1;
  EXPECT_THROW(generate_session(c), ConfigError);
  c = ScenarioConfig{};
  c.transmission_T = 0.0;
  EXPECT_THROW(generate_session(c), ConfigError);
  c = ScenarioConfig{};
  c.T_feed = 0.25;
  EXPECT_THROW(generate_session(c), ConfigError);
  c = ScenarioConfig{};
  c.r_dark = -1;
  EXPECT_THROW(generate_session(c), ConfigError);
}

TEST(CoincidenceOracle, CountsAtTable1bRates) {
  auto c = scenario_preset("high-loss");
  c.duration = 10.0;
  const auto s = generate_session(c);
  const auto pairs = coincidence_oracle(s.truth, s.alice, s.bob);
  expect_poisson(static_cast<double>(pairs.size()), 3600.0);
  EXPECT_EQ(pairs.size(), s.truth.pair_times.size());
}

TEST(CoincidenceOracle, WindowAndTotalLoss) {
  auto c = table1a(0.2);
  c.transmission_T = 1e-9;
  const auto s = generate_session(c);
  EXPECT_TRUE(coincidence_oracle(s.truth, s.alice, s.bob).empty());

  auto c2 = table1a(0.2);
  c2.clock = ClockModel{};
  const auto s2 = generate_session(c2);
  const auto all = coincidence_oracle(s2.truth, s2.alice, s2.bob);
  const auto narrow = coincidence_oracle(s2.truth, s2.alice, s2.bob, 205e-12);
  EXPECT_LT(narrow.size(), all.size());
  // |N(0, 205 ps)| within 205 ps keeps ~68 %.
  EXPECT_NEAR(static_cast<double>(narrow.size()) / static_cast<double>(all.size()), 0.6827, 0.03);
  for (const auto& [a, b] : all) {
    const auto& pa = s2.alice.packages;
    EXPECT_TRUE(std::any_of(pa.begin(), pa.end(), [a = a](const DataPackage& p) {
      return std::binary_search(p.tags().begin(), p.tags().end(), TimeTag{a, 0},
                                [](const TimeTag& x, const TimeTag& y) { return x.timestamp < y.timestamp; });
    }));
    (void)b;
  }
}
