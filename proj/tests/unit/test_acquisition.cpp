#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "photonsync/acquisition.hpp"
#include "photonsync/errors.hpp"
#include "photonsync/scenario.hpp"
#include "photonsync/session_generator.hpp"
#include "support.hpp"

using namespace photonsync;
using photonsync::testing::make_package;

namespace {

PackageStream stream_of(Party party, std::vector<std::uint64_t> indices) {
  PackageStream s{party, {}};
  for (auto i : indices) {
    const Ticks start = static_cast<Ticks>(i) * 100'000'000'000;
    s.packages.push_back(make_package(i, start, 100'000'000'000, {start + 5}));
  }
  return s;
}

std::vector<MatchedPair> all_pairs(const Session& s) {
  return align_packages(s.alice, s.bob).pairs;
}

ScenarioConfig quiet_micro(double skew) {
  ScenarioConfig c = scenario_preset("micro");
  c.clock = ClockModel{3.2e-6, skew, 0.0, 0.0};
  c.duration = 2.0;
  return c;
}

}  // namespace

TEST(Align, IdenticalRangesPairFully) {
  const auto a = stream_of(Party::Alice, {0, 1, 2, 3, 4});
  const auto b = stream_of(Party::Bob, {0, 1, 2, 3, 4});
  const auto al = align_packages(a, b);
  ASSERT_EQ(al.pairs.size(), 5u);
  EXPECT_TRUE(al.missing.empty());
  for (std::size_t i = 0; i < al.pairs.size(); ++i) {
    EXPECT_EQ(al.pairs[i].alice->index(), i);
    EXPECT_EQ(al.pairs[i].bob->index(), i);
  }
}

TEST(Align, MissingIndexIsSkippedAndReported) {
  const auto a = stream_of(Party::Alice, {0, 1, 2, 3, 4, 5});
  const auto b = stream_of(Party::Bob, {0, 1, 2, 3, 5});
  const auto al = align_packages(a, b);
  ASSERT_EQ(al.pairs.size(), 5u);
  for (const auto& p : al.pairs) EXPECT_NE(p.alice->index(), 4u);
  EXPECT_EQ(al.missing, std::vector<std::uint64_t>{4});
}

TEST(Align, SlipBeyondLimitThrows) {
  const auto a = stream_of(Party::Alice, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto b = stream_of(Party::Bob, {6, 7, 8, 9});
  EXPECT_THROW(align_packages(a, b, 4), AlignmentError);
  EXPECT_NO_THROW(align_packages(a, b, 6));
}

TEST(Align, DisjointStreamsThrow) {
  EXPECT_THROW(align_packages(stream_of(Party::Alice, {0, 1}), stream_of(Party::Bob, {2, 3}), 10), AlignmentError);
  EXPECT_THROW(align_packages(stream_of(Party::Alice, {}), stream_of(Party::Bob, {0}), 10), AlignmentError);
}

TEST(ScanConfigTest, DefaultsValidateAndGridCoversRange) {
  ScanConfig scan;
  EXPECT_NO_THROW(scan.validate());
  const auto grid = scan.skew_grid();
  ASSERT_GE(grid.size(), 280u);
  EXPECT_LE(grid.size(), scan.scan_budget);
  EXPECT_DOUBLE_EQ(grid.front(), scan.skew_lo);
  EXPECT_LE(grid.back(), scan.skew_hi);
  EXPECT_GT(grid.back(), scan.skew_hi - scan.skew_step);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] - grid[i - 1], scan.skew_step, 1e-12);
}

TEST(ScanConfigTest, RejectsBadValues) {
  ScanConfig scan;
  scan.skew_step = 0.01e-6;  // 4000 points, over budget
  EXPECT_THROW(scan.validate(), ConfigError);
  scan = {};
  scan.skew_lo = 1e-6;
  scan.skew_hi = -1e-6;
  EXPECT_THROW(scan.validate(), ConfigError);
  scan = {};
  scan.fine_step = 0.0;
  EXPECT_THROW(scan.validate(), ConfigError);
  scan = {};
  scan.fine_bin = 0;
  EXPECT_THROW(scan.validate(), ConfigError);
}

TEST(ScanConfigTest, SeedCollapsesGrid) {
  ScanConfig scan;
  scan.seed_skew = 4.2e-6;
  const auto grid = scan.skew_grid();
  ASSERT_EQ(grid.size(), 1u);
  EXPECT_DOUBLE_EQ(grid[0], 4.2e-6);
}

TEST(ScanConfigTest, CoarseBinFollowsSmear) {
  ScanConfig scan;
  // 0.07e-6 * 0.1 s = 7 ns
  EXPECT_NEAR(static_cast<double>(scan.coarse_bin_for(100'000'000'000)), 7000.0, 1.0);
  scan.coarse_bin = 2000;
  EXPECT_EQ(scan.coarse_bin_for(100'000'000'000), 2000);
}

TEST(Acquire, ZeroSkewRecoversOffsetWithinOneBin) {
  const auto cfg = quiet_micro(0.0);
  const auto session = generate_session(cfg);
  const auto pairs = all_pairs(session);
  ScanConfig scan;
  const auto r = acquire_offset(pairs, scan);
  EXPECT_NEAR(r.offset_ps, cfg.clock.offset_t0 * 1e12, static_cast<double>(r.bin_width));
  EXPECT_LE(std::abs(r.skew), scan.skew_step + 1e-12);
  EXPECT_GE(r.significance, scan.lock_threshold);
  EXPECT_EQ(r.scan.size(), scan.skew_grid().size());
}

TEST(Acquire, ResidualSkewWithinHalfStep) {
  ScanConfig scan;
  for (double skew : {2.5e-6, -7.3e-6, 15.1e-6}) {
    const auto cfg = quiet_micro(skew);
    const auto session = generate_session(cfg);
    const auto r = acquire_offset(all_pairs(session), scan);
    // grid resolution plus one neighbour for Poisson ties
    EXPECT_LE(std::abs(r.skew - skew), 1.5 * scan.skew_step) << "skew " << skew;
  }
}

TEST(Acquire, ArgmaxIndependentOfTimestampScale) {
  // A common unit change (2 ps ticks) rescales time; the scan grid in s/s is
  // unchanged, so the selected index must not move.
  const auto cfg = quiet_micro(5e-6);
  const auto session = generate_session(cfg);
  ScanConfig scan;
  const auto r1 = acquire_offset(all_pairs(session), scan);

  auto rescale = [](const PackageStream& s) {
    PackageStream out{s.party, {}};
    for (const auto& p : s.packages) {
      std::vector<TimeTag> tags;
      for (auto t : p.tags()) tags.push_back({t.timestamp * 2, t.channel});
      out.packages.emplace_back(p.index(), p.start() * 2, p.duration() * 2, std::move(tags));
    }
    return out;
  };
  const auto a2 = rescale(session.alice);
  const auto b2 = rescale(session.bob);
  ScanConfig scan2 = scan;
  scan2.coarse_bin = 2 * r1.bin_width;
  scan2.coarse_half_span *= 2;
  scan2.expected_sigma_ps *= 2;
  const auto r2 = acquire_offset(align_packages(a2, b2).pairs, scan2);
  std::size_t i1 = 0, i2 = 0;
  for (std::size_t i = 0; i < r1.scan.size(); ++i) {
    if (r1.scan[i].skew == r1.skew) i1 = i;
    if (r2.scan[i].skew == r2.skew) i2 = i;
  }
  EXPECT_EQ(i1, i2);
  EXPECT_NEAR(r2.offset_ps, 2.0 * r1.offset_ps, 2.0 * static_cast<double>(r1.bin_width));
}

TEST(Acquire, NoSignalThrows) {
  // Independent streams: Bob's tags are reshuffled uniformly.
  std::mt19937_64 rng(3);
  PackageStream a{Party::Alice, {}}, b{Party::Bob, {}};
  for (std::uint64_t i = 0; i < 4; ++i) {
    const Ticks start = static_cast<Ticks>(i) * 100'000'000'000;
    a.packages.push_back(make_package(i, start, 100'000'000'000,
                                      photonsync::testing::random_sorted(rng, 500, start, start + 100'000'000'000)));
    b.packages.push_back(make_package(i, start, 100'000'000'000,
                                      photonsync::testing::random_sorted(rng, 500, start, start + 100'000'000'000)));
  }
  ScanConfig scan;
  scan.max_acquisition_packages = 4;
  EXPECT_THROW(acquire_offset(align_packages(a, b).pairs, scan), AcquisitionError);
}

TEST(FineTune, FastPathMatchesLongHistogram) {
  const auto cfg = quiet_micro(2.5e-6);
  const auto session = generate_session(cfg);
  const auto pairs = all_pairs(session);
  ScanConfig scan;
  const auto acq = acquire_offset(pairs, scan);
  const std::vector<MatchedPair> used(pairs.begin(), pairs.begin() + std::min(pairs.size(), scan.fine_packages));
  const auto fine = fine_tune_skew(used, acq.skew, acq.offset_ps, scan);
  ASSERT_FALSE(fine.curve.empty());
  for (std::size_t g : {std::size_t{0}, fine.best_index, fine.curve.size() - 1}) {
    const auto& pt = fine.curve[g];
    const auto h = fine_histogram(used, pt.skew, acq.offset_ps, scan);
    EXPECT_EQ(*std::max_element(h.counts.begin(), h.counts.end()), pt.peak_height) << g;
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t{0}), pt.in_window) << g;
  }
}

TEST(FineTune, SelectsSkewNearTruthAndWidthNearDetector) {
  const auto cfg = quiet_micro(2.5e-6);
  const auto session = generate_session(cfg);
  const auto pairs = all_pairs(session);
  ScanConfig scan;
  const auto acq = acquire_offset(pairs, scan);
  const auto fine = fine_tune_skew(pairs, acq.skew, acq.offset_ps, scan);
  // micro carries few pairs per package; tolerance follows the fit error
  EXPECT_NEAR(fine.skew, 2.5e-6, 5e-9);
  EXPECT_NEAR(fine.fit.sigma, cfg.sigma_det * 1e12, 0.25 * cfg.sigma_det * 1e12);
  EXPECT_NEAR(fine.offset_ps, cfg.clock.offset_t0 * 1e12, 500.0);
  EXPECT_TRUE(fine.curve[fine.best_index].fitted);
}

TEST(FineTune, FlatCurveThrows) {
  std::mt19937_64 rng(9);
  PackageStream a{Party::Alice, {}}, b{Party::Bob, {}};
  for (std::uint64_t i = 0; i < 4; ++i) {
    const Ticks start = static_cast<Ticks>(i) * 100'000'000'000;
    a.packages.push_back(make_package(i, start, 100'000'000'000,
                                      photonsync::testing::random_sorted(rng, 3000, start, start + 100'000'000'000)));
    b.packages.push_back(make_package(i, start, 100'000'000'000,
                                      photonsync::testing::random_sorted(rng, 3000, start, start + 100'000'000'000)));
  }
  ScanConfig scan;
  EXPECT_THROW(fine_tune_skew(align_packages(a, b).pairs, 0.0, 0.0, scan), FineTuneError);
}
