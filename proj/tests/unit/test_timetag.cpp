#include <gtest/gtest.h>

#include "photonsync/errors.hpp"
#include "photonsync/timetag.hpp"
#include "support.hpp"

using namespace photonsync;
using photonsync::testing::make_package;

namespace {
constexpr Ticks kNs = 1000;
constexpr Ticks kPackage = 100'000'000'000;  // 100 ms
}

TEST(DataPackage, RejectsTagsOutsideWindow) {
  EXPECT_THROW(make_package(0, 0, 10 * kNs, {10 * kNs}), WindowError);
  EXPECT_THROW(make_package(0, 5, 10 * kNs, {4}), WindowError);
  EXPECT_NO_THROW(make_package(0, 5, 10 * kNs, {5, 10 * kNs + 4}));
}

TEST(DataPackage, SortsOutOfOrderTagsAndCountsThem) {
  const auto p = make_package(0, 0, 100, {50, 10, 60, 20});
  EXPECT_EQ(p.timestamps(), (std::vector<Ticks>{10, 20, 50, 60}));
  EXPECT_GT(p.reordered_on_ingest(), 0u);
  EXPECT_EQ(make_package(0, 0, 100, {1, 2, 3}).reordered_on_ingest(), 0u);
}

TEST(MergePackages, SingleIsIdentity) {
  const auto p = make_package(4, kPackage, kPackage, {kPackage + 1, kPackage + 7});
  EXPECT_EQ(merge_packages(std::span(&p, 1)), p);
}

TEST(MergePackages, TwoPackagesConcatenateSorted) {
  std::vector<DataPackage> ps{make_package(0, 0, kPackage, {1, 2, 3, 4, 5}),
                              make_package(1, kPackage, kPackage, {kPackage, kPackage + 1, kPackage + 2,
                                                                   kPackage + 3, kPackage + 4, kPackage + 5,
                                                                   2 * kPackage - 1})};
  const auto m = merge_packages(ps);
  EXPECT_EQ(m.size(), 12u);
  EXPECT_EQ(m.duration(), 2 * kPackage);
  EXPECT_EQ(m.start(), 0);
  EXPECT_EQ(m.index(), 0u);
  EXPECT_TRUE(std::is_sorted(m.tags().begin(), m.tags().end(),
                             [](const TimeTag& a, const TimeTag& b) { return a.timestamp < b.timestamp; }));
}

TEST(MergePackages, IndexGapIsContiguityError) {
  std::vector<DataPackage> ps{make_package(3, 0, kPackage, {}), make_package(5, kPackage, kPackage, {})};
  EXPECT_THROW(merge_packages(ps), ContiguityError);
}

TEST(MergePackages, OverlappingWindowsAreContiguityError) {
  std::vector<DataPackage> ps{make_package(0, 0, kPackage, {}), make_package(1, kPackage - 1, kPackage, {})};
  EXPECT_THROW(merge_packages(ps), ContiguityError);
}

TEST(MergePackages, AssociativeOverContiguousRuns) {
  std::mt19937_64 rng(7);
  std::vector<DataPackage> ps;
  for (std::uint64_t i = 0; i < 3; ++i)
    ps.push_back(make_package(i, static_cast<Ticks>(i) * kPackage, kPackage,
                              photonsync::testing::random_sorted(rng, 50, static_cast<Ticks>(i) * kPackage,
                                                                 static_cast<Ticks>(i + 1) * kPackage)));
  const auto left_pair = merge_packages(std::span(ps).first(2));
  const std::vector<DataPackage> left{left_pair, ps[2]};
  const auto right_pair = merge_packages(std::span(ps).last(2));
  const std::vector<DataPackage> right{ps[0], right_pair};
  EXPECT_EQ(merge_packages(left), merge_packages(right));
  EXPECT_EQ(merge_packages(left), merge_packages(ps));
}

TEST(SliceWindow, KnownTags) {
  const auto p = make_package(0, 0, 10 * kNs, {1 * kNs, 5 * kNs, 9 * kNs});
  const auto s = slice_window(p, 4 * kNs, 9 * kNs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].timestamp, 5 * kNs);
}

TEST(SliceWindow, FullWindowAndEmptyIntersection) {
  const auto p = make_package(2, 100, 1000, {100, 400, 1099});
  const auto all = slice_window(p, p.start(), p.end());
  EXPECT_TRUE(std::equal(all.begin(), all.end(), p.tags().begin(), p.tags().end()));
  EXPECT_TRUE(slice_window(p, 2000, 3000).empty());
  EXPECT_TRUE(slice_window(p, 0, 100).empty());
}

TEST(SliceWindow, EmptyOrReversedRangeIsWindowError) {
  const auto p = make_package(0, 0, 100, {1});
  EXPECT_THROW(slice_window(p, 5, 5), WindowError);
  EXPECT_THROW(slice_window(p, 6, 5), WindowError);
}

TEST(PackageStream, ValidateChecksContiguity) {
  PackageStream s{Party::Bob, {make_package(0, 0, 10, {}), make_package(1, 10, 10, {})}};
  EXPECT_NO_THROW(s.validate());
  s.packages.push_back(make_package(3, 20, 10, {}));
  EXPECT_THROW(s.validate(), ContiguityError);
}
