#pragma once
// Helpers shared by the unit tests. The reference implementations here are
// written independently of the library and kept deliberately naive.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "photonsync/correlation.hpp"
#include "photonsync/timetag.hpp"

namespace photonsync::testing {

inline Ticks floor_div(Ticks a, Ticks b) {
  Ticks q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Every (a, b) pair, binned by floor(b/w) - floor(a/w).
inline std::vector<std::int64_t> brute_force_histogram(const std::vector<Ticks>& a, const std::vector<Ticks>& b,
                                                       Ticks w, Ticks lo, Ticks hi) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>((hi - lo) / w), 0);
  const Ticks lo_bin = lo / w;
  for (Ticks x : a)
    for (Ticks y : b) {
      const Ticks k = floor_div(y, w) - floor_div(x, w) - lo_bin;
      if (k >= 0 && k < static_cast<Ticks>(counts.size())) ++counts[static_cast<std::size_t>(k)];
    }
  return counts;
}

inline std::vector<Ticks> random_sorted(std::mt19937_64& rng, std::size_t n, Ticks lo, Ticks hi) {
  std::uniform_int_distribution<Ticks> d(lo, hi - 1);
  std::vector<Ticks> v(n);
  for (auto& t : v) t = d(rng);
  std::sort(v.begin(), v.end());
  return v;
}

inline DataPackage make_package(std::uint64_t index, Ticks start, Ticks duration, std::vector<Ticks> times,
                                std::uint8_t channel = 0) {
  std::vector<TimeTag> tags;
  for (Ticks t : times) tags.push_back({t, channel});
  return DataPackage(index, start, duration, std::move(tags));
}

}  // namespace photonsync::testing
