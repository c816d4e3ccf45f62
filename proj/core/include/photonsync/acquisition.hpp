#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "photonsync/correlation.hpp"
#include "photonsync/peak_fit.hpp"
#include "photonsync/timetag.hpp"

namespace photonsync {

/// Skew search and fine tuning parameters. Skews in s/s, times in ps.
struct ScanConfig {
  double skew_lo = -20e-6;
  double skew_hi = 20e-6;
  double skew_step = 0.14e-6;
  std::size_t scan_budget = 300;

  /// Coarse histogram bin; 0 picks the largest smear a grid point can
  /// leave over the acquisition window, skew_step/2 * T (7 ns at 100 ms).
  Ticks coarse_bin = 0;
  Ticks coarse_half_span = 10'000'000;
  double lock_threshold = 10.0;
  /// Packages merged for acquisition: tries 1, 2, 4, ... up to this.
  std::size_t max_acquisition_packages = 8;

  double fine_step = 1e-9;
  /// Half range of the fine grid around the coarse skew; 0 = skew_step/2 + 10 ns/s.
  double fine_half_range = 0.0;
  Ticks fine_window = 100'000;
  Ticks fine_bin = 20;
  std::size_t fine_packages = 10;

  /// Expected peak RMS (ps) for exclusion windows and fit starts.
  double expected_sigma_ps = 300.0;

  /// Skew known from an earlier session: collapses the scan to one point.
  std::optional<double> seed_skew;

  /// Throws ConfigError.
  void validate() const;
  std::vector<double> skew_grid() const;
  std::vector<double> fine_grid(double coarse) const;
  Ticks coarse_bin_for(Ticks window_ticks) const;
};

struct MatchedPair {
  const DataPackage* alice = nullptr;
  const DataPackage* bob = nullptr;
};

struct Alignment {
  std::vector<MatchedPair> pairs;
  std::vector<std::uint64_t> missing;  // indices present on only one side
};

/// Pairs packages of equal index. Throws AlignmentError when the streams
/// do not overlap or their first indices differ by more than max_index_slip.
Alignment align_packages(const PackageStream& alice, const PackageStream& bob,
                         std::uint64_t max_index_slip = 4);

struct ScanPoint {
  double skew = 0.0;
  double significance = 0.0;
  double peak_delay = 0.0;
};

struct AcquisitionResult {
  double offset_ps = 0.0;  // Bob minus Alice at `anchor`
  double skew = 0.0;
  double significance = 0.0;
  Ticks anchor = 0;        // Bob local time the offset refers to
  Ticks bin_width = 0;
  std::size_t packages = 0;
  std::vector<ScanPoint> scan;
};

/// Skew scan over merged matched packages: for each grid skew the Bob tags
/// are corrected relative to the first Bob package start and
/// cross-correlated. Returns the most significant candidate (lowest skew on
/// ties). Throws AcquisitionError when it stays below lock_threshold.
AcquisitionResult acquire_offset(std::span<const MatchedPair> pairs, const ScanConfig& scan);

struct FineTunePoint {
  double skew = 0.0;
  bool fitted = false;
  double significance = 0.0;
  std::int64_t peak_height = 0;  // tallest bin
  std::int64_t in_window = 0;    // all counts in the fine window
  double center = 0.0;  // ps, relative to the coarse offset
  double sigma = 0.0;
  double car = 0.0;
};

struct FineTuneResult {
  double skew = 0.0;
  double offset_ps = 0.0;  // at anchor
  Ticks anchor = 0;
  PeakFit fit;
  double car = 0.0;
  std::size_t best_index = 0;       // CAR maximum
  std::size_t min_width_index = 0;  // fitted width minimum
  std::vector<FineTunePoint> curve;
};

/// Start-Stop fine scan around `coarse` with all packages anchored at the
/// first Bob package start. `offset_ps` is the offset at that anchor.
/// Selects the CAR maximum; throws FineTuneError when the curve is flat.
FineTuneResult fine_tune_skew(std::span<const MatchedPair> pairs, double coarse, double offset_ps,
                              const ScanConfig& scan);

/// Histogram the fine scan evaluates at one skew, computed the long way
/// (full correction and Start-Stop sweep). Reference for the fast path.
CorrelationHistogram fine_histogram(std::span<const MatchedPair> pairs, double du, double offset_ps,
                                    const ScanConfig& scan);

}  // namespace photonsync
