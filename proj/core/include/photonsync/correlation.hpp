#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "photonsync/timetag.hpp"

namespace photonsync {

/// Delay histogram of b - a. Both timestamps are snapped down to the bin
/// grid before differencing, so bin k holds pairs with
/// floor(b/w) - floor(a/w) == delay_lo/w + k. Bin k is centred on
/// delay_lo + k*w (the quantisation error is triangular with zero mean).
struct CorrelationHistogram {
  Ticks bin_width = 1;
  Ticks delay_lo = 0;
  std::vector<std::int64_t> counts;
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  std::size_t bins() const { return counts.size(); }
  Ticks delay_of(std::size_t k) const { return delay_lo + static_cast<Ticks>(k) * bin_width; }
  Ticks delay_hi() const { return delay_of(bins()); }
  std::int64_t total() const;
};

/// Range of delays [lo, hi) to histogram. lo must lie on the bin grid.
struct DelayWindow {
  Ticks lo = 0;
  Ticks hi = 0;

  static DelayWindow around(Ticks center, Ticks half_width) {
    return {center - half_width, center + half_width};
  }
};

enum class XcorrMethod { Auto, Fft, Direct };

inline constexpr std::size_t kMaxCorrelationBins = 100'000'000;

/// b - round(du * (b - t0)) for every tag. Order is preserved for |du| < 1.
std::vector<Ticks> skew_correct(std::span<const Ticks> tags, double du, Ticks t0);
std::vector<TimeTag> skew_correct(std::span<const TimeTag> tags, double du, Ticks t0);

/// Binned cross-correlation of two sorted tag lists. Fft evaluates the
/// correlation of the bin occupancy arrays block-wise; Direct sweeps the
/// pairs. They agree exactly. Auto picks whichever is cheaper.
CorrelationHistogram binned_xcorr(std::span<const Ticks> a, std::span<const Ticks> b,
                                  Ticks bin_width, DelayWindow window,
                                  XcorrMethod method = XcorrMethod::Auto);

/// Start-Stop histogram: each a-tag is paired with every b-tag whose
/// delay falls in the window. Linear two-pointer sweep.
CorrelationHistogram start_stop_histogram(std::span<const Ticks> a, std::span<const Ticks> b,
                                          Ticks bin_width, DelayWindow window);

/// Adds `other` into `into`. Binning must match.
void accumulate(CorrelationHistogram& into, const CorrelationHistogram& other);

struct PeakStats {
  std::size_t peak_index = 0;
  double peak_delay = 0.0;  // ps
  double peak_height = 0.0;
  double background_mean = 0.0;
  double background_std = 0.0;
  double significance = 0.0;
  std::size_t background_bins = 0;
};

inline constexpr std::size_t kMinBackgroundBins = 32;

/// Exclusion half-width (bins) covering five expected peak widths.
std::size_t default_exclusion(Ticks bin_width, double expected_sigma_ps);

/// Peak = highest bin (lowest delay on ties). Background statistics use
/// bins further than `exclusion_halfwidth` from it.
/// Throws NoSignalError for an all-zero histogram and DomainError with
/// fewer than kMinBackgroundBins background bins.
PeakStats peak_stats(const CorrelationHistogram& h, std::size_t exclusion_halfwidth);

/// Counts in bins whose centre is within half_width of center (ps).
std::int64_t counts_within(const CorrelationHistogram& h, double center, double half_width);

/// Measured coincidence-to-accidentals ratio inside center +- half_width:
/// (counts - accidentals) / accidentals with accidentals = mean
/// background per bin times the bins in the window.
double measured_car(const CorrelationHistogram& h, double center, double half_width,
                    double background_mean);

/// `delay_ps,count` CSV, one row per bin.
void write_histogram_csv(std::ostream& out, const CorrelationHistogram& h);

}  // namespace photonsync
