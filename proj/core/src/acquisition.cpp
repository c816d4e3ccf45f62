#include "photonsync/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

struct Merged {
  std::vector<Ticks> a;
  std::vector<Ticks> b;
  Ticks anchor = 0;
  Ticks end = 0;
};

Merged merge(std::span<const MatchedPair> pairs) {
  if (pairs.empty()) throw DomainError("no matched packages");
  Merged m;
  m.anchor = pairs.front().bob->start();
  m.end = pairs.back().bob->end();
  for (const auto& p : pairs) {
    for (const auto& t : p.alice->tags()) m.a.push_back(t.timestamp);
    for (const auto& t : p.bob->tags()) m.b.push_back(t.timestamp);
  }
  // Packages arrive in index order, so the concatenation is sorted unless
  // a caller passes them shuffled.
  if (!std::is_sorted(m.a.begin(), m.a.end())) std::sort(m.a.begin(), m.a.end());
  if (!std::is_sorted(m.b.begin(), m.b.end())) std::sort(m.b.begin(), m.b.end());
  return m;
}

Ticks round_up(Ticks v, Ticks w) { return (v + w - 1) / w * w; }

// Chance that the largest of `bins` Poisson(mean) bins reaches `count`.
double max_bin_p_value(double count, double mean, std::size_t bins) {
  if (count <= mean) return 1.0;
  if (mean <= 0.0) return 0.0;
  const auto k0 = static_cast<long>(std::ceil(count));
  double tail = 0.0;
  for (long k = k0; k < k0 + 2000; ++k) {
    const double term = std::exp(static_cast<double>(k) * std::log(mean) - mean - std::lgamma(k + 1.0));
    tail += term;
    if (term < 1e-18 * tail) break;
  }
  tail = std::min(tail, 1.0);
  return -std::expm1(static_cast<double>(bins) * std::log1p(-tail));
}

DelayWindow fine_delay_window(const ScanConfig& scan) {
  const Ticks half = round_up(scan.fine_window / 2, scan.fine_bin);
  return {-half, half};
}

Ticks floor_div(Ticks x, Ticks w) {
  Ticks q = x / w;
  if ((x % w != 0) && (x < 0)) --q;
  return q;
}

}  // namespace

void ScanConfig::validate() const {
  if (!(skew_step > 0)) throw ConfigError("skew_step must be positive");
  if (!(skew_hi >= skew_lo)) throw ConfigError("skew_hi must not be below skew_lo");
  const double points = std::floor((skew_hi - skew_lo) / skew_step + 1e-9) + 1;
  if (!seed_skew && points > static_cast<double>(scan_budget))
    throw ConfigError("skew scan needs " + std::to_string(static_cast<long long>(points)) +
                      " points, budget is " + std::to_string(scan_budget));
  if (coarse_bin < 0 || coarse_half_span <= 0) throw ConfigError("invalid coarse histogram");
  if (!(fine_step > 0) || fine_half_range < 0) throw ConfigError("invalid fine grid");
  if (fine_bin <= 0 || fine_window < 2 * fine_bin) throw ConfigError("invalid fine window");
  if (fine_packages == 0 || max_acquisition_packages == 0) throw ConfigError("package counts must be positive");
  if (!(expected_sigma_ps > 0)) throw ConfigError("expected_sigma_ps must be positive");
}

std::vector<double> ScanConfig::skew_grid() const {
  if (seed_skew) return {*seed_skew};
  const auto n = static_cast<std::size_t>(std::floor((skew_hi - skew_lo) / skew_step + 1e-9));
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = skew_lo + static_cast<double>(i) * skew_step;
  return grid;
}

std::vector<double> ScanConfig::fine_grid(double coarse) const {
  const double half = fine_half_range > 0 ? fine_half_range : 0.5 * skew_step + 10e-9;
  const auto m = static_cast<long>(std::floor(half / fine_step + 1e-9));
  std::vector<double> grid;
  for (long j = -m; j <= m; ++j) grid.push_back(coarse + static_cast<double>(j) * fine_step);
  return grid;
}

Ticks ScanConfig::coarse_bin_for(Ticks window_ticks) const {
  if (coarse_bin > 0) return coarse_bin;
  return std::max<Ticks>(1000, std::llround(0.5 * skew_step * static_cast<double>(window_ticks)));
}

Alignment align_packages(const PackageStream& alice, const PackageStream& bob,
                         std::uint64_t max_index_slip) {
  if (alice.packages.empty() || bob.packages.empty()) throw AlignmentError("empty package stream");
  const std::uint64_t a0 = alice.packages.front().index();
  const std::uint64_t b0 = bob.packages.front().index();
  const std::uint64_t slip = a0 > b0 ? a0 - b0 : b0 - a0;
  if (slip > max_index_slip)
    throw AlignmentError("package indices slip by " + std::to_string(slip) + ", limit " +
                         std::to_string(max_index_slip));

  std::map<std::uint64_t, const DataPackage*> by_index;
  for (const auto& p : bob.packages) by_index.emplace(p.index(), &p);
  Alignment out;
  std::map<std::uint64_t, bool> seen;
  for (const auto& p : alice.packages) {
    auto it = by_index.find(p.index());
    if (it == by_index.end()) {
      out.missing.push_back(p.index());
      continue;
    }
    out.pairs.push_back({&p, it->second});
    seen[p.index()] = true;
  }
  for (const auto& p : bob.packages)
    if (!seen.count(p.index())) out.missing.push_back(p.index());
  std::sort(out.missing.begin(), out.missing.end());
  out.missing.erase(std::unique(out.missing.begin(), out.missing.end()), out.missing.end());
  if (out.pairs.empty()) throw AlignmentError("no package index present on both sides");
  return out;
}

AcquisitionResult acquire_offset(std::span<const MatchedPair> pairs, const ScanConfig& scan) {
  scan.validate();
  const Merged m = merge(pairs);
  const Ticks w = scan.coarse_bin_for(m.end - m.anchor);
  const Ticks half = round_up(scan.coarse_half_span, w);
  const DelayWindow window{-half, half};
  const double smear = 0.5 * scan.skew_step * static_cast<double>(m.end - m.anchor);
  const std::size_t exclusion = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::ceil((5.0 * scan.expected_sigma_ps + smear) / static_cast<double>(w))));

  AcquisitionResult best;
  best.significance = -std::numeric_limits<double>::infinity();
  best.anchor = m.anchor;
  best.bin_width = w;
  best.packages = pairs.size();
  for (double du : scan.skew_grid()) {
    const auto corrected = skew_correct(m.b, du, m.anchor);
    const auto h = binned_xcorr(m.a, corrected, w, window);
    ScanPoint point{du, 0.0, 0.0};
    try {
      const PeakStats s = peak_stats(h, exclusion);
      point.significance = s.significance;
      point.peak_delay = s.peak_delay;
    } catch (const NoSignalError&) {
    }
    best.scan.push_back(point);
    if (point.significance > best.significance) {
      best.significance = point.significance;
      best.skew = du;
      best.offset_ps = point.peak_delay;
    }
  }
  if (!(best.significance >= scan.lock_threshold))
    throw AcquisitionError("best significance " + std::to_string(best.significance) +
                           " below threshold " + std::to_string(scan.lock_threshold));
  return best;
}

CorrelationHistogram fine_histogram(std::span<const MatchedPair> pairs, double du, double offset_ps,
                                    const ScanConfig& scan) {
  const Merged m = merge(pairs);
  auto corrected = skew_correct(m.b, du, m.anchor);
  const Ticks shift = std::llround(offset_ps);
  for (auto& t : corrected) t -= shift;
  return start_stop_histogram(m.a, corrected, scan.fine_bin, fine_delay_window(scan));
}

namespace {

FineTuneResult fine_scan(std::span<const MatchedPair> pairs, double coarse, double offset_ps,
                         const ScanConfig& scan) {
  const Merged m = merge(pairs);
  const std::vector<double> grid = scan.fine_grid(coarse);
  const DelayWindow window = fine_delay_window(scan);
  const Ticks w = scan.fine_bin;
  const Ticks shift = std::llround(offset_ps);

  // Every (a, b) pair that can land in the window for some grid skew. Only
  // these are re-binned per grid point, which gives the same histogram as
  // a full Start-Stop pass over the whole merged window.
  double max_dev = 0.0;
  for (double du : grid) max_dev = std::max(max_dev, std::abs(du - coarse));
  const double span = static_cast<double>(std::max<Ticks>(m.end - m.anchor, 1));
  const Ticks margin = static_cast<Ticks>(std::ceil(max_dev * span)) + 2 * w + 1000;
  std::vector<std::pair<Ticks, Ticks>> candidates;
  {
    const auto base = skew_correct(m.b, coarse, m.anchor);
    std::size_t first = 0;
    for (Ticks a : m.a) {
      while (first < base.size() && base[first] - shift - a < window.lo - margin) ++first;
      for (std::size_t j = first; j < base.size() && base[j] - shift - a < window.hi + margin; ++j)
        candidates.emplace_back(a, m.b[j]);
    }
  }

  const Ticks lo_bin = window.lo / w;
  const auto bins = static_cast<std::size_t>((window.hi - window.lo) / w);
  // Keep the peak plus the smear a skew error can cause out of the
  // background estimate, leaving at least three quarters of the window.
  auto exclusion_for = [&](double du) {
    const double smear = (std::abs(du - coarse) + 0.5 * scan.skew_step) * span;
    const std::size_t want = default_exclusion(w, scan.expected_sigma_ps) +
                             static_cast<std::size_t>(std::ceil(smear / static_cast<double>(w)));
    return std::min(want, bins / 8);
  };
  std::vector<CorrelationHistogram> hists;
  std::vector<PeakStats> stats(grid.size());
  FineTuneResult out;
  out.anchor = m.anchor;
  out.curve.resize(grid.size());
  std::vector<PeakFit> fits(grid.size());

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double du = grid[g];
    CorrelationHistogram h;
    h.bin_width = w;
    h.delay_lo = window.lo;
    h.counts.assign(bins, 0);
    h.n_a = m.a.size();
    h.n_b = m.b.size();
    for (const auto& [a, b] : candidates) {
      const Ticks c = b - std::llround(du * static_cast<double>(b - m.anchor)) - shift;
      const Ticks k = floor_div(c, w) - floor_div(a, w) - lo_bin;
      if (k >= 0 && k < static_cast<Ticks>(bins)) ++h.counts[static_cast<std::size_t>(k)];
    }
    FineTunePoint& pt = out.curve[g];
    pt.skew = du;
    pt.peak_height = *std::max_element(h.counts.begin(), h.counts.end());
    pt.in_window = std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t{0});
    try {
      stats[g] = peak_stats(h, exclusion_for(du));
      pt.significance = stats[g].significance;
    } catch (const NoSignalError&) {
    }
    hists.push_back(std::move(h));
  }

  // Only points within an order of magnitude of the best peak are fitted;
  // further out the peak is smeared into the background, and with sparse
  // backgrounds single stray counts already reach S ~ 10, so the peak bin
  // must also be improbable as the maximum of pure background.
  double best_significance = 0.0;
  for (const auto& pt : out.curve) best_significance = std::max(best_significance, pt.significance);
  const double fit_gate = std::max(8.0, 0.1 * best_significance);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    FineTunePoint& pt = out.curve[g];
    if (pt.significance < fit_gate) continue;
    if (max_bin_p_value(stats[g].peak_height, stats[g].background_mean, hists[g].bins()) > 1e-3) continue;
    try {
      fits[g] = fit_peak(hists[g], FitOptions{scan.expected_sigma_ps});
      // A width below one bin is a fit to a noise spike; one spanning a
      // large part of the window, or a centre near its edge, is a fit to
      // the background.
      const double span_ps = static_cast<double>(window.hi - window.lo);
      const double edge = static_cast<double>(window.hi) - 4.0 * fits[g].sigma;
      pt.fitted = fits[g].sigma >= static_cast<double>(w) && fits[g].sigma <= span_ps / 16 &&
                  std::abs(fits[g].center_tau) <= edge;
      pt.center = fits[g].center_tau;
      pt.sigma = fits[g].sigma;
    } catch (const FitError&) {
    }
  }

  double sigma_min = std::numeric_limits<double>::infinity();
  for (const auto& pt : out.curve)
    if (pt.fitted && pt.sigma < sigma_min) sigma_min = pt.sigma;
  if (!std::isfinite(sigma_min)) throw FineTuneError("no grid point produced a fittable peak");

  double best_car = -std::numeric_limits<double>::infinity();
  double worst_car = std::numeric_limits<double>::infinity();
  double best_sigma = std::numeric_limits<double>::infinity();
  std::int64_t best_counts = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    FineTunePoint& pt = out.curve[g];
    if (!pt.fitted) continue;
    const double floor = 0.5 / static_cast<double>(std::max<std::size_t>(stats[g].background_bins, 1));
    const double bg = std::max(stats[g].background_mean, floor);
    pt.car = measured_car(hists[g], pt.center, sigma_min, bg);
    if (pt.car > best_car) {
      best_car = pt.car;
      out.best_index = g;
      best_counts = counts_within(hists[g], pt.center, sigma_min);
    }
    worst_car = std::min(worst_car, pt.car);
    if (pt.sigma < best_sigma) {
      best_sigma = pt.sigma;
      out.min_width_index = g;
    }
  }
  const double car_error = (best_car + 1.0) / std::sqrt(static_cast<double>(std::max<std::int64_t>(best_counts, 1)));
  const auto n_fitted = std::count_if(out.curve.begin(), out.curve.end(), [](const auto& p) { return p.fitted; });
  if (n_fitted > 1 && best_car - worst_car < 3.0 * car_error)
    throw FineTuneError("CAR is flat across the fine grid");

  out.skew = grid[out.best_index];
  out.fit = fits[out.best_index];
  out.car = best_car;
  out.offset_ps = static_cast<double>(shift) + out.fit.center_tau;
  return out;
}

}  // namespace

FineTuneResult fine_tune_skew(std::span<const MatchedPair> pairs, double coarse, double offset_ps,
                              const ScanConfig& scan) {
  scan.validate();
  FineTuneResult out = fine_scan(pairs, coarse, offset_ps, scan);
  // An optimum on the rim of the grid may lie beyond it (the coarse step
  // leaves up to half a step plus noise); rescan around it.
  for (int attempt = 0; attempt < 3; ++attempt) {
    const std::size_t n = out.curve.size();
    if (n < 5 || (out.best_index >= 2 && out.best_index + 2 < n)) break;
    const double center = out.skew;
    const double offset_at_anchor = out.offset_ps;
    out = fine_scan(pairs, center, offset_at_anchor, scan);
  }
  return out;
}

}  // namespace photonsync
