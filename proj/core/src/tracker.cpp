#include "photonsync/tracker.hpp"

#include <algorithm>

#include "photonsync/errors.hpp"

namespace photonsync {

std::string_view to_string(SyncStatus s) {
  switch (s) {
    case SyncStatus::Acquiring: return "ACQUIRING";
    case SyncStatus::Locked: return "LOCKED";
    case SyncStatus::Lost: return "LOST";
  }
  return "?";
}

void TrackerConfig::validate() const {
  if (!(T_feed > 0)) throw ConfigError("T_feed must be positive");
  const double ratio = T_meas / T_feed;
  if (!(ratio >= 1.0 - 1e-9) || std::abs(ratio - std::round(ratio)) > 1e-6)
    throw ConfigError("T_meas must be a positive multiple of T_feed");
  if (lost_after < 1) throw ConfigError("lost_after must be at least 1");
  if (bin_width <= 0 || half_window < 40 * bin_width)
    throw ConfigError("tracking window must span at least 80 bins");
  if (!(ewma_alpha > 0 && ewma_alpha <= 1)) throw ConfigError("ewma_alpha must lie in (0, 1]");
  if (history_size < 2) throw ConfigError("history_size must be at least 2");
}

namespace {

// Peak spread expected from the skew still changing between updates. The
// last correction over its time span gives a drift rate; the mapping lags
// it by about one span and the next window adds its own length.
double drift_excursion(const SyncState& state, const TrackerConfig& config) {
  if (state.history.size() < 2) return 0.0;
  const TrackPoint& last = state.history.back();
  const TrackPoint& before = state.history[state.history.size() - 2];
  const double span = (last.time - before.time) * 1e-12;
  if (!(span > 0)) return 0.0;
  const double rate = std::abs(last.skew - before.skew) / span;
  return 2.0 * rate * config.T_meas * (config.T_meas + span) * 1e12;
}

}  // namespace

CorrelationHistogram tracking_histogram(const OffsetMapping& mapping, std::span<const MatchedPair> window,
                                        const TrackerConfig& config, Ticks half_window) {
  const Ticks wanted = std::max(half_window, config.half_window);
  const Ticks half = (wanted + config.bin_width - 1) / config.bin_width * config.bin_width;
  const DelayWindow range{-half, half};
  CorrelationHistogram total;
  bool first = true;
  std::vector<Ticks> a, b;
  for (const auto& pair : window) {
    a.clear();
    b.clear();
    for (const auto& t : pair.alice->tags()) a.push_back(t.timestamp);
    for (const auto& t : pair.bob->tags()) b.push_back(mapping.correct(t.timestamp));
    auto h = start_stop_histogram(a, b, config.bin_width, range);
    if (first) {
      total = std::move(h);
      first = false;
    } else {
      accumulate(total, h);
    }
  }
  if (first) {
    total = start_stop_histogram({}, {}, config.bin_width, range);
  }
  return total;
}

SyncState live_track(SyncState state, std::span<const MatchedPair> window, const TrackerConfig& config) {
  if (window.empty()) return state;
  const double lo = static_cast<double>(window.front().bob->start());
  const double hi = static_cast<double>(window.back().bob->end());
  const double mid = 0.5 * (lo + hi);

  const double excursion = drift_excursion(state, config);
  const std::size_t exclusion = default_exclusion(config.bin_width, config.expected_sigma_ps) +
                                static_cast<std::size_t>(std::ceil(excursion / static_cast<double>(config.bin_width)));
  const auto half = static_cast<Ticks>(4 * exclusion) * config.bin_width;
  const CorrelationHistogram h = tracking_histogram(state.mapping, window, config, half);
  double significance = 0.0;
  std::optional<PeakStats> stats;
  try {
    stats = peak_stats(h, exclusion);
    significance = stats->significance;
  } catch (const NoSignalError&) {
  }
  state.last_significance = significance;

  if (!stats || significance < state.lock_significance_threshold) {
    ++state.low_windows;
    if (state.low_windows >= config.lost_after && state.status != SyncStatus::Lost) {
      state.status = SyncStatus::Lost;
      ++state.lost_transitions;
    }
    return state;
  }

  double tau = 0.0;
  try {
    const PeakFit fit = fit_peak(h, FitOptions{config.expected_sigma_ps});
    tau = fit.center_tau;
    state.last_peak = fit;
  } catch (const FitError&) {
    tau = peak_centroid(h, 5.0 * config.expected_sigma_ps + excursion, stats->background_mean);
    state.last_peak.reset();
  }

  const double location = state.mapping.at(mid) + tau;
  double skew = state.mapping.skew;
  const auto lag = static_cast<std::size_t>(std::llround(config.T_meas / config.T_feed));
  if (state.history.size() >= lag) {
    const TrackPoint& earlier = state.history[state.history.size() - lag];
    const double measured = (location - earlier.peak_delay) / (mid - earlier.time);
    skew = config.ewma_alpha * measured + (1.0 - config.ewma_alpha) * skew;
  }
  state.mapping = OffsetMapping{mid, location, skew};
  state.history.push_back({mid, location, skew});
  while (state.history.size() > config.history_size) state.history.pop_front();
  state.status = SyncStatus::Locked;
  state.low_windows = 0;
  ++state.updates;
  return state;
}

SyncTracker::SyncTracker(const TrackerConfig& config, const OffsetMapping& initial, double T_A)
    : config_(config) {
  config_.validate();
  if (!(T_A > 0)) throw ConfigError("T_A must be positive");
  per_window_ = static_cast<std::size_t>(std::max(1L, std::lround(config_.T_feed / T_A)));
  state_.mapping = initial;
  // The tuned mapping is the first location, so the first lock already
  // yields a skew measurement.
  state_.history.push_back({initial.pivot, initial.offset, initial.skew});
  state_.lock_significance_threshold = config_.lock_threshold;
}

bool SyncTracker::push(const DataPackage& alice, const DataPackage& bob) {
  window_.push_back({&alice, &bob});
  if (window_.size() < per_window_) return false;
  state_ = live_track(std::move(state_), window_, config_);
  window_.clear();
  return true;
}

}  // namespace photonsync
