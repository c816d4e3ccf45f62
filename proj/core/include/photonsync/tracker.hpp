#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "photonsync/acquisition.hpp"
#include "photonsync/correlation.hpp"
#include "photonsync/peak_fit.hpp"
#include "photonsync/timetag.hpp"

namespace photonsync {

enum class SyncStatus { Acquiring, Locked, Lost };

std::string_view to_string(SyncStatus s);

/// Estimated Bob-minus-Alice offset as a linear function of Bob local
/// time around a pivot: offset + skew * (b - pivot). Offsets in ps.
struct OffsetMapping {
  double pivot = 0.0;
  double offset = 0.0;
  double skew = 0.0;

  double at(double bob_local) const { return offset + skew * (bob_local - pivot); }
  /// Bob timestamp expressed on Alice's time axis.
  Ticks correct(Ticks b) const { return b - std::llround(at(static_cast<double>(b))); }
};

struct TrackerConfig {
  double T_feed = 0.6;  // s
  double T_meas = 0.6;  // s, must be a multiple of T_feed
  double lock_threshold = 10.0;
  int lost_after = 3;
  Ticks bin_width = 20;
  Ticks half_window = 10'000;
  double expected_sigma_ps = 300.0;
  /// Weight of each new skew measurement; 1 uses the two latest locations only.
  double ewma_alpha = 1.0;
  std::size_t history_size = 64;

  void validate() const;
};

struct TrackPoint {
  double time = 0.0;        // window midpoint, Bob local ps
  double peak_delay = 0.0;  // offset at that time, ps
  double skew = 0.0;
};

struct SyncState {
  SyncStatus status = SyncStatus::Acquiring;
  OffsetMapping mapping;
  double offset_est() const { return mapping.offset; }
  double skew_est() const { return mapping.skew; }
  Ticks t_ref() const { return static_cast<Ticks>(std::llround(mapping.pivot)); }
  std::optional<PeakFit> last_peak;
  double last_significance = 0.0;
  std::deque<TrackPoint> history;
  double lock_significance_threshold = 10.0;
  int low_windows = 0;
  std::size_t lost_transitions = 0;
  std::size_t updates = 0;
};

/// One feedback step: Start-Stop histogram of the window's packages under
/// the current mapping, fit, and update of offset and skew. Pure.
SyncState live_track(SyncState state, std::span<const MatchedPair> window, const TrackerConfig& config);

/// Histogram live_track builds for a window; spans at least
/// config.half_window either side of zero.
CorrelationHistogram tracking_histogram(const OffsetMapping& mapping, std::span<const MatchedPair> window,
                                        const TrackerConfig& config, Ticks half_window = 0);

/// Package-at-a-time wrapper: collects T_feed worth of packages and runs
/// live_track at each window end.
class SyncTracker {
 public:
  SyncTracker(const TrackerConfig& config, const OffsetMapping& initial, double T_A);

  /// Mapping that applies to data pushed next.
  const OffsetMapping& mapping() const { return state_.mapping; }
  const SyncState& state() const { return state_; }
  std::size_t packages_per_window() const { return per_window_; }

  /// The package must outlive the window it belongs to. Returns true if
  /// this push closed a window and updated the state.
  bool push(const DataPackage& alice, const DataPackage& bob);

 private:
  TrackerConfig config_;
  SyncState state_;
  std::size_t per_window_ = 1;
  std::vector<MatchedPair> window_;
};

}  // namespace photonsync
