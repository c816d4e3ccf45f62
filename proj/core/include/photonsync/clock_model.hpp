#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace photonsync {

/// Bob's local clock relative to true (Alice) time:
///
///   local(t) = t + offset_t0 + skew_u*t + drift_a*t^2/2 + W(t)
///
/// where W is the time integral of a Brownian skew excursion B with
/// intensity rw_sigma (s/s per sqrt(s)). All quantities in SI seconds.
struct ClockModel {
  double offset_t0 = 0.0;
  double skew_u = 0.0;
  double drift_a = 0.0;
  double rw_sigma = 0.0;

  /// Throws ClockModelError if local time could stop increasing within
  /// [0, session_s].
  void validate(double session_s) const;
};

/// A sampled realisation of the Brownian skew excursion B(t) and its
/// integral W(t). Linear interpolation between grid points.
class NoisePath {
 public:
  NoisePath() = default;
  NoisePath(double rw_sigma, double t_begin, double t_end, std::uint64_t seed, double dt = 1e-3);

  bool is_zero() const { return b_.empty(); }
  double skew_noise(double t) const;
  double offset_noise(double t) const;

 private:
  double t0_ = 0.0;
  double dt_ = 1.0;
  std::vector<double> b_;
  std::vector<double> w_;
};

/// local(t) - t, computed without forming t + small to keep precision.
double clock_offset(const ClockModel& clock, double t, const NoisePath& noise);

double local_time(const ClockModel& clock, double t, const NoisePath& noise = {});

/// d(local)/dt - 1.
double clock_skew(const ClockModel& clock, double t, const NoisePath& noise = {});

/// Inverse of local_time by fixed-point iteration.
double true_time(const ClockModel& clock, double local, const NoisePath& noise = {});

/// Oracle view of a generated session.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(ClockModel clock, std::shared_ptr<const NoisePath> noise)
      : clock_(clock), noise_(std::move(noise)) {}

  const ClockModel& clock() const { return clock_; }

  /// Bob-minus-Alice clock offset at true time t (seconds).
  double true_offset(double t) const;
  double true_skew(double t) const;
  double local_time(double t) const;
  double true_time_of_local(double local) const;

  /// Offset expressed against Bob's local time axis, in ticks: the delay
  /// b - a a perfectly synchronised coincidence shows when Bob reads `local`.
  double offset_at_local_ticks(double local_ticks) const;

  struct Pair {
    std::int64_t alice = 0;  // ticks, Alice's timestamp
    std::int64_t bob = 0;    // ticks, Bob's local timestamp
    std::int64_t bob_true = 0;  // ticks, Bob's detection in true time
  };
  std::vector<Pair> pair_times;

 private:
  static const NoisePath& zero_path();

  ClockModel clock_;
  std::shared_ptr<const NoisePath> noise_;
};

}  // namespace photonsync
