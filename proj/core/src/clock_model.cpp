#include "photonsync/clock_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "photonsync/errors.hpp"
#include "photonsync/random.hpp"

namespace photonsync {

void ClockModel::validate(double session_s) const {
  if (!std::isfinite(offset_t0) || !std::isfinite(skew_u) || !std::isfinite(drift_a) ||
      !std::isfinite(rw_sigma) || rw_sigma < 0) {
    throw ClockModelError("clock parameters must be finite and rw_sigma >= 0");
  }
  // Ten-sigma envelope of the Brownian excursion.
  const double worst = std::abs(skew_u) + std::abs(drift_a) * session_s +
                       10.0 * rw_sigma * std::sqrt(std::max(session_s, 0.0));
  if (worst >= 1.0) {
    throw ClockModelError("local time would not be strictly increasing (|skew| + |drift|*T = " +
                          std::to_string(worst) + ")");
  }
}

namespace {
double interp(const std::vector<double>& v, double t0, double dt, double t) {
  const double x = (t - t0) / dt;
  if (x <= 0) return v.front();
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= v.size()) return v.back();
  const double f = x - static_cast<double>(i);
  return v[i] + f * (v[i + 1] - v[i]);
}
}  // namespace

NoisePath::NoisePath(double rw_sigma, double t_begin, double t_end, std::uint64_t seed, double dt)
    : t0_(t_begin), dt_(dt) {
  if (rw_sigma <= 0 || t_end <= t_begin) return;
  const auto n = static_cast<std::size_t>(std::ceil((t_end - t_begin) / dt)) + 2;
  b_.resize(n);
  w_.resize(n);
  Rng rng(seed, 0x6e6f697365ULL);
  const double step = rw_sigma * std::sqrt(dt);
  b_[0] = 0.0;
  w_[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    b_[i] = b_[i - 1] + step * rng.normal();
    w_[i] = w_[i - 1] + 0.5 * (b_[i - 1] + b_[i]) * dt;
  }
  // Anchor the excursion at t = 0 so skew(0) = skew_u and offset(0) = offset_t0.
  if (t_begin < 0) {
    const double b0 = interp(b_, t0_, dt_, 0.0);
    const double w0 = interp(w_, t0_, dt_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ti = t0_ + static_cast<double>(i) * dt_;
      b_[i] -= b0;
      w_[i] -= w0 + b0 * ti;
    }
  }
}


double NoisePath::skew_noise(double t) const { return b_.empty() ? 0.0 : interp(b_, t0_, dt_, t); }

double NoisePath::offset_noise(double t) const {
  return w_.empty() ? 0.0 : interp(w_, t0_, dt_, t);
}

double clock_offset(const ClockModel& c, double t, const NoisePath& noise) {
  return c.offset_t0 + c.skew_u * t + 0.5 * c.drift_a * t * t + noise.offset_noise(t);
}

double local_time(const ClockModel& c, double t, const NoisePath& noise) {
  return t + clock_offset(c, t, noise);
}

double clock_skew(const ClockModel& c, double t, const NoisePath& noise) {
  return c.skew_u + c.drift_a * t + noise.skew_noise(t);
}

double true_time(const ClockModel& c, double local, const NoisePath& noise) {
  double t = local - c.offset_t0;
  for (int i = 0; i < 8; ++i) {
    const double next = local - clock_offset(c, t, noise);
    if (next == t) break;
    t = next;
  }
  return t;
}

const NoisePath& GroundTruth::zero_path() {
  static const NoisePath zero;
  return zero;
}

double GroundTruth::true_offset(double t) const {
  return clock_offset(clock_, t, noise_ ? *noise_ : zero_path());
}

double GroundTruth::true_skew(double t) const {
  return clock_skew(clock_, t, noise_ ? *noise_ : zero_path());
}

double GroundTruth::local_time(double t) const {
  return photonsync::local_time(clock_, t, noise_ ? *noise_ : zero_path());
}

double GroundTruth::true_time_of_local(double local) const {
  return true_time(clock_, local, noise_ ? *noise_ : zero_path());
}

double GroundTruth::offset_at_local_ticks(double local_ticks) const {
  const double t = true_time_of_local(local_ticks * 1e-12);
  return true_offset(t) * 1e12;
}

}  // namespace photonsync
