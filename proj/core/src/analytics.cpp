#include "photonsync/analytics.hpp"

#include <cmath>
#include <numbers>

#include "photonsync/errors.hpp"
#include "photonsync/peak_fit.hpp"

namespace photonsync {

JitterBudget make_budget(double sigma_det, double sigma_sync, double sigma_coh, double sigma_tt) {
  JitterBudget b{sigma_coh, sigma_tt, sigma_det, sigma_sync, 0.0};
  b.sigma_total = std::sqrt(sigma_coh * sigma_coh + sigma_tt * sigma_tt + sigma_det * sigma_det +
                            sigma_sync * sigma_sync);
  return b;
}

double sync_jitter(double du, double T_A) {
  if (!(T_A > 0)) throw DomainError("T_A must be positive");
  return 0.5 * std::abs(du) * T_A;
}

double total_jitter(double sigma_det, double sigma_sync) {
  if (sigma_det < 0 || sigma_sync < 0) throw DomainError("jitter components must be non-negative");
  return std::hypot(sigma_det, sigma_sync);
}

double peak_height_ratio(double sigma_det, double sigma_sync) {
  if (!(sigma_det > 0)) throw DomainError("sigma_det must be positive");
  const double r = sigma_sync / sigma_det;
  return 1.0 / std::sqrt(1.0 + r * r);
}

double car(double T, double r_A, double r_B, double r_C, double r_dark, double sigma) {
  if (!(T > 0 && T <= 1)) throw DomainError("transmission must lie in (0, 1]");
  if (r_A < 0 || r_B < 0 || r_C < 0 || r_dark < 0) throw DomainError("rates must be non-negative");
  if (!(sigma > 0)) throw DomainError("sigma must be positive");
  const double denom = 2.0 * r_A * r_B * T * sigma + r_dark;
  if (denom == 0.0) throw DomainError("CAR undefined without accidentals");
  return r_C * T / denom;
}

double max_skew(double r_C, double r_A, double r_B, double S_th) {
  if (!(r_C > 0 && r_A > 0 && r_B > 0 && S_th > 0)) throw DomainError("inputs must be positive");
  return r_C / (r_A * r_B * S_th);
}

LiveLimits live_limits(double sigma, double r_C, double T_A, double T_meas, double T_feed,
                       double drift) {
  if (!(r_C * T_A > 1)) throw DomainError("need more than one coincidence per package");
  if (!(T_meas > 0 && T_feed > 0 && sigma > 0)) throw DomainError("times and sigma must be positive");
  LiveLimits l;
  l.delta_tau = sigma / std::sqrt(r_C * T_A - 1.0);
  l.du_meas = std::numbers::sqrt2 * l.delta_tau / T_meas;
  l.sigma_meas = 0.5 * l.du_meas * T_A;
  l.du_drift = std::abs(drift) * T_feed;
  l.sigma_drift = 0.5 * l.du_drift * T_A;
  l.sigma_sync = std::hypot(l.sigma_meas, l.sigma_drift);
  return l;
}

double gaussian_pdf(double t, double sigma) {
  if (!(sigma > 0)) throw DomainError("sigma must be positive");
  const double z = t / sigma;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

double peak_location_uncertainty(double sigma, double n_events) {
  if (!(n_events > 1)) throw DomainError("need at least two events");
  return sigma / std::sqrt(n_events - 1.0);
}

double expected_significance(double r_A, double r_B, double r_C, double T_A, double sigma,
                             double du, double bin_width) {
  if (!(r_A > 0 && r_B > 0 && T_A > 0 && sigma > 0 && bin_width > 0))
    throw DomainError("rates, times and widths must be positive");
  const double plateau = std::abs(du) * T_A;
  // Histogram bins count floor(b/w) - floor(a/w), so a delay reaches a bin
  // through a triangle of half width w rather than a box of width w. The
  // triangle is the box smeared by a uniform offset over one bin.
  constexpr int kSteps = 64;
  double mass = 0.0;
  for (int i = 0; i < kSteps; ++i) {
    const double shift = ((i + 0.5) / kSteps - 0.5) * bin_width;
    mass += flat_top_bin_mass(shift - 0.5 * bin_width, shift + 0.5 * bin_width, 0.0, sigma, plateau);
  }
  mass /= kSteps;
  const double background = r_A * r_B * T_A * bin_width;
  return r_C * T_A * mass / std::sqrt(background);
}

}  // namespace photonsync
