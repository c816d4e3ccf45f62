#pragma once

// Closed-form timing budget. Everything here is in SI units (seconds,
// counts per second, s/s).

namespace photonsync {

struct JitterBudget {
  double sigma_coh = 0.0;
  double sigma_tt = 0.0;
  double sigma_det = 0.0;
  double sigma_sync = 0.0;
  double sigma_total = 0.0;
};

JitterBudget make_budget(double sigma_det, double sigma_sync, double sigma_coh = 0.0,
                         double sigma_tt = 0.0);

struct LiveLimits {
  double delta_tau = 0.0;    // peak location uncertainty per package
  double du_meas = 0.0;      // skew uncertainty from two locations T_meas apart
  double sigma_meas = 0.0;
  double du_drift = 0.0;     // skew change accrued over one feedback period
  double sigma_drift = 0.0;
  double sigma_sync = 0.0;
};

/// Jitter from an uncorrected skew over one package: du*T_A/2.
double sync_jitter(double du, double T_A);

/// sqrt(sigma_det^2 + sigma_sync^2).
double total_jitter(double sigma_det, double sigma_sync);

/// Relative correlation peak height 1/sqrt(1 + (sigma_sync/sigma_det)^2).
double peak_height_ratio(double sigma_det, double sigma_sync);

/// r_C T / (2 r_A r_B T sigma + r_dark). Throws DomainError on a zero
/// denominator or an out-of-range transmission.
double car(double T, double r_A, double r_B, double r_C, double r_dark, double sigma);

/// Largest skew still leaving significance S_th: r_C / (r_A r_B S_th).
double max_skew(double r_C, double r_A, double r_B, double S_th);

/// Tracking limits. Throws DomainError if r_C*T_A <= 1.
LiveLimits live_limits(double sigma, double r_C, double T_A, double T_meas, double T_feed,
                       double drift);

double gaussian_pdf(double t, double sigma);

/// Peak location uncertainty sigma/sqrt(N - 1). Throws DomainError for N <= 1.
double peak_location_uncertainty(double sigma, double n_events);

/// Significance expected from one package of length T_A when a residual
/// skew du smears a Gaussian peak of RMS sigma into a flat top of width
/// du*T_A, histogrammed with bins of width bin_width against a Poisson
/// accidental floor r_A*r_B*T_A*bin_width per bin. Assumes the peak is
/// centred on a bin and uses the triangular bin response of the histograms.
/// Excludes the upward bias of taking the maximum over noisy bins.
double expected_significance(double r_A, double r_B, double r_C, double T_A, double sigma,
                             double du, double bin_width);

}  // namespace photonsync
