#pragma once

#include <iosfwd>
#include <optional>

#include "photonsync/correlation.hpp"

namespace photonsync {

/// Flat-top Gaussian peak: a box of width `plateau` convolved with a
/// Gaussian of RMS `sigma_edge`, on a constant background. Delays in ps.
struct PeakFit {
  double center_tau = 0.0;
  /// Width that combines in quadrature with the edge jitter:
  /// sqrt(sigma_edge^2 + (plateau/2)^2).
  double sigma = 0.0;
  double sigma_edge = 0.0;
  double plateau = 0.0;
  /// Second moment of the fitted shape, sqrt(sigma_edge^2 + plateau^2/12).
  double rms = 0.0;
  double amplitude = 0.0;   // total peak counts
  double background = 0.0;  // counts per bin
  double fit_residual = 0.0;  // Pearson chi^2 per degree of freedom
  double log_likelihood = 0.0;
  int iterations = 0;
};

struct FitOptions {
  /// Expected peak RMS in ps, used to size the fit region and as an extra
  /// starting point for sparse histograms. 0 = unknown.
  double sigma_hint = 0.0;
  bool allow_plateau = true;
  int max_iterations = 200;
};

/// Expected counts of the model in a bin [x1, x2) per unit amplitude.
double flat_top_bin_mass(double x1, double x2, double center, double sigma_edge, double plateau);

/// Poisson maximum-likelihood fit. Throws NoSignalError on an empty
/// histogram and FitError if no start converges.
PeakFit fit_peak(const CorrelationHistogram& h, const FitOptions& options = {});

/// Count-weighted mean delay of the bins within half_width of the highest
/// bin, background subtracted. Used when fitting fails.
double peak_centroid(const CorrelationHistogram& h, double half_width, double background);

/// Key-value text report.
void write_fit_report(std::ostream& out, const PeakFit& fit, std::optional<double> significance = {});

}  // namespace photonsync
