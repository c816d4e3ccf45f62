#include "photonsync/peak_fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double Phi(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }
double phi(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }
// Antiderivative of Phi.
double G(double u) { return u * Phi(u) + phi(u); }

using Params = Eigen::Matrix<double, 5, 1>;  // center, log sigma, plateau, amplitude, background
enum { kCenter, kLogSigma, kPlateau, kAmp, kBg };

struct Region {
  std::vector<double> lo;  // bin lower edges, relative to ref
  std::vector<double> y;
  double width = 1.0;
};

struct Evaluation {
  std::vector<double> shape;
  std::vector<double> mu;
  double ll = 0.0;
};

constexpr double kMuFloor = 1e-9;

Evaluation evaluate(const Region& r, const Params& x) {
  Evaluation e;
  const std::size_t n = r.y.size();
  e.shape.resize(n);
  e.mu.resize(n);
  const double sigma = std::exp(x[kLogSigma]);
  for (std::size_t k = 0; k < n; ++k) {
    e.shape[k] = flat_top_bin_mass(r.lo[k], r.lo[k] + r.width, x[kCenter], sigma, x[kPlateau]);
    e.mu[k] = std::max(kMuFloor, x[kAmp] * e.shape[k] + x[kBg]);
    e.ll += r.y[k] * std::log(e.mu[k]) - e.mu[k];
  }
  return e;
}

void project(Params& x, double log_sigma_min, double log_sigma_max, bool plateau) {
  x[kLogSigma] = std::clamp(x[kLogSigma], log_sigma_min, log_sigma_max);
  x[kPlateau] = plateau ? std::max(0.0, x[kPlateau]) : 0.0;
  x[kAmp] = std::max(1e-9, x[kAmp]);
  x[kBg] = std::max(0.0, x[kBg]);
}

struct Outcome {
  Params x;
  double ll = -INFINITY;
  int iterations = 0;
  bool converged = false;
};

Outcome optimise(const Region& r, Params x, const FitOptions& opt) {
  const double log_sigma_min = std::log(r.width / 50.0);
  const double log_sigma_max = std::log(r.width * static_cast<double>(r.y.size()));
  project(x, log_sigma_min, log_sigma_max, opt.allow_plateau);
  const std::size_t n = r.y.size();
  Evaluation cur = evaluate(r, x);
  double lambda = 1e-3;
  Outcome out;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    // Jacobian: analytic in amplitude and background, central differences
    // in the shape parameters (one-sided at the plateau bound).
    Eigen::MatrixXd J(n, 5);
    const double sigma = std::exp(x[kLogSigma]);
    const std::array<double, 3> steps{1e-4 * sigma, 1e-4, 1e-3 * sigma};
    for (int p = 0; p < 3; ++p) {
      Params up = x, dn = x;
      up[p] += steps[p];
      dn[p] -= steps[p];
      double span = 2 * steps[p];
      if (p == kPlateau && dn[p] < 0) {
        dn[p] = x[p];
        span = steps[p];
      }
      const double su = std::exp(up[kLogSigma]), sd = std::exp(dn[kLogSigma]);
      for (std::size_t k = 0; k < n; ++k) {
        const double a = flat_top_bin_mass(r.lo[k], r.lo[k] + r.width, up[kCenter], su, up[kPlateau]);
        const double b = flat_top_bin_mass(r.lo[k], r.lo[k] + r.width, dn[kCenter], sd, dn[kPlateau]);
        J(static_cast<Eigen::Index>(k), p) = x[kAmp] * (a - b) / span;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      J(static_cast<Eigen::Index>(k), kAmp) = cur.shape[k];
      J(static_cast<Eigen::Index>(k), kBg) = 1.0;
    }
    Eigen::VectorXd w(n), resid(n);
    for (std::size_t k = 0; k < n; ++k) {
      w[static_cast<Eigen::Index>(k)] = 1.0 / cur.mu[k];
      resid[static_cast<Eigen::Index>(k)] = r.y[k] - cur.mu[k];
    }
    const Eigen::Matrix<double, 5, 5> fisher = J.transpose() * w.asDiagonal() * J;
    const Params grad = J.transpose() * (w.array() * resid.array()).matrix();

    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::Matrix<double, 5, 5> A = fisher;
      for (int d = 0; d < 5; ++d) A(d, d) += lambda * std::max(fisher(d, d), 1e-12);
      const Params step = A.ldlt().solve(grad);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      Params trial = x + step;
      project(trial, log_sigma_min, log_sigma_max, opt.allow_plateau);
      Evaluation next = evaluate(r, trial);
      if (std::isfinite(next.ll) && next.ll >= cur.ll) {
        const double gain = next.ll - cur.ll;
        const double moved = std::abs(trial[kCenter] - x[kCenter]);
        x = trial;
        cur = std::move(next);
        lambda = std::max(lambda / 3.0, 1e-9);
        accepted = true;
        if (gain < 1e-9 * (1.0 + std::abs(cur.ll)) && moved < 1e-6 * sigma + 1e-9) {
          out.converged = true;
        }
        break;
      }
      lambda *= 4.0;
    }
    // No improving step at any damping: a (bound-constrained) stationary point.
    if (!accepted) out.converged = true;
    if (out.converged) break;
  }
  out.x = x;
  out.ll = cur.ll;
  return out;
}

}  // namespace

double flat_top_bin_mass(double x1, double x2, double center, double sigma_edge, double plateau) {
  const double u1 = (x1 - center) / sigma_edge;
  const double u2 = (x2 - center) / sigma_edge;
  if (plateau < 1e-3 * sigma_edge) return Phi(u2) - Phi(u1);
  const double h = 0.5 * plateau / sigma_edge;
  const double v = G(u2 + h) - G(u1 + h) - G(u2 - h) + G(u1 - h);
  return v * sigma_edge / plateau;
}

PeakFit fit_peak(const CorrelationHistogram& h, const FitOptions& options) {
  const auto& c = h.counts;
  const auto max_it = std::max_element(c.begin(), c.end());
  if (max_it == c.end() || *max_it == 0) throw NoSignalError("histogram has no counts");
  const std::size_t raw_peak = static_cast<std::size_t>(max_it - c.begin());
  const double w = static_cast<double>(h.bin_width);

  // Background start: median, refined by the mean away from the peak.
  std::vector<std::int64_t> sorted(c.begin(), c.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  double bg0 = static_cast<double>(sorted[sorted.size() / 2]);
  const double height = static_cast<double>(*max_it);

  // Width start from the half-maximum extent of a box-smoothed copy. The box
  // grows until it holds ~100 excess counts, so a broad, shallow plateau
  // is measured as a whole instead of as its tallest noise spike.
  std::vector<double> prefix(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) prefix[k + 1] = prefix[k] + static_cast<double>(c[k]);
  std::vector<double> smooth(c.size());
  std::size_t peak = raw_peak;
  for (std::size_t box = 1;; box = 2 * box + 1) {
    const std::size_t r = box / 2;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const std::size_t a = k > r ? k - r : 0;
      const std::size_t b = std::min(c.size(), k + r + 1);
      smooth[k] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
    }
    peak = static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    if ((smooth[peak] - bg0) * static_cast<double>(box) >= 100.0 || 2 * box + 1 > c.size() / 8) break;
  }
  const double half = bg0 + 0.5 * (smooth[peak] - bg0);
  std::size_t left = peak, right = peak;
  while (left > 0 && smooth[left - 1] > half) --left;
  while (right + 1 < c.size() && smooth[right + 1] > half) ++right;
  const double fwhm = static_cast<double>(right - left + 1) * w;
  double sigma0 = std::max(fwhm / 2.355, w);
  if (options.sigma_hint > 0 && height - bg0 < 25) sigma0 = std::max(sigma0, options.sigma_hint);

  const std::size_t exclusion = static_cast<std::size_t>(std::ceil(3.0 * std::max(fwhm, options.sigma_hint * 2.355) / w));
  {
    const std::size_t lo = peak > exclusion ? peak - exclusion : 0;
    const std::size_t hi = std::min(c.size(), peak + exclusion + 1);
    const std::size_t n_out = c.size() - (hi - lo);
    if (n_out >= kMinBackgroundBins) {
      const double sum = std::accumulate(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(lo), 0.0) +
                         std::accumulate(c.begin() + static_cast<std::ptrdiff_t>(hi), c.end(), 0.0);
      bg0 = sum / static_cast<double>(n_out);
    }
  }

  const double reach = std::max({10.0 * sigma0, 10.0 * options.sigma_hint, 40.0 * w});
  const std::size_t reach_bins = static_cast<std::size_t>(std::ceil(reach / w));
  const std::size_t lo = peak > reach_bins ? peak - reach_bins : 0;
  const std::size_t hi = std::min(c.size(), peak + reach_bins + 1);
  if (hi - lo < 6) throw FitError("fit region has too few bins");

  const double ref = static_cast<double>(h.delay_of(peak));
  Region region;
  region.width = w;
  double excess = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    region.lo.push_back(static_cast<double>(h.delay_of(k)) - ref - 0.5 * w);
    region.y.push_back(static_cast<double>(c[k]));
    excess += static_cast<double>(c[k]) - bg0;
  }
  const double amp0 = std::max(excess, height - bg0);

  std::vector<Params> starts;
  auto start = [&](double sigma, double plateau) {
    Params x;
    x << 0.0, std::log(sigma), plateau, amp0, bg0;
    starts.push_back(x);
  };
  start(sigma0, 0.0);
  if (options.allow_plateau && fwhm >= 4 * w) start(std::max(w, fwhm / (4 * 2.355)), 0.9 * fwhm);
  if (options.sigma_hint > 0 && std::abs(options.sigma_hint - sigma0) > 0.1 * sigma0)
    start(std::max(w, options.sigma_hint), 0.0);

  Outcome best;
  for (const auto& x0 : starts) {
    Outcome o = optimise(region, x0, options);
    if (o.converged && o.x.allFinite() && o.ll > best.ll) best = o;
  }
  if (!best.converged) throw FitError("peak fit did not converge");

  // The mass depends on the plateau only through its square near zero, so
  // every pure Gaussian is a stationary point and a run that touches the
  // bound stays there. Restart from flat tops with the same second moment.
  if (options.allow_plateau && best.x[kPlateau] < 0.5 * std::exp(best.x[kLogSigma])) {
    const double s2 = std::exp(2 * best.x[kLogSigma]) + best.x[kPlateau] * best.x[kPlateau] / 12.0;
    for (double share : {0.5, 0.75, 0.9}) {
      Params x0 = best.x;
      x0[kPlateau] = std::sqrt(12.0 * share * s2);
      x0[kLogSigma] = 0.5 * std::log(std::max((1.0 - share) * s2, w * w / 4));
      Outcome o = optimise(region, x0, options);
      if (o.converged && o.x.allFinite() && o.ll > best.ll) best = o;
    }
  }

  const Params& x = best.x;
  PeakFit fit;
  fit.center_tau = ref + x[kCenter];
  fit.sigma_edge = std::exp(x[kLogSigma]);
  fit.plateau = x[kPlateau];
  fit.sigma = std::sqrt(fit.sigma_edge * fit.sigma_edge + 0.25 * fit.plateau * fit.plateau);
  fit.rms = std::sqrt(fit.sigma_edge * fit.sigma_edge + fit.plateau * fit.plateau / 12.0);
  fit.amplitude = x[kAmp];
  fit.background = x[kBg];
  fit.log_likelihood = best.ll;
  fit.iterations = best.iterations;
  if (std::abs(x[kCenter]) > reach) throw FitError("fitted centre left the fit region");

  const Evaluation e = evaluate(region, x);
  double chi2 = 0.0;
  for (std::size_t k = 0; k < region.y.size(); ++k) {
    const double d = region.y[k] - e.mu[k];
    chi2 += d * d / e.mu[k];
  }
  const double dof = std::max(1.0, static_cast<double>(region.y.size()) - 5.0);
  fit.fit_residual = chi2 / dof;
  return fit;
}

double peak_centroid(const CorrelationHistogram& h, double half_width, double background) {
  const auto max_it = std::max_element(h.counts.begin(), h.counts.end());
  if (max_it == h.counts.end() || *max_it == 0) throw NoSignalError("histogram has no counts");
  const double center = static_cast<double>(h.delay_of(static_cast<std::size_t>(max_it - h.counts.begin())));
  double sum = 0.0, weighted = 0.0;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    const double d = static_cast<double>(h.delay_of(k));
    if (std::abs(d - center) > half_width) continue;
    const double v = std::max(0.0, static_cast<double>(h.counts[k]) - background);
    sum += v;
    weighted += v * d;
  }
  return sum > 0 ? weighted / sum : center;
}

void write_fit_report(std::ostream& out, const PeakFit& fit, std::optional<double> significance) {
  out << "center_ps: " << fit.center_tau << '\n'
      << "sigma_ps: " << fit.sigma << '\n'
      << "sigma_edge_ps: " << fit.sigma_edge << '\n'
      << "plateau_ps: " << fit.plateau << '\n'
      << "rms_ps: " << fit.rms << '\n'
      << "amplitude: " << fit.amplitude << '\n'
      << "background_per_bin: " << fit.background << '\n'
      << "fit_residual: " << fit.fit_residual << '\n';
  if (significance) out << "significance: " << *significance << '\n';
}

}  // namespace photonsync
