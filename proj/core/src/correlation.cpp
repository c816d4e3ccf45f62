#include "photonsync/correlation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

Ticks floor_div(Ticks x, Ticks w) {
  Ticks q = x / w;
  if ((x % w != 0) && ((x < 0) != (w < 0))) --q;
  return q;
}

struct Binning {
  Ticks width;
  Ticks lo_bin;
  std::size_t bins;
};

Binning make_binning(Ticks bin_width, DelayWindow window) {
  if (bin_width <= 0) throw DomainError("bin width must be positive");
  if (window.hi <= window.lo) throw DomainError("delay window is empty");
  if (window.lo % bin_width != 0) throw DomainError("delay window start must lie on the bin grid");
  const Ticks span = window.hi - window.lo;
  const Ticks bins = span / bin_width + (span % bin_width != 0 ? 1 : 0);
  if (static_cast<std::uint64_t>(bins) > kMaxCorrelationBins)
    throw BinBudgetError("histogram needs " + std::to_string(bins) + " bins, limit is " +
                         std::to_string(kMaxCorrelationBins));
  return {bin_width, window.lo / bin_width, static_cast<std::size_t>(bins)};
}

std::vector<Ticks> quantise(std::span<const Ticks> tags, Ticks w) {
  std::vector<Ticks> q(tags.size());
  std::transform(tags.begin(), tags.end(), q.begin(), [w](Ticks t) { return floor_div(t, w); });
  return q;
}

CorrelationHistogram empty_histogram(const Binning& bin, std::size_t na, std::size_t nb) {
  CorrelationHistogram h;
  h.bin_width = bin.width;
  h.delay_lo = bin.lo_bin * bin.width;
  h.counts.assign(bin.bins, 0);
  h.n_a = na;
  h.n_b = nb;
  return h;
}

void sweep(std::span<const Ticks> qa, std::span<const Ticks> qb, const Binning& bin,
           std::vector<std::int64_t>& counts) {
  const Ticks k_hi = bin.lo_bin + static_cast<Ticks>(bin.bins);
  std::size_t first = 0;
  for (Ticks x : qa) {
    while (first < qb.size() && qb[first] - x < bin.lo_bin) ++first;
    for (std::size_t j = first; j < qb.size() && qb[j] - x < k_hi; ++j)
      ++counts[static_cast<std::size_t>(qb[j] - x - bin.lo_bin)];
  }
}

// FFTW's planner is not re-entrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (plan_ == nullptr) throw Error("FFTW plan creation failed");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_;
};

std::size_t fft_size(std::size_t bins) {
  std::size_t f = 1024;
  while (f < 2 * bins) f *= 2;
  return f;
}

void fft_correlate(std::span<const Ticks> qa, std::span<const Ticks> qb, const Binning& bin,
                   std::vector<std::int64_t>& counts) {
  const std::size_t K = bin.bins;
  const std::size_t F = fft_size(K);
  const std::size_t L = F - K + 1;
  const std::size_t C = F / 2 + 1;

  auto ra = fftw_buffer<double>(F);
  auto rb = fftw_buffer<double>(F);
  auto fa = fftw_buffer<fftw_complex>(C);
  auto fb = fftw_buffer<fftw_complex>(C);

  std::unique_ptr<Plan> forward, inverse;
  {
    std::lock_guard lock(planner_mutex());
    forward = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(static_cast<int>(F), ra.get(), fa.get(), FFTW_ESTIMATE));
    inverse = std::make_unique<Plan>(fftw_plan_dft_c2r_1d(static_cast<int>(F), fa.get(), ra.get(), FFTW_ESTIMATE));
  }

  std::size_t ia = 0;
  while (ia < qa.size()) {
    const Ticks s = qa[ia];
    const Ticks a_end = s + static_cast<Ticks>(L);
    const std::size_t ia_end = static_cast<std::size_t>(
        std::lower_bound(qa.begin() + static_cast<std::ptrdiff_t>(ia), qa.end(), a_end) - qa.begin());
    const Ticks b_lo = s + bin.lo_bin;
    const Ticks b_hi = b_lo + static_cast<Ticks>(F);
    const auto jb = std::lower_bound(qb.begin(), qb.end(), b_lo);
    const auto jb_end = std::lower_bound(jb, qb.end(), b_hi);
    if (jb != jb_end) {
      std::fill_n(ra.get(), F, 0.0);
      std::fill_n(rb.get(), F, 0.0);
      for (std::size_t i = ia; i < ia_end; ++i) ra[static_cast<std::size_t>(qa[i] - s)] += 1.0;
      for (auto j = jb; j != jb_end; ++j) rb[static_cast<std::size_t>(*j - b_lo)] += 1.0;
      fftw_execute_dft_r2c(forward->get(), ra.get(), fa.get());
      fftw_execute_dft_r2c(forward->get(), rb.get(), fb.get());
      // conj(A) * B correlates: out[k] = sum_i A[i] B[i + k].
      for (std::size_t c = 0; c < C; ++c) {
        const double re = fa[c][0] * fb[c][0] + fa[c][1] * fb[c][1];
        const double im = fa[c][0] * fb[c][1] - fa[c][1] * fb[c][0];
        fa[c][0] = re;
        fa[c][1] = im;
      }
      fftw_execute_dft_c2r(inverse->get(), fa.get(), ra.get());
      const double scale = 1.0 / static_cast<double>(F);
      for (std::size_t k = 0; k < K; ++k) counts[k] += std::llround(ra[k] * scale);
    }
    ia = ia_end;
  }
}

bool prefer_direct(std::span<const Ticks> a, std::span<const Ticks> b, const Binning& bin) {
  if (a.empty() || b.empty()) return true;
  const double first = static_cast<double>(std::min(a.front(), b.front()));
  const double last = static_cast<double>(std::max(a.back(), b.back()));
  const double extent = std::max(last - first, 1.0);
  const double window = static_cast<double>(bin.bins) * static_cast<double>(bin.width);
  const double pairs = static_cast<double>(a.size()) * static_cast<double>(b.size()) *
                       std::min(1.0, window / extent);
  const double direct = static_cast<double>(a.size() + b.size()) + pairs;

  const double F = static_cast<double>(fft_size(bin.bins));
  const double L = F - static_cast<double>(bin.bins) + 1.0;
  const double blocks = std::min(static_cast<double>(a.size()), extent / static_cast<double>(bin.width) / L + 1.0);
  const double fft = blocks * 3.0 * F * std::log2(F);
  return direct <= fft;
}

}  // namespace

std::int64_t CorrelationHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::vector<Ticks> skew_correct(std::span<const Ticks> tags, double du, Ticks t0) {
  std::vector<Ticks> out(tags.size());
  if (du == 0.0) {
    std::copy(tags.begin(), tags.end(), out.begin());
    return out;
  }
  std::transform(tags.begin(), tags.end(), out.begin(), [du, t0](Ticks b) {
    return b - std::llround(du * static_cast<double>(b - t0));
  });
  return out;
}

std::vector<TimeTag> skew_correct(std::span<const TimeTag> tags, double du, Ticks t0) {
  std::vector<TimeTag> out(tags.begin(), tags.end());
  if (du == 0.0) return out;
  for (auto& tag : out) tag.timestamp -= std::llround(du * static_cast<double>(tag.timestamp - t0));
  return out;
}

CorrelationHistogram binned_xcorr(std::span<const Ticks> a, std::span<const Ticks> b,
                                  Ticks bin_width, DelayWindow window, XcorrMethod method) {
  const Binning bin = make_binning(bin_width, window);
  CorrelationHistogram h = empty_histogram(bin, a.size(), b.size());
  if (a.empty() || b.empty()) return h;
  if (method == XcorrMethod::Auto)
    method = prefer_direct(a, b, bin) ? XcorrMethod::Direct : XcorrMethod::Fft;
  const auto qa = quantise(a, bin.width);
  const auto qb = quantise(b, bin.width);
  if (method == XcorrMethod::Direct)
    sweep(qa, qb, bin, h.counts);
  else
    fft_correlate(qa, qb, bin, h.counts);
  return h;
}

CorrelationHistogram start_stop_histogram(std::span<const Ticks> a, std::span<const Ticks> b,
                                          Ticks bin_width, DelayWindow window) {
  const Binning bin = make_binning(bin_width, window);
  CorrelationHistogram h = empty_histogram(bin, a.size(), b.size());
  if (a.empty() || b.empty()) return h;
  sweep(quantise(a, bin.width), quantise(b, bin.width), bin, h.counts);
  return h;
}

void accumulate(CorrelationHistogram& into, const CorrelationHistogram& other) {
  if (into.bin_width != other.bin_width || into.delay_lo != other.delay_lo ||
      into.bins() != other.bins())
    throw DomainError("histogram binning mismatch");
  for (std::size_t k = 0; k < into.bins(); ++k) into.counts[k] += other.counts[k];
  into.n_a += other.n_a;
  into.n_b += other.n_b;
}

std::size_t default_exclusion(Ticks bin_width, double expected_sigma_ps) {
  return static_cast<std::size_t>(std::ceil(5.0 * expected_sigma_ps / static_cast<double>(bin_width)));
}

PeakStats peak_stats(const CorrelationHistogram& h, std::size_t exclusion_halfwidth) {
  const auto& c = h.counts;
  const auto max_it = std::max_element(c.begin(), c.end());  // first maximum
  if (max_it == c.end() || *max_it == 0) throw NoSignalError("histogram has no counts");
  const std::size_t peak = static_cast<std::size_t>(max_it - c.begin());

  const std::size_t lo = peak > exclusion_halfwidth ? peak - exclusion_halfwidth : 0;
  const std::size_t hi = std::min(c.size(), peak + exclusion_halfwidth + 1);
  const std::size_t n_bg = c.size() - (hi - lo);
  if (n_bg < kMinBackgroundBins)
    throw DomainError("only " + std::to_string(n_bg) + " background bins outside the peak");

  double sum = 0.0, sum2 = 0.0;
  auto add = [&](std::size_t k) {
    const double v = static_cast<double>(c[k]);
    sum += v;
    sum2 += v * v;
  };
  for (std::size_t k = 0; k < lo; ++k) add(k);
  for (std::size_t k = hi; k < c.size(); ++k) add(k);
  const double n = static_cast<double>(n_bg);
  const double mean = sum / n;
  double sd = std::sqrt(std::max(0.0, sum2 / n - mean * mean));
  if (sd == 0.0) sd = std::sqrt(1.0 / n);

  PeakStats s;
  s.peak_index = peak;
  s.peak_delay = static_cast<double>(h.delay_of(peak));
  s.peak_height = static_cast<double>(*max_it);
  s.background_mean = mean;
  s.background_std = sd;
  s.significance = (s.peak_height - mean) / sd;
  s.background_bins = n_bg;
  return s;
}

std::int64_t counts_within(const CorrelationHistogram& h, double center, double half_width) {
  std::int64_t total = 0;
  for (std::size_t k = 0; k < h.bins(); ++k)
    if (std::abs(static_cast<double>(h.delay_of(k)) - center) <= half_width) total += h.counts[k];
  return total;
}

double measured_car(const CorrelationHistogram& h, double center, double half_width,
                    double background_mean) {
  std::size_t bins = 0;
  std::int64_t total = 0;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    if (std::abs(static_cast<double>(h.delay_of(k)) - center) <= half_width) {
      ++bins;
      total += h.counts[k];
    }
  }
  const double accidentals = background_mean * static_cast<double>(bins);
  if (accidentals <= 0.0) throw DomainError("no accidental background to normalise CAR");
  return (static_cast<double>(total) - accidentals) / accidentals;
}

void write_histogram_csv(std::ostream& out, const CorrelationHistogram& h) {
  out << "delay_ps,count\n";
  for (std::size_t k = 0; k < h.bins(); ++k) out << h.delay_of(k) << ',' << h.counts[k] << '\n';
}

}  // namespace photonsync
