#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "photonsync/correlation.hpp"
#include "photonsync/peak_fit.hpp"
#include "photonsync/scenario.hpp"
#include "photonsync/session_generator.hpp"
#include "photonsync/wire.hpp"

using namespace photonsync;

namespace {

// One 100 ms package pair of the low-loss preset.
const Session& package_pair() {
  static const Session s = [] {
    ScenarioConfig c = scenario_preset("low-loss");
    c.duration = c.T_A;
    return generate_session(c);
  }();
  return s;
}

void BM_XcorrCoarse(benchmark::State& state, XcorrMethod method) {
  const auto& s = package_pair();
  const auto a = s.alice.packages[0].timestamps();
  const auto b = s.bob.packages[0].timestamps();
  const Ticks w = state.range(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(binned_xcorr(a, b, w, {-4'200'000, 4'200'000}, method));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size() + b.size()));
}
BENCHMARK_CAPTURE(BM_XcorrCoarse, fft, XcorrMethod::Fft)->Arg(7000)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_XcorrCoarse, direct, XcorrMethod::Direct)->Arg(7000)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_StartStop(benchmark::State& state) {
  const auto& s = package_pair();
  const auto a = s.alice.packages[0].timestamps();
  auto b = s.bob.packages[0].timestamps();
  const Ticks shift = std::llround(s.truth.offset_at_local_ticks(static_cast<double>(b.front())));
  for (auto& t : b) t -= shift;
  for (auto _ : state) benchmark::DoNotOptimize(start_stop_histogram(a, b, 20, {-10'000, 10'000}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size() + b.size()));
}
BENCHMARK(BM_StartStop)->Unit(benchmark::kMicrosecond);

void BM_FitPeak(benchmark::State& state) {
  std::mt19937_64 rng(5);
  CorrelationHistogram h;
  h.bin_width = 20;
  h.delay_lo = -10'000;
  h.counts.assign(1000, 0);
  std::normal_distribution<double> jitter(0.0, 300.0);
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    const auto k = static_cast<std::int64_t>(std::floor((jitter(rng) - h.delay_lo) / 20.0));
    if (k >= 0 && k < 1000) ++h.counts[static_cast<std::size_t>(k)];
  }
  std::poisson_distribution<int> background(0.5);
  for (auto& v : h.counts) v += background(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_peak(h, {300.0}));
}
BENCHMARK(BM_FitPeak)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_GenerateSecond(benchmark::State& state) {
  ScenarioConfig c = scenario_preset("low-loss");
  c.duration = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_session(c));
}
BENCHMARK(BM_GenerateSecond)->Unit(benchmark::kMillisecond);

void BM_WireEncode(benchmark::State& state) {
  const auto& p = package_pair().bob.packages[0];
  std::vector<std::uint8_t> buf;
  for (auto _ : state) {
    buf.clear();
    benchmark::DoNotOptimize(append_frame(buf, p, Party::Bob));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(buf.size()));
}
BENCHMARK(BM_WireEncode)->Unit(benchmark::kMicrosecond);

void BM_WireDecode(benchmark::State& state) {
  const auto bytes = encode_frame(package_pair().bob.packages[0], Party::Bob);
  for (auto _ : state) benchmark::DoNotOptimize(decode_frames(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_WireDecode)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
