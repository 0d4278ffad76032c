// Serial reference vs OpenMP kernels on a rendered 8-mic scene.
//
//   ./build/bench/bench_pipeline --benchmark_counters_tabular=true
//
// frames/s above 93.75 (48 kHz, hop 512) is faster than real time.

#include <benchmark/benchmark.h>

#include <random>

#include "tdoaloc/pipeline.hpp"
#include "tdoaloc/simulate.hpp"

using namespace tdoaloc;

namespace {

struct Fixture {
  ArrayGeometry geom = ArrayGeometry::build(prism_positions());
  std::vector<Signal> channels;
  std::vector<Frame> frames;

  Fixture() {
    Scene s;
    s.source_position = 3.0 * angles_to_direction(20.0, 0.0);
    s.snr_db = 10.0;
    channels = render(s, geom, 1.0);
    frames = frame_stream(channels, FrameConfig{});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Locator(benchmark::State& state) {
  const auto& f = fixture();
  LocatorConfig cfg;
  cfg.execution = state.range(0) ? Execution::parallel : Execution::serial;
  std::size_t n = 0;
  for (auto _ : state) {
    Locator loc(f.geom, cfg);
    for (const auto& fr : f.frames) benchmark::DoNotOptimize(loc.process(fr));
    n += f.frames.size();
  }
  state.counters["frames/s"] = benchmark::Counter(static_cast<double>(n), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Locator)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_PairCorrelations(benchmark::State& state) {
  const auto& f = fixture();
  const auto& frame = f.frames[f.frames.size() / 2];
  const std::vector<double> w(frame.spectra.front().size(), 1.0);
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(pair_correlations(frame, w, 1e-9, f.geom, exec));
}
BENCHMARK(BM_PairCorrelations)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond)->UseRealTime();

void BM_MakeFrame(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(make_frame(f.channels, 20, FrameConfig{}, state.range(0) != 0));
}
BENCHMARK(BM_MakeFrame)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond)->UseRealTime();

// Why the FFT path exists: full-range plain correlation, direct vs FFT.
void BM_CorrelationTime(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Signal a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = g(rng), b[k] = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(crosscorr_plain_time(a, b, static_cast<int>(n / 2) - 1));
}
BENCHMARK(BM_CorrelationTime)->Arg(256)->Arg(1024)->Arg(2048)->Unit(benchmark::kMicrosecond);

void BM_CorrelationFft(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Signal a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = g(rng), b[k] = g(rng);
  const auto& fft = RealFft::get(n);
  for (auto _ : state) {
    Spectrum sa(fft.bins()), sb(fft.bins());
    fft.forward(a, sa);
    fft.forward(b, sb);
    benchmark::DoNotOptimize(crosscorr_plain_fft(sa, sb, static_cast<int>(n / 2) - 1));
  }
}
BENCHMARK(BM_CorrelationFft)->Arg(256)->Arg(1024)->Arg(2048)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
