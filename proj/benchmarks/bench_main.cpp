#include <random>

#include <benchmark/benchmark.h>

#include <bisim/channel.hpp>
#include <bisim/echo.hpp>
#include <bisim/fusion.hpp>
#include <bisim/parallel.hpp>
#include <bisim/scattering.hpp>

using namespace bisim;

namespace {

std::vector<PathParameterSet> random_paths(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> delay(0, 2e-6), doppler(-2000, 2000), u(0, 1);
  std::vector<PathParameterSet> paths(n);
  for (auto& p : paths) {
    p.delay = delay(rng);
    p.doppler = doppler(rng);
    p.gain = std::polar(u(rng), kTwoPi * u(rng));
  }
  return paths;
}

SlowTimeCube cube(std::size_t k, std::size_t m) {
  return synth_cfr(random_paths(8), WaveformConfig::from_numerology(3.7e9, 160e6, k, m), SynthMode::kFixed);
}

}  // namespace

static void BM_SynthFixed(benchmark::State& state) {
  set_worker_count(1);
  const auto w = WaveformConfig::from_numerology(3.7e9, 160e6, static_cast<std::size_t>(state.range(0)), 256);
  const auto paths = random_paths(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(synth_cfr(paths, w, SynthMode::kFixed));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 256 * state.range(1));
}
BENCHMARK(BM_SynthFixed)->Args({256, 8})->Args({1280, 8})->Args({1280, 64})->Unit(benchmark::kMillisecond);

static void BM_DelayDopplerMap(benchmark::State& state) {
  set_worker_count(1);
  const auto c = cube(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(delay_doppler_map(c));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_DelayDopplerMap)->Args({256, 256})->Args({1280, 2048})->Unit(benchmark::kMillisecond);

static void BM_Stft(benchmark::State& state) {
  set_worker_count(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  ComplexVector x(n);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (auto& v : x) v = {g(rng), g(rng)};
  const StftOptions opt{2048, 32, Window::kGaussian};
  for (auto _ : state) benchmark::DoNotOptimize(stft_spectrogram(x, 8e-6, opt));
}
BENCHMARK(BM_Stft)->Arg(8192)->Arg(32768)->Unit(benchmark::kMillisecond);

static void BM_Localize(benchmark::State& state) {
  NodeTable nodes{{"t0", {{0, 0, 0}, {0, 0, 0}, "t0"}},
                  {"r0", {{120, 0, 0}, {0, 0, 0}, "r0"}},
                  {"r1", {{0, 150, 0}, {0, 0, 0}, "r1"}},
                  {"r2", {{-90, -60, 0}, {0, 0, 0}, "r2"}}};
  const Vec3 p(40, 55, 0), v(3, -7, 0);
  const double lambda = kSpeedOfLight / 3.7e9;
  std::vector<BistaticObservation> obs;
  for (const char* rx : {"r0", "r1", "r2"}) {
    const Vec3 a = nodes.at("t0").position, b = nodes.at(rx).position;
    BistaticObservation o;
    o.tx_id = "t0";
    o.rx_id = rx;
    o.excess_delay = ((p - a).norm() + (p - b).norm() - (a - b).norm()) / kSpeedOfLight;
    o.doppler = -((p - a).normalized() + (p - b).normalized()).dot(v) / lambda;
    o.wavelength = lambda;
    obs.push_back(o);
  }
  LocalizeOptions opt;
  opt.grid_cell = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fuse(obs, nodes, opt));
}
BENCHMARK(BM_Localize)->Arg(4)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_FlyoverPoint(benchmark::State& state) {
  RigidTarget t;
  t.scatterers = {{Vec3(0.1, 0, 0.08), {0.05, 0}, JonesMatrix::Identity()},
                  {Vec3(-0.1, 0, -0.08), {0.05, 0}, JonesMatrix::Identity()}};
  const FrequencyBand band{2e9, 18e9, 801};
  for (auto _ : state) {
    benchmark::DoNotOptimize(flyover_scan(Target{t}, 0.0, AngleSweep{10, 170, 10}, 3, 3, band, ScanOptions{}));
  }
}
BENCHMARK(BM_FlyoverPoint)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
