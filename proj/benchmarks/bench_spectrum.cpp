#include <benchmark/benchmark.h>

#include "wins/array_signal.hpp"
#include "wins/simulator.hpp"

namespace {

using namespace wins;

CsiSnapshot make_snapshot() {
  ArrayGeometry geom;
  NoiseConfig noise;
  noise.csi_snr_db = 22.0;
  noise.seed = 5;
  MultipathConfig mp;
  return synthesize_csi(Vec3(0, 0, 1), Rotation(), Vec3(1.5, 2.5, 1), geom,
                        mp, noise, 0, 0.0);
}

void SpectrumWindowed(benchmark::State& state) {
  const CsiSnapshot snap = make_snapshot();
  const auto smoothed = spatial_smooth(snap);
  const auto proj = noise_projector(smoothed, 1);
  const auto theta = windowed_theta_axis(28.0, 20.0);
  const auto tau = default_tau_axis(snap.subcarrier_spacing_hz, 4.0);
  for (auto _ : state) {
    auto grid = evaluate_spectrum(proj, smoothed, theta, tau);
    benchmark::DoNotOptimize(grid.power.data());
  }
}
BENCHMARK(SpectrumWindowed);

void SpectrumFullGrid(benchmark::State& state) {
  const CsiSnapshot snap = make_snapshot();
  const auto smoothed = spatial_smooth(snap);
  const auto proj = noise_projector(smoothed, 1);
  const auto theta = full_theta_axis();
  const auto tau = default_tau_axis(snap.subcarrier_spacing_hz, 4.0);
  for (auto _ : state) {
    auto grid = evaluate_spectrum(proj, smoothed, theta, tau);
    benchmark::DoNotOptimize(grid.power.data());
  }
}
BENCHMARK(SpectrumFullGrid);

void EigenDecomposition(benchmark::State& state) {
  const CsiSnapshot snap = make_snapshot();
  const auto smoothed = spatial_smooth(snap);
  for (auto _ : state) {
    auto proj = noise_projector(smoothed, 3);
    benchmark::DoNotOptimize(proj.h.data());
  }
}
BENCHMARK(EigenDecomposition);

}  // namespace

BENCHMARK_MAIN();
