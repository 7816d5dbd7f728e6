#include <benchmark/benchmark.h>

#include "polyxport/flight.hpp"
#include "polyxport/microsim.hpp"

namespace polyxport {
namespace {

Scene two_grain_scene() {
  const Medium crystal{MediumKind::crystal, AffineLattice::integer(2)};
  Medium rotated{MediumKind::crystal, AffineLattice(plane_rotation(2, 0, 1, 0.5), Vec::zero(2))};
  return Scene(2, {ConvexGrain::box(0, Vec{0, 0}, Vec{0.3, 0.3}), ConvexGrain::box(1, Vec{0.3, 0}, Vec{0.6, 0.3})},
               {crystal, rotated});
}

void BM_TubeEnumeration(benchmark::State& state) {
  const double eps = 1.0 / static_cast<double>(state.range(0));
  const ScaledGrainLattice lattice(AffineLattice(plane_rotation(2, 0, 1, 0.5), Vec::zero(2)), eps, Vec::zero(2));
  Rng rng(1);
  std::size_t points = 0;
  for (auto _ : state) {
    const auto found = lattice.points_in_tube(Vec{0.1, 0.1}, rng.unit_vector(2), 0.0, 0.3, eps * 0.01);
    points += found.size();
    benchmark::DoNotOptimize(found.data());
  }
  state.counters["points"] = benchmark::Counter(static_cast<double>(points), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_TubeEnumeration)->Arg(10)->Arg(32)->Arg(100);

void BM_FirstCollision(benchmark::State& state) {
  const Scene scene = two_grain_scene();
  MicroConfig cfg;
  cfg.r = 1.0 / static_cast<double>(state.range(0));
  const MicroSystem system(scene, cfg);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(system.first_collision(Vec{0.15, 0.15}, rng.unit_vector(2)));
}
BENCHMARK(BM_FirstCollision)->Arg(100)->Arg(1000)->Arg(10000);

void BM_FlightStep(benchmark::State& state) {
  const Medium crystal{MediumKind::crystal, AffineLattice::integer(2)};
  const Medium poisson{MediumKind::poisson, {}};
  const Scene scene(2, {ConvexGrain::box(0, Vec{0, 0}, Vec{0.3, 0.3}), ConvexGrain::box(1, Vec{0.3, 0}, Vec{0.6, 0.3})},
                    {crystal, poisson}, PeriodicBox{Vec{0, 0}, Vec{0.6, 0.3}});
  const PolyKernel kernel(scene);
  const FlightProcess process(kernel, state.range(0) ? SamplerKind::rejection : SamplerKind::factorized);
  Rng rng(3);
  ExtendedState s = process.sample_initial(Vec{0.1, 0.1}, Vec{1, 0}, rng);
  for (auto _ : state) {
    process.evolve(s, 0.5, rng);
    benchmark::DoNotOptimize(s.xi);
  }
}
BENCHMARK(BM_FlightStep)->Arg(0)->Arg(1);

}  // namespace
}  // namespace polyxport

BENCHMARK_MAIN();
