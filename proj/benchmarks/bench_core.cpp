#include <benchmark/benchmark.h>

#include "helfrich/diagnostics.hpp"
#include "helfrich/flow.hpp"
#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"
#include "helfrich/sphere_ode.hpp"

namespace {

using namespace helfrich;

void BM_BuildCache(benchmark::State& st) {
  const TriangleMesh m = make_icosphere(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(build_cache(m));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(m.num_vertices()));
}
BENCHMARK(BM_BuildCache)->DenseRange(3, 5)->Unit(benchmark::kMicrosecond);

void BM_FlowVelocity(benchmark::State& st) {
  const TriangleMesh m = make_icosphere(static_cast<int>(st.range(0)));
  const GeometryCache c = build_cache(m);
  for (auto _ : st) benchmark::DoNotOptimize(flow_velocity(c, FlowParams{1.0, 0.5}));
}
BENCHMARK(BM_FlowVelocity)->DenseRange(3, 5)->Unit(benchmark::kMicrosecond);

void BM_Step(benchmark::State& st) {
  const TriangleMesh m = make_icosphere(static_cast<int>(st.range(0)));
  const FlowParams p{-1.0, 0.0};
  const SteppingPolicy policy;
  const FlowState s = make_initial_state(m, p, policy);
  for (auto _ : st) benchmark::DoNotOptimize(step(s, p, policy));
}
BENCHMARK(BM_Step)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

void BM_Kappa(benchmark::State& st) {
  const TriangleMesh m = make_icosphere(static_cast<int>(st.range(0)));
  const GeometryCache c = build_cache(m);
  for (auto _ : st) benchmark::DoNotOptimize(kappa(m, c, 0.5));
}
BENCHMARK(BM_Kappa)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

void BM_KappaProfile(benchmark::State& st) {
  const TriangleMesh m = make_icosphere(4);
  const GeometryCache c = build_cache(m);
  const std::vector<double> radii = default_radius_grid(c, m);
  for (auto _ : st) benchmark::DoNotOptimize(kappa_profile(m, c, radii));
}
BENCHMARK(BM_KappaProfile)->Unit(benchmark::kMillisecond);

void BM_SphereOde(benchmark::State& st) {
  const FlowParams p{-1.3, 0.7};
  for (auto _ : st) benchmark::DoNotOptimize(integrate_sphere_ode(1.7, p, 10.0));
}
BENCHMARK(BM_SphereOde)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
