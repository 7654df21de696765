#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "osteoforge/components.hpp"
#include "osteoforge/graphcut.hpp"
#include "osteoforge/maxflow.hpp"
#include "osteoforge/phantom.hpp"

namespace {

using namespace osteoforge;

// 4-connected grid network with random terminal weights.
FlowNetwork grid_network(std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Capacity> cap(1, 100);
  const std::size_t n = side * side;
  FlowNetwork net(n + 2, n, n + 1);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t i = y * side + x;
      net.add_terminal_edges(i, cap(rng), cap(rng));
      if (x + 1 < side) net.add_edge(i, i + 1, cap(rng), cap(rng));
      if (y + 1 < side) net.add_edge(i, i + side, cap(rng), cap(rng));
    }
  }
  return net;
}

void BM_MaxFlowGrid(benchmark::State& state) {
  const FlowNetwork net = grid_network(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(max_flow(net).flow);
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_MaxFlowGrid)->Arg(32)->Arg(64)->Arg(128)->Complexity();

void BM_GrabCutDisk(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const double c = static_cast<double>(side) / 2.0, r = static_cast<double>(side) / 5.0;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 8.0);
  GrayImage img(side, side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const bool in = std::hypot(static_cast<double>(x) - c, static_cast<double>(y) - c) <= r;
      img(x, y) = static_cast<std::uint8_t>(std::clamp(std::round((in ? 200 : 40) + noise(rng)),
                                                       0.0, 255.0));
    }
  }
  RecistMeasurement m;
  m.long_axis = {{c - 0.8 * r, c}, {c + 0.8 * r, c}};
  m.short_axis = {{c, c - 0.5 * r}, {c, c + 0.5 * r}};
  SeedGeometry g = seed_geometry(m, {side, side});
  const auto margin = static_cast<long>(r) + 3;
  g.bbox = {static_cast<long>(c) - margin, static_cast<long>(c) - margin,
            static_cast<long>(c) + margin, static_cast<long>(c) + margin};
  for (auto _ : state) benchmark::DoNotOptimize(grabcut_segment(img, g, {}, 0).rounds);
}
BENCHMARK(BM_GrabCutDisk)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ConnectedComponents(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::bernoulli_distribution on(0.3);
  Mask3D mask(Geometry{{side, side, side}, {1, 1, 1}, {0, 0, 0}});
  for (auto& v : mask.values()) v = on(rng) ? 1 : 0;
  for (auto _ : state) benchmark::DoNotOptimize(connected_components(mask).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mask.size()));
}
BENCHMARK(BM_ConnectedComponents)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DefaultPhantom(benchmark::State& state) {
  const PhantomSpec spec = PhantomSpec::default_spec();
  for (auto _ : state) benchmark::DoNotOptimize(generate_phantom(spec).recist.size());
}
BENCHMARK(BM_DefaultPhantom)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
