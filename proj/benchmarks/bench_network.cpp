#include <benchmark/benchmark.h>

#include <random>

#include "divscope/netan.hpp"

namespace {

using namespace divscope;

netan::CoocGraph random_graph(std::size_t n, double edge_prob, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  auto unit = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
  std::vector<netan::CoocGraph::Edge> edges;
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      if (unit() < edge_prob) edges.push_back({a, b, 1.0 + 50.0 * unit()});
    }
  }
  return netan::CoocGraph::from_edges(n, std::move(edges));
}

void BM_EigenvectorCentrality(benchmark::State& state) {
  auto g = random_graph(static_cast<std::size_t>(state.range(0)), 0.05, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(netan::eigenvector_centrality(g));
  }
}
BENCHMARK(BM_EigenvectorCentrality)->Arg(200)->Arg(750);

void BM_NetworkStats(benchmark::State& state) {
  auto g = random_graph(static_cast<std::size_t>(state.range(0)), 0.02, 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(netan::network_stats(g));
  }
}
BENCHMARK(BM_NetworkStats)->Arg(200)->Arg(750);

void BM_MaxSpanningTree(benchmark::State& state) {
  auto g = random_graph(static_cast<std::size_t>(state.range(0)), 0.2, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(netan::max_spanning_tree(g));
  }
}
BENCHMARK(BM_MaxSpanningTree)->Arg(750);

}  // namespace
