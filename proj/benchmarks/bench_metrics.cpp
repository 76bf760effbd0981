#include <benchmark/benchmark.h>

#include <random>

#include "divscope/diversity.hpp"

namespace {

using namespace divscope;

double unit(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

diversity::TopicDistribution random_distribution(std::mt19937_64& eng, std::size_t k) {
  diversity::TopicDistribution dist;
  double total = 0.0;
  for (std::uint32_t i = 0; i < k; ++i) {
    dist.topics.push_back(i);
    dist.p.push_back(unit(eng) + 1e-4);
    total += dist.p.back();
  }
  for (auto& x : dist.p) x /= total;
  return dist;
}

diversity::DistanceMatrix random_matrix(std::mt19937_64& eng, std::size_t k) {
  diversity::DistanceMatrix dm;
  dm.metric = diversity::DistanceMetric::Cosine;
  dm.d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::uint32_t i = 0; i < k; ++i) {
    dm.topics.push_back(i);
    for (std::uint32_t j = i + 1; j < k; ++j) {
      double v = unit(eng);
      dm.d(i, j) = dm.d(j, i) = v;
    }
  }
  return dm;
}

void BM_RaoStirling(benchmark::State& state) {
  std::mt19937_64 eng(1);
  auto k = static_cast<std::size_t>(state.range(0));
  auto dist = random_distribution(eng, k);
  auto dm = random_matrix(eng, k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diversity::rao_stirling(dist, dm));
  }
}
BENCHMARK(BM_RaoStirling)->Arg(50)->Arg(250)->Arg(750);

void BM_WeitzmanDendrogram(benchmark::State& state) {
  std::mt19937_64 eng(2);
  auto k = static_cast<std::size_t>(state.range(0));
  auto dm = random_matrix(eng, k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diversity::weitzman_diversity(dm));
  }
}
BENCHMARK(BM_WeitzmanDendrogram)->Arg(50)->Arg(250)->Arg(500);

void BM_Entropy(benchmark::State& state) {
  std::mt19937_64 eng(3);
  auto dist = random_distribution(eng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(diversity::balance_entropy(dist));
  }
}
BENCHMARK(BM_Entropy)->Arg(750);

}  // namespace
