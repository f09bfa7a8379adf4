#include <benchmark/benchmark.h>

#include <random>

#include "proper/embeddings.hpp"
#include "proper/reranker.hpp"

namespace {

using namespace proper;

ActivationPool random_pool(int n, int anchors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> conf(-2.0, 0.0);
  auto vec = [&] {
    std::vector<double> v(32);
    for (auto& x : v) x = normal(rng);
    return EmbeddingVector::normalize(std::move(v));
  };
  ActivationPool pool;
  for (int i = 0; i < n; ++i) {
    auto d = Dimension::make("candidate " + std::to_string(i), "value " + std::to_string(i), std::nullopt,
                             Origin::Implicit, conf(rng));
    pool.embeddings.emplace(d.id(), vec());
    pool.implicit_candidates.push_back(std::move(d));
  }
  for (int i = 0; i < anchors; ++i) {
    auto d = Dimension::make("anchor " + std::to_string(i), "stated " + std::to_string(i), std::nullopt,
                             Origin::UserExplicit);
    pool.embeddings.emplace(d.id(), vec());
    pool.unmet_explicit.push_back(std::move(d));
  }
  return pool;
}

void BM_SelectExact(benchmark::State& state) {
  const auto pool = random_pool(static_cast<int>(state.range(0)), 2, 7);
  RerankConfig cfg;
  cfg.k = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(select_exact(pool, cfg));
}
BENCHMARK(BM_SelectExact)->Args({10, 3})->Args({16, 5})->Args({20, 5});

void BM_SelectGreedy(benchmark::State& state) {
  const auto pool = random_pool(static_cast<int>(state.range(0)), 2, 7);
  RerankConfig cfg;
  cfg.k = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(select_greedy(pool, cfg));
}
BENCHMARK(BM_SelectGreedy)->Args({20, 5})->Args({100, 10})->Args({400, 20});

void BM_MockEmbed(benchmark::State& state) {
  const MockEmbedder embedder;
  const std::string text = "Medication history: current prescriptions and supplements";
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(text));
}
BENCHMARK(BM_MockEmbed);

}  // namespace

BENCHMARK_MAIN();
