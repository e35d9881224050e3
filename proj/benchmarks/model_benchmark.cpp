#include <benchmark/benchmark.h>

#include <algorithm>

#include "ihgnn/data.hpp"
#include "ihgnn/eval.hpp"
#include "ihgnn/training.hpp"

namespace ihgnn {
namespace {

struct Fixture {
  SyntheticData data;
  Hypergraph graph;
  ModelConfig config;
  ParameterSet params;
  std::vector<Sample> batch;
};

Fixture make_fixture(int order, bool weighted, std::size_t layers) {
  Fixture f{generate_synthetic(SyntheticSpec{}), {}, {}, {}, {}};
  f.config.order = std::max(order, 1);
  f.config.weighted = weighted;
  f.config.layers = layers;
  f.graph = build_hypergraph(f.data.log);
  Rng rng(1);
  f.params = initialize_parameters(f.config, f.data.log.counts(), f.data.vocab.word_count, rng);
  const auto positives = f.data.log.distinct_triples();
  const PositiveIndex index(positives);
  for (std::size_t i = 0; i < 100; ++i) {
    f.batch.push_back({positives[i], 1.0});
    for (const auto& n : sample_negatives(positives[i], f.data.log.counts().products, index, 10, rng)) {
      f.batch.push_back({n, 0.0});
    }
  }
  return f;
}

void BM_Forward(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)), state.range(0) > 0,
                              static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(f.graph, f.data.vocab, f.params, f.config));
  }
}

void BM_Gradients(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)), state.range(0) > 0,
                              static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_gradients(f.graph, f.data.vocab, f.params, f.config, f.batch));
  }
}

void BM_Evaluate(benchmark::State& state) {
  const auto f = make_fixture(3, true, 2);
  const auto split = temporal_split(f.data.log);
  const auto embeddings = forward(f.graph, f.data.vocab, f.params, f.config);
  const InteractionLog* seen[] = {&split.train, &split.valid};
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_log(embeddings, 0.5, split.test, seen, split.train));
  }
}

// Order 0 stands for the unweighted variant.
void Grid(benchmark::internal::Benchmark* b) {
  for (int order : {0, 1, 2, 3}) b->Args({order, 2});
  for (int layers : {0, 1, 3, 4}) b->Args({3, layers});
}

BENCHMARK(BM_Forward)->Apply(Grid)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gradients)->Apply(Grid)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ihgnn

BENCHMARK_MAIN();
