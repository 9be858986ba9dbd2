#include <benchmark/benchmark.h>

#include <random>

#include "wave/dataset.hpp"
#include "wave/evaluate.hpp"
#include "wave/run_config.hpp"
#include "wave/train.hpp"

using namespace wave;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, bool grad) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(r * c);
  for (auto& x : v) x = g(rng);
  return Tensor({r, c}, std::move(v), grad);
}

const Dataset& bench_dataset() {
  static const Dataset ds = [] {
    RunConfig c;
    c.data.eval_per_group = 128;
    return generate_dataset(LatentSpec::generate(c.latent_params()), c.generate_options(), c.data_seed());
  }();
  return ds;
}

}  // namespace

static void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1, true), b = random_matrix(n, n, 2, true);
  for (auto _ : state) {
    Tensor loss = sum(matmul(a, b));
    loss.backward();
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64)->Arg(128);

static void BM_TrainStep(benchmark::State& state) {
  RunConfig c;
  c.train.steps = 1;
  WaveModel model(c.model, c.lora, c.model_seed());
  const Dataset& ds = bench_dataset();
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(model, ds, c.resolved_train(), c.objective));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

static void BM_EmbedEvalPool(benchmark::State& state) {
  RunConfig c;
  const WaveModel model(c.model, c.lora, c.model_seed());
  const Dataset& ds = bench_dataset();
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_retrieval(model, ds, direction_by_name("text_to_visual")));
  }
}
BENCHMARK(BM_EmbedEvalPool)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
