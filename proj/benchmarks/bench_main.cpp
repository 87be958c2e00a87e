#include <benchmark/benchmark.h>

#include <random>

#include "mhop/dataset.hpp"
#include "mhop/hungarian.hpp"
#include "mhop/model.hpp"
#include "mhop/ops.hpp"
#include "mhop/training.hpp"

using namespace mhop;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (auto& x : v) x = u(rng);
  return Tensor::from({r, c}, std::move(v));
}

const data::Sample& sample() {
  static const data::Sample s = [] {
    const auto ep = world::simulate(3, world::WorldConfig{});
    const perception::AttributeEncoder enc(32, 7);
    return data::make_sample(ep, enc, data::DatasetOptions{});
  }();
  return s;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(78)->Arg(128);

static void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 0.0);
  std::vector<double> cost(static_cast<std::size_t>(n * n));
  for (auto& c : cost) c = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(cost, n));
}
BENCHMARK(BM_Hungarian)->Arg(6)->Arg(10)->Arg(32);

static void BM_MhtForward(benchmark::State& state) {
  const ReasoningModel model(ModelConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(sample()));
}
BENCHMARK(BM_MhtForward);

static void BM_TrainStep(benchmark::State& state) {
  ReasoningModel model(ModelConfig{});
  train::TrainConfig cfg;
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    model.params().zero_grad();
    Tape tape;
    TapeScope scope(tape);
    const auto b = train::sample_loss(model, sample(), cfg, state.range(0) != 0, nn::Context{true, 0.1, &rng});
    tape.backward(b.total);
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1);
BENCHMARK_MAIN();
