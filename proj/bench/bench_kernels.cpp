// OpenMP kernels against the serial reference on model-sized shapes.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "mapnet/kernels.hpp"
#include "mapnet/reference.hpp"
#include "mapnet/rng.hpp"

using namespace mapnet;

namespace {

Tensor<float> random(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

// Args: channels, spatial size.
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 64})->Args({32, 32})->Args({64, 32})->Args({64, 128});
}

void BM_ConvForward(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const auto x = random({1, c, hw, hw}, 1), w = random({c, c, 3, 3}, 2), b = random({c, 1, 1, 1}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * std::int64_t(c) * c * 9 * hw * hw);
}

void BM_ConvForwardReference(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const auto x = random({1, c, hw, hw}, 1), w = random({c, c, 3, 3}, 2), b = random({c, 1, 1, 1}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * std::int64_t(c) * c * 9 * hw * hw);
}

void BM_ConvBackwardInput(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const auto g = random({1, c, hw, hw}, 4), w = random({c, c, 3, 3}, 2);
  Tensor<float> gx({1, c, hw, hw});
  for (auto _ : state) {
    kernels::conv2d_backward_input(g, w, 1, 1, gx);
    benchmark::ClobberMemory();
  }
}

void BM_ConvBackwardInputReference(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const auto g = random({1, c, hw, hw}, 4), w = random({c, c, 3, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_backward_input(g, w, {1, c, hw, hw}, 1, 1));
}

void BM_ConvBackwardWeight(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const auto g = random({1, c, hw, hw}, 4), x = random({1, c, hw, hw}, 1);
  Tensor<float> gw({c, c, 3, 3});
  for (auto _ : state) {
    kernels::conv2d_backward_weight(g, x, 1, 1, gw);
    benchmark::ClobberMemory();
  }
}

void BM_ConvBackwardWeightReference(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  const auto g = random({1, c, hw, hw}, 4), x = random({1, c, hw, hw}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_backward_weight(g, x, {c, c, 3, 3}, 1, 1));
}

void BM_MaxPool(benchmark::State& state) {
  const auto x = random({2, 64, 128, 128}, 5);
  std::vector<std::uint32_t> argmax;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::max_pool_forward(x, {}, argmax));
}

void BM_MaxPoolReference(benchmark::State& state) {
  const auto x = random({2, 64, 128, 128}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(reference::max_pool_forward(x, {}));
}

void BM_Bilinear(benchmark::State& state) {
  const auto x = random({1, 256, 32, 32}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::bilinear_forward(x, 128, 128));
}

void BM_BilinearReference(benchmark::State& state) {
  const auto x = random({1, 256, 32, 32}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(reference::bilinear_forward(x, 128, 128));
}

void BM_BatchNormTrain(benchmark::State& state) {
  const auto x = random({4, 64, 64, 64}, 7), gamma = random({1, 64, 1, 1}, 8), beta = random({1, 64, 1, 1}, 9);
  kernels::BatchNormSaved<float> saved;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_norm_train_forward(x, gamma, beta, 1e-5f, saved));
}

void BM_BatchNormTrainReference(benchmark::State& state) {
  const auto x = random({4, 64, 64, 64}, 7), gamma = random({1, 64, 1, 1}, 8), beta = random({1, 64, 1, 1}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(reference::batch_norm_train_forward(x, gamma, beta, 1e-5f));
}

}  // namespace

BENCHMARK(BM_ConvForward)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardReference)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInput)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInputReference)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeightReference)->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPoolReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bilinear)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BilinearReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNormTrain)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNormTrainReference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
