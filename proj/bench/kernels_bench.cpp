// Copyright 2026 The starcd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference vs OpenMP kernels. Arguments: batch, channels, extent.

#include <benchmark/benchmark.h>

#include "starcd/core/rng.hpp"
#include "starcd/kernels/kernels.hpp"

namespace {

using namespace starcd;

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (auto& v : t.vec()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

struct ConvCase {
  Tensor<float> in, weight, grad_out;
  std::vector<float> bias;
  kernels::ConvGeometry geo;

  explicit ConvCase(const benchmark::State& st) {
    const int n = static_cast<int>(st.range(0)), c = static_cast<int>(st.range(1)), e = static_cast<int>(st.range(2));
    in = random_tensor({n, c, e, e}, 1);
    weight = random_tensor({c, c, 3, 3}, 2);
    grad_out = random_tensor({n, c, e, e}, 3);
    bias.assign(c, 0.1f);
  }
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& st) {
  ConvCase k(st);
  for (auto _ : st) {
    auto out = Parallel ? kernels::parallel::conv2d_forward<float>(k.in, k.weight, k.bias, k.geo)
                        : kernels::serial::conv2d_forward<float>(k.in, k.weight, k.bias, k.geo);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardInput(benchmark::State& st) {
  ConvCase k(st);
  for (auto _ : st) {
    auto out = Parallel ? kernels::parallel::conv2d_backward_input<float>(k.grad_out, k.weight, k.in.shape(), k.geo)
                        : kernels::serial::conv2d_backward_input<float>(k.grad_out, k.weight, k.in.shape(), k.geo);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardParams(benchmark::State& st) {
  ConvCase k(st);
  Tensor<float> gw(k.weight.shape());
  std::vector<float> gb(k.bias.size());
  for (auto _ : st) {
    if (Parallel)
      kernels::parallel::conv2d_backward_params<float>(k.grad_out, k.in, k.geo, gw, gb);
    else
      kernels::serial::conv2d_backward_params<float>(k.grad_out, k.in, k.geo, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_Upsample(benchmark::State& st) {
  const auto in = random_tensor({static_cast<int>(st.range(0)), static_cast<int>(st.range(1)),
                                 static_cast<int>(st.range(2)), static_cast<int>(st.range(2))},
                                4);
  for (auto _ : st) {
    auto out = Parallel ? kernels::parallel::upsample_bilinear<float>(in, 4)
                        : kernels::serial::upsample_bilinear<float>(in, 4);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Confusion(benchmark::State& st) {
  const std::size_t n = static_cast<std::size_t>(st.range(0));
  Rng rng(5);
  std::vector<int> ref(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = rng.uniform_int(0, 9);
    pred[i] = rng.uniform_int(0, 9);
  }
  for (auto _ : st) {
    auto cm = Parallel ? kernels::parallel::confusion_counts(ref, pred, 10, 255)
                       : kernels::serial::confusion_counts(ref, pred, 10, 255);
    benchmark::DoNotOptimize(cm.data());
  }
}

#define CONV_ARGS ->Args({8, 16, 32})->Args({16, 32, 16})->Unit(benchmark::kMillisecond)

BENCHMARK(BM_ConvForward<false>) CONV_ARGS;
BENCHMARK(BM_ConvForward<true>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardInput<false>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardInput<true>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardParams<false>) CONV_ARGS;
BENCHMARK(BM_ConvBackwardParams<true>) CONV_ARGS;
BENCHMARK(BM_Upsample<false>)->Args({8, 16, 8});
BENCHMARK(BM_Upsample<true>)->Args({8, 16, 8});
BENCHMARK(BM_Confusion<false>)->Arg(1 << 20);
BENCHMARK(BM_Confusion<true>)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
