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

// Dense kernels used by every layer. Two implementations exist for each hot
// kernel:
//
//   serial::   the reference formulation, one output element at a time.
//   parallel:: OpenMP over independent output planes, vectorizable rows.
//
// Both accumulate every output element in the same term order, so with
// floating-point contraction disabled the results agree bit for bit for any
// thread count. Tests pin that equality; bench/ measures the speedup.
//
// Instantiated for float (training) and double (gradient checks).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "starcd/core/tensor.hpp"

namespace starcd::kernels {

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_extent(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

/// Per-channel batch statistics (biased variance).
template <typename T>
struct ChannelStats {
  std::vector<T> mean;
  std::vector<T> var;
};

#define STARCD_KERNEL_DECLS                                                                         \
  /* out[n,co] = bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * in[n,ci,...]; bias may be empty. */    \
  template <typename T>                                                                             \
  Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& weight, std::span<const T> bias,  \
                           ConvGeometry geo);                                                      \
  template <typename T>                                                                             \
  Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,              \
                                  const Shape& in_shape, ConvGeometry geo);                        \
  /* Accumulates into grad_weight and (when non-empty) grad_bias. */                               \
  template <typename T>                                                                             \
  void conv2d_backward_params(const Tensor<T>& grad_out, const Tensor<T>& in, ConvGeometry geo,    \
                              Tensor<T>& grad_weight, std::span<T> grad_bias);                     \
  template <typename T>                                                                             \
  ChannelStats<T> channel_stats(const Tensor<T>& in);                                              \
  /* Bilinear resize by an integer factor, half-pixel centers (align_corners = false). */          \
  template <typename T>                                                                             \
  Tensor<T> upsample_bilinear(const Tensor<T>& in, int scale);                                     \
  template <typename T>                                                                             \
  Tensor<T> upsample_bilinear_backward(const Tensor<T>& grad_out, int scale);                      \
  /* Row-major k x k counts of (reference, prediction); cells where either is ignore are skipped. */ \
  std::vector<std::int64_t> confusion_counts(std::span<const int> reference,                      \
                                             std::span<const int> prediction, int k, int ignore_value);

namespace serial {
STARCD_KERNEL_DECLS
}  // namespace serial

namespace parallel {
STARCD_KERNEL_DECLS
}  // namespace parallel

#undef STARCD_KERNEL_DECLS

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();
void set_num_threads(int n);

// Layers call the parallel implementations.
using parallel::channel_stats;
using parallel::confusion_counts;
using parallel::conv2d_backward_input;
using parallel::conv2d_backward_params;
using parallel::conv2d_forward;
using parallel::upsample_bilinear;
using parallel::upsample_bilinear_backward;

}  // namespace starcd::kernels
