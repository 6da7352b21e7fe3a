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

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "starcd/core/rng.hpp"
#include "starcd/core/tensor.hpp"
#include "starcd/kernels/kernels.hpp"

namespace starcd::nn {

enum class Mode { train, infer };

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  explicit Parameter(Shape shape) : value(shape), grad(shape) {}
  bool defined() const { return !value.empty(); }
  void zero_grad() { grad.fill(T(0)); }
};

/// Walks named trainable parameters and non-trainable buffers (running
/// statistics). Names are dotted paths and are stable across versions; the
/// checkpoint format keys on them.
template <typename T>
struct StateVisitor {
  std::function<void(const std::string&, Parameter<T>&)> param;
  std::function<void(const std::string&, Tensor<T>&)> buffer;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, bool bias);

  /// He-normal weights, zero bias.
  void init(Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  /// Accumulates parameter gradients and returns the input gradient.
  Tensor<T> backward(const Tensor<T>& grad_out, const Tensor<T>& x);

  void visit(const std::string& prefix, const StateVisitor<T>& v);

  int in_channels() const { return weight_.value.c(); }
  int out_channels() const { return weight_.value.n(); }
  kernels::ConvGeometry geometry() const { return geo_; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  kernels::ConvGeometry geo_{};
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  struct Cache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
  };

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  /// Training mode normalizes with batch statistics and folds them into the
  /// running estimates; inference mode uses the running estimates.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache);
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);

  void visit(const std::string& prefix, const StateVisitor<T>& v);

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }

 private:
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
};

/// conv -> batch norm -> ReLU.
template <typename T>
class ConvBnRelu {
 public:
  struct Cache {
    Tensor<T> input;
    typename BatchNorm2d<T>::Cache bn;
    Tensor<T> output;
  };

  ConvBnRelu() = default;
  ConvBnRelu(int in_channels, int out_channels, int kernel, int stride);

  void init(Rng& rng) { conv_.init(rng); }
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache);
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
  void visit(const std::string& prefix, const StateVisitor<T>& v);

  Conv2d<T>& conv() { return conv_; }
  BatchNorm2d<T>& bn() { return bn_; }
  int out_channels() const { return conv_.out_channels(); }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
};

// Elementwise helpers shared by the networks.
template <typename T>
void relu_inplace(Tensor<T>& x);
/// grad * 1[output > 0]
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& output);
template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src);
/// Concatenate along channels.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// Split a channel-concatenated gradient back into its two parts.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels);
/// Select samples [begin, begin + count) of a batch.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int begin, int count);

}  // namespace starcd::nn
