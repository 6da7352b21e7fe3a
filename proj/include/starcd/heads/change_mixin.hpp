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

// Change heads that turn a pair of Siamese feature maps into binary change
// logits.
//
//   temporal swap network (TSN):    cat(Xa, Xb) and cat(Xb, Xa) through one
//                                   weight-shared conv stack
//   temporal difference net (TDN):  |Xa - Xb| through a 1x1 projector
//   fusion:                         tsn + tdn, then a 1x1 classifier and
//                                   bilinear upsampling
//
// With the TDN disabled the head is the original ChangeMixin.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starcd/core/rng.hpp"
#include "starcd/core/tensor.hpp"
#include "starcd/nn/layers.hpp"

namespace starcd::heads {

using nn::Mode;

enum class TemporalAggregation { absolute_difference, hadamard_product };

struct HeadConfig {
  int n_conv_layers = 4;   // N
  int conv_channels = 16;  // d_c
  int in_channels = 16;    // backbone C_out
  int upsample_scale = 4;  // backbone output stride
  bool use_tdn = true;
  TemporalAggregation aggregation = TemporalAggregation::absolute_difference;

  void validate() const;
};

template <typename T>
std::pair<Tensor<T>, Tensor<T>> temporal_swap(const Tensor<T>& xa, const Tensor<T>& xb);

/// |a - b|, exactly symmetric in its arguments.
template <typename T>
Tensor<T> temporal_difference(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> aggregate(TemporalAggregation kind, const Tensor<T>& a, const Tensor<T>& b);

/// Gradients of aggregate() w.r.t. (a, b). The absolute difference uses
/// subgradient 0 where a == b.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> aggregate_backward(TemporalAggregation kind, const Tensor<T>& grad,
                                                   const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
struct ChangeLogits {
  Tensor<T> fwd;
  std::optional<Tensor<T>> rev;
};

template <typename T>
class ChangeMixin {
 public:
  using BlockCache = typename nn::ConvBnRelu<T>::Cache;

  struct Cache {
    Tensor<T> xa;
    Tensor<T> xb;
    std::vector<BlockCache> tsn_fwd;
    std::vector<BlockCache> tsn_rev;
    BlockCache projector;
    bool has_rev = false;
    bool used_tdn = false;
    Tensor<T> fused_fwd;
    Tensor<T> fused_rev;
  };

  /// Parameters are drawn in a fixed order (TSN stack, classifier, then the
  /// TDN projector) so a head built with use_tdn = false receives exactly the
  /// TSN weights of a ChangeMixin2 built from the same seed.
  ChangeMixin(HeadConfig cfg, Rng& rng);

  const HeadConfig& config() const { return cfg_; }
  bool has_tdn() const { return projector_.has_value(); }
  /// Drops the temporal difference network, leaving the original ChangeMixin.
  void disable_tdn();

  /// Training mode returns fwd and rev logits; inference mode only fwd.
  ChangeLogits<T> forward(const Tensor<T>& xa, const Tensor<T>& xb, Mode mode, Cache* cache);

  /// TSN path alone: fusion and the projector are skipped even when present.
  ChangeLogits<T> tsn_forward(const Tensor<T>& xa, const Tensor<T>& xb, Mode mode);

  /// grad_rev may be null when only the forward order was used. Returns the
  /// gradients w.r.t. (xa, xb) and accumulates parameter gradients.
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& grad_fwd, const Tensor<T>* grad_rev,
                                           const Cache& cache);

  void visit(const std::string& prefix, const nn::StateVisitor<T>& v);

  std::vector<nn::ConvBnRelu<T>>& tsn_layers() { return tsn_; }
  nn::Conv2d<T>& classifier() { return classifier_; }

 private:
  Tensor<T> run_tsn(const Tensor<T>& input, Mode mode, std::vector<BlockCache>* caches);
  Tensor<T> tsn_backward(const Tensor<T>& grad, const std::vector<BlockCache>& caches);
  Tensor<T> classify(const Tensor<T>& features) const;
  Tensor<T> classify_backward(const Tensor<T>& grad_logits, const Tensor<T>& features);

  HeadConfig cfg_;
  std::vector<nn::ConvBnRelu<T>> tsn_;
  nn::Conv2d<T> classifier_;
  std::optional<nn::ConvBnRelu<T>> projector_;
};

}  // namespace starcd::heads
