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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "starcd/core/types.hpp"
#include "starcd/heads/change_mixin.hpp"
#include "starcd/model/backbone.hpp"

namespace starcd::model {

struct ModelConfig {
  BackboneConfig backbone;
  /// 2 selects binary object mode (one sigmoid channel); more classes use a
  /// softmax head with one channel per class.
  int num_classes = 2;
  /// in_channels and upsample_scale are overwritten from the backbone.
  heads::HeadConfig head;

  int semantic_channels() const { return num_classes == 2 ? 1 : num_classes; }
  bool binary() const { return num_classes == 2; }
  void validate() const;
};

template <typename T>
struct PredictionGrads {
  Tensor<T> semantic_a;
  Tensor<T> semantic_b;
  Tensor<T> change_fwd;
  std::optional<Tensor<T>> change_rev;
};

/// "From-to" readout of a multi-class model. Cells with binary change = 1
/// carry (class_a, class_b); the two maps come from decoupled heads and may
/// agree on a changed cell.
struct SemanticChangeReadout {
  SemanticMask class_a;
  SemanticMask class_b;
  BinaryChangeMask change;
};

/// Siamese segmentation network with a per-pixel semantic classifier and a
/// ChangeMixin(2) change head.
template <typename T>
class ChangeStar {
 public:
  struct Cache {
    std::unique_ptr<typename Backbone<T>::Cache> backbone_a;
    std::unique_ptr<typename Backbone<T>::Cache> backbone_b;
    Tensor<T> features_a;
    Tensor<T> features_b;
    typename heads::ChangeMixin<T>::Cache head;
  };

  /// Builds the registered backbone named in cfg. An empty backbone name
  /// leaves the model without one until attach_backbone().
  ChangeStar(ModelConfig cfg, std::uint64_t seed);

  void attach_backbone(std::unique_ptr<Backbone<T>> backbone);
  bool has_backbone() const { return backbone_ != nullptr; }

  const ModelConfig& config() const { return cfg_; }
  heads::ChangeMixin<T>& head();

  /// Batched forward. Both temporal inputs run through the same backbone
  /// instance, one call each.
  PredictionTensors<T> forward(const Tensor<T>& a, const Tensor<T>& b, Mode mode, Cache* cache);
  void backward(const PredictionGrads<T>& grads, const Cache& cache);

  Tensor<T> features(const Tensor<T>& x, Mode mode);
  /// Semantic logits at input resolution for a single temporal input.
  Tensor<T> segment(const Tensor<T>& x, Mode mode);

  /// Per-pixel class map: sigmoid threshold (binary) or argmax.
  LabelTensor class_map(const Tensor<T>& semantic_logits, double threshold = 0.5) const;
  /// Deep post-classification comparison: inequality of the two class maps.
  LabelTensor dpcc(const Tensor<T>& a, const Tensor<T>& b, double threshold = 0.5);
  /// Binary change from the change head (inference mode, fwd order).
  LabelTensor change_map(const Tensor<T>& a, const Tensor<T>& b, double threshold = 0.5);

  // Single-pair conveniences over ImageTile.
  PredictionBundle forward_pair(const ImageTile& a, const ImageTile& b, Mode mode);
  BinaryChangeMask dpcc_predict(const ImageTile& a, const ImageTile& b, double threshold = 0.5);
  SemanticChangeReadout predict_semantic_change(const ImageTile& a, const ImageTile& b);

  void visit(const nn::StateVisitor<T>& v);
  void zero_grad();
  std::size_t parameter_count();
  std::size_t head_parameter_count();

 private:
  Backbone<T>& backbone();
  Tensor<T> classify(const Tensor<T>& features) const;

  ModelConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<Backbone<T>> backbone_;
  std::unique_ptr<heads::ChangeMixin<T>> head_;
  nn::Conv2d<T> semantic_classifier_;
};

/// Packs tiles (all the same shape) into one NCHW batch.
template <typename T>
Tensor<T> to_batch(const std::vector<const ImageTile*>& tiles);
template <typename T>
Tensor<T> to_batch(const ImageTile& tile);
LabelTensor to_label_batch(const std::vector<const SemanticMask*>& masks);
LabelTensor to_label_batch(const std::vector<const BinaryChangeMask*>& masks);

}  // namespace starcd::model
