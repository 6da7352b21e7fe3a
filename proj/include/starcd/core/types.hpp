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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "starcd/core/tensor.hpp"

namespace starcd {

/// Label value reserved for "not annotated" cells in serialized masks.
inline constexpr int kIgnoreValue = 255;

/// A channels x height x width raster in channel-major order. Values are
/// finite; radiometric operations in this library assume the [0, 1] range.
class ImageTile {
 public:
  ImageTile(int channels, int height, int width, std::vector<float> data);
  /// Constant-valued tile.
  static ImageTile filled(int channels, int height, int width, float value);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const float> data() const { return data_; }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  friend bool operator==(const ImageTile&, const ImageTile&) = default;

 private:
  int channels_;
  int height_;
  int width_;
  std::vector<float> data_;
};

/// Integer class grid; every cell is a class id in [0, num_classes) or the
/// ignore value.
class SemanticMask {
 public:
  SemanticMask(int height, int width, int num_classes, std::vector<int> labels,
               int ignore_value = kIgnoreValue);
  static SemanticMask filled(int height, int width, int num_classes, int label,
                             int ignore_value = kIgnoreValue);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  int ignore_value() const { return ignore_value_; }
  std::span<const int> labels() const { return labels_; }
  int at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  bool is_ignore(int y, int x) const { return at(y, x) == ignore_value_; }

  friend bool operator==(const SemanticMask&, const SemanticMask&) = default;

 private:
  int height_;
  int width_;
  int num_classes_;
  int ignore_value_;
  std::vector<int> labels_;
};

/// Cells are 0 (unchanged), 1 (changed) or the ignore value.
class BinaryChangeMask {
 public:
  BinaryChangeMask(int height, int width, std::vector<int> values, int ignore_value = kIgnoreValue);

  int height() const { return height_; }
  int width() const { return width_; }
  int ignore_value() const { return ignore_value_; }
  std::span<const int> values() const { return values_; }
  int at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

  std::size_t count(int value) const;

  friend bool operator==(const BinaryChangeMask&, const BinaryChangeMask&) = default;

 private:
  int height_;
  int width_;
  int ignore_value_;
  std::vector<int> values_;
};

enum class PairProvenance { permutation, self_contrast, bitemporal };

std::string_view to_string(PairProvenance p);

/// Two co-registered images with their semantic masks and the derived change
/// target. The change mask is stored, not recomputed, so that real
/// bitemporal annotations can use the same type.
class PseudoPair {
 public:
  PseudoPair(ImageTile image_a, ImageTile image_b, SemanticMask mask_a, SemanticMask mask_b,
             BinaryChangeMask change, PairProvenance provenance);

  const ImageTile& image_a() const { return image_a_; }
  const ImageTile& image_b() const { return image_b_; }
  const SemanticMask& mask_a() const { return mask_a_; }
  const SemanticMask& mask_b() const { return mask_b_; }
  const BinaryChangeMask& change() const { return change_; }
  PairProvenance provenance() const { return provenance_; }

 private:
  ImageTile image_a_;
  ImageTile image_b_;
  SemanticMask mask_a_;
  SemanticMask mask_b_;
  BinaryChangeMask change_;
  PairProvenance provenance_;
};

/// Decoupled per-pair outputs at input resolution. change_logits_rev is
/// only produced by a training-mode forward.
class PredictionBundle {
 public:
  PredictionBundle(Tensor<float> semantic_logits_a, Tensor<float> semantic_logits_b,
                   Tensor<float> change_logits_fwd, std::optional<Tensor<float>> change_logits_rev);

  const Tensor<float>& semantic_logits_a() const { return semantic_a_; }
  const Tensor<float>& semantic_logits_b() const { return semantic_b_; }
  const Tensor<float>& change_logits_fwd() const { return change_fwd_; }
  const std::optional<Tensor<float>>& change_logits_rev() const { return change_rev_; }
  bool has_reverse() const { return change_rev_.has_value(); }

 private:
  Tensor<float> semantic_a_;
  Tensor<float> semantic_b_;
  Tensor<float> change_fwd_;
  std::optional<Tensor<float>> change_rev_;
};

/// Batched model outputs at input resolution. change_rev is present only
/// for training-mode forwards.
template <typename T>
struct PredictionTensors {
  Tensor<T> semantic_a;
  Tensor<T> semantic_b;
  Tensor<T> change_fwd;
  std::optional<Tensor<T>> change_rev;
};

// Each validate overload returns normally iff the value's invariants hold and
// otherwise throws an Error whose kind names the violated invariant.
void validate(const ImageTile& tile);
void validate(const SemanticMask& mask);
void validate(const BinaryChangeMask& mask);
void validate(const ImageTile& tile, const SemanticMask& mask);
void validate(const SemanticMask& a, const SemanticMask& b);
void validate(const PseudoPair& pair);
void validate(const PredictionBundle& bundle);

}  // namespace starcd
