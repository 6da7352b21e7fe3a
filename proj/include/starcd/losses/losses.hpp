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

// Multi-task objective for single-temporal change training.
//
// Every loss takes logits plus integer targets and returns the value with its
// gradient w.r.t. the logits. Cells whose target equals the ignore value
// contribute nothing to either. Sums run in double in a fixed order, so
// values are reproducible bit-for-bit on one platform.

#pragma once

#include <optional>

#include "starcd/core/tensor.hpp"
#include "starcd/core/types.hpp"

namespace starcd::losses {

enum class BinaryChangeLoss { bce, bce_plus_soft_dice };
enum class SemanticLoss { bce_plus_dice, cross_entropy };

struct LossConfig {
  BinaryChangeLoss binary_change_loss = BinaryChangeLoss::bce;
  SemanticLoss semantic_loss = SemanticLoss::bce_plus_dice;
  int ignore_value = kIgnoreValue;
};

/// Smoothing constant of the soft dice loss.
inline constexpr double kDiceSmooth = 1.0;

template <typename T>
struct LossValue {
  T value{};
  Tensor<T> grad;
};

/// Mean binary cross-entropy over non-ignore cells, split into the share
/// contributed by positive and by negative cells (total = positive + negative
/// up to rounding).
template <typename T>
struct BceValue {
  T value{};
  T positive{};
  T negative{};
  Tensor<T> grad;
};

template <typename T>
BceValue<T> bce_with_logits(const Tensor<T>& logits, const LabelTensor& targets, int ignore_value);

/// 1 - (2 sum(p g) + eps) / (sum(p^2) + sum(g^2) + eps) over all non-ignore
/// cells of the batch; grad is w.r.t. the probabilities.
template <typename T>
LossValue<T> dice_loss(const Tensor<T>& probabilities, const LabelTensor& targets, int ignore_value);

/// dice_loss(sigmoid(logits)) with the gradient taken w.r.t. the logits.
template <typename T>
LossValue<T> dice_loss_with_logits(const Tensor<T>& logits, const LabelTensor& targets, int ignore_value);

/// Mean softmax cross-entropy over non-ignore cells; targets are class ids.
template <typename T>
LossValue<T> softmax_cross_entropy(const Tensor<T>& logits, const LabelTensor& targets, int ignore_value);

/// L_binary of the change branch: BCE, or BCE + soft dice when configured.
template <typename T>
BceValue<T> binary_change_loss(const Tensor<T>& logits, const LabelTensor& targets, const LossConfig& cfg);

/// Semantic loss for one temporal branch.
template <typename T>
LossValue<T> semantic_loss(const Tensor<T>& logits, const LabelTensor& mask, const LossConfig& cfg);

template <typename T>
struct SymmetryLoss {
  T value{};
  T fwd{};
  T rev{};
  /// BCE components averaged over both orders (dice excluded).
  T bce{};
  T bce_positive{};
  T bce_negative{};
  Tensor<T> grad_fwd;
  Tensor<T> grad_rev;
};

/// 1/2 [L_binary(fwd, target) + L_binary(rev, target)]. The same target
/// serves both orders because the label assigner is symmetric.
template <typename T>
SymmetryLoss<T> symmetry_change_loss(const Tensor<T>& logits_fwd, const std::optional<Tensor<T>>& logits_rev,
                                     const LabelTensor& change_target, const LossConfig& cfg);

template <typename T>
struct LossBreakdown {
  T total{};
  T seg{};
  T seg_a{};
  T seg_b{};
  T change{};
  T change_fwd{};
  T change_rev{};
  T change_bce{};
  T change_bce_positive{};
  T change_bce_negative{};
  Tensor<T> grad_semantic_a;
  Tensor<T> grad_semantic_b;
  Tensor<T> grad_change_fwd;
  Tensor<T> grad_change_rev;
};

/// L = L_seg + L_change with unit weights; L_seg is the mean of the two
/// temporal branches.
template <typename T>
LossBreakdown<T> total_loss(const PredictionTensors<T>& prediction, const LabelTensor& mask_a,
                            const LabelTensor& mask_b, const LabelTensor& change_target, const LossConfig& cfg);

/// Single-pair form over a PredictionBundle.
LossBreakdown<float> total_loss(const PredictionBundle& bundle, const SemanticMask& mask_a,
                                const SemanticMask& mask_b, const BinaryChangeMask& change_target,
                                const LossConfig& cfg);

}  // namespace starcd::losses
