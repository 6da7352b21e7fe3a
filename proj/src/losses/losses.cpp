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

#include "starcd/losses/losses.hpp"

#include <cmath>
#include <vector>

namespace starcd::losses {

namespace {

void check_targets(const Shape& logits, const Shape& targets, int channels_expected, const char* what) {
  check(targets.c == 1 && targets.n == logits.n && targets.same_spatial(logits), ErrorKind::shape_mismatch,
        std::string(what) + ": logits " + to_string(logits) + " vs targets " + to_string(targets));
  if (channels_expected > 0) {
    check(logits.c == channels_expected, ErrorKind::shape_mismatch,
          std::string(what) + " expects " + std::to_string(channels_expected) + " logit channel(s)");
  }
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

template <typename T>
BceValue<T> bce_with_logits(const Tensor<T>& logits, const LabelTensor& targets, int ignore_value) {
  check_targets(logits.shape(), targets.shape(), 1, "bce");
  BceValue<T> out;
  out.grad = Tensor<T>(logits.shape());
  std::size_t valid = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_value) continue;
    check(targets[i] == 0 || targets[i] == 1, ErrorKind::out_of_range_label, "bce target must be 0 or 1");
    ++valid;
  }
  if (valid == 0) return out;
  const double inv = 1.0 / static_cast<double>(valid);
  double pos = 0.0, neg = 0.0, total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_value) continue;
    const double x = static_cast<double>(logits[i]);
    const double y = static_cast<double>(targets[i]);
    // max(x, 0) - x y + log(1 + exp(-|x|))
    const double l = std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    total += l;
    (targets[i] == 1 ? pos : neg) += l;
    out.grad[i] = static_cast<T>((sigmoid(x) - y) * inv);
  }
  out.value = static_cast<T>(total * inv);
  out.positive = static_cast<T>(pos * inv);
  out.negative = static_cast<T>(neg * inv);
  return out;
}

template <typename T>
LossValue<T> dice_loss(const Tensor<T>& probabilities, const LabelTensor& targets, int ignore_value) {
  check_targets(probabilities.shape(), targets.shape(), 1, "dice");
  LossValue<T> out;
  out.grad = Tensor<T>(probabilities.shape());
  double inter = 0.0, psq = 0.0, gsq = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_value) continue;
    const double p = static_cast<double>(probabilities[i]);
    const double g = targets[i] == 1 ? 1.0 : 0.0;
    inter += p * g;
    psq += p * p;
    gsq += g * g;
  }
  const double num = 2.0 * inter + kDiceSmooth;
  const double den = psq + gsq + kDiceSmooth;
  out.value = static_cast<T>(1.0 - num / den);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_value) continue;
    const double p = static_cast<double>(probabilities[i]);
    const double g = targets[i] == 1 ? 1.0 : 0.0;
    out.grad[i] = static_cast<T>(-(2.0 * g * den - num * 2.0 * p) / (den * den));
  }
  return out;
}

template <typename T>
LossValue<T> dice_loss_with_logits(const Tensor<T>& logits, const LabelTensor& targets, int ignore_value) {
  Tensor<T> probs(logits.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = static_cast<T>(sigmoid(static_cast<double>(logits[i])));
  LossValue<T> out = dice_loss(probs, targets, ignore_value);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = static_cast<double>(probs[i]);
    out.grad[i] = static_cast<T>(static_cast<double>(out.grad[i]) * p * (1.0 - p));
  }
  return out;
}

template <typename T>
LossValue<T> softmax_cross_entropy(const Tensor<T>& logits, const LabelTensor& targets, int ignore_value) {
  check_targets(logits.shape(), targets.shape(), 0, "cross entropy");
  const Shape& s = logits.shape();
  LossValue<T> out;
  out.grad = Tensor<T>(s);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_value) continue;
    check(targets[i] >= 0 && targets[i] < s.c, ErrorKind::out_of_range_label,
          "cross entropy target " + std::to_string(targets[i]) + " outside [0, " + std::to_string(s.c) + ")");
    ++valid;
  }
  if (valid == 0) return out;
  const double inv = 1.0 / static_cast<double>(valid);
  double total = 0.0;
  std::vector<double> e(s.c);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const int t = targets.at(n, 0, y, x);
        if (t == ignore_value) continue;
        double mx = static_cast<double>(logits.at(n, 0, y, x));
        for (int c = 1; c < s.c; ++c) mx = std::max(mx, static_cast<double>(logits.at(n, c, y, x)));
        double z = 0.0;
        for (int c = 0; c < s.c; ++c) {
          e[c] = std::exp(static_cast<double>(logits.at(n, c, y, x)) - mx);
          z += e[c];
        }
        total += std::log(z) + mx - static_cast<double>(logits.at(n, t, y, x));
        for (int c = 0; c < s.c; ++c)
          out.grad.at(n, c, y, x) = static_cast<T>((e[c] / z - (c == t ? 1.0 : 0.0)) * inv);
      }
  out.value = static_cast<T>(total * inv);
  return out;
}

template <typename T>
BceValue<T> binary_change_loss(const Tensor<T>& logits, const LabelTensor& targets, const LossConfig& cfg) {
  BceValue<T> out = bce_with_logits(logits, targets, cfg.ignore_value);
  if (cfg.binary_change_loss == BinaryChangeLoss::bce_plus_soft_dice) {
    const LossValue<T> dice = dice_loss_with_logits(logits, targets, cfg.ignore_value);
    out.value += dice.value;
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += dice.grad[i];
  }
  return out;
}

template <typename T>
LossValue<T> semantic_loss(const Tensor<T>& logits, const LabelTensor& mask, const LossConfig& cfg) {
  if (cfg.semantic_loss == SemanticLoss::cross_entropy) return softmax_cross_entropy(logits, mask, cfg.ignore_value);
  const BceValue<T> bce = bce_with_logits(logits, mask, cfg.ignore_value);
  LossValue<T> out = dice_loss_with_logits(logits, mask, cfg.ignore_value);
  out.value = static_cast<T>(static_cast<double>(bce.value) + static_cast<double>(out.value));
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += bce.grad[i];
  return out;
}

template <typename T>
SymmetryLoss<T> symmetry_change_loss(const Tensor<T>& logits_fwd, const std::optional<Tensor<T>>& logits_rev,
                                     const LabelTensor& change_target, const LossConfig& cfg) {
  check(logits_rev.has_value(), ErrorKind::missing_input,
        "symmetry loss needs reverse-order change logits (training-mode forward)");
  require_same_shape(logits_fwd.shape(), logits_rev->shape(), "symmetry loss logits");
  const BceValue<T> f = binary_change_loss(logits_fwd, change_target, cfg);
  const BceValue<T> r = binary_change_loss(*logits_rev, change_target, cfg);
  const BceValue<T> bf = bce_with_logits(logits_fwd, change_target, cfg.ignore_value);
  const BceValue<T> br = bce_with_logits(*logits_rev, change_target, cfg.ignore_value);
  SymmetryLoss<T> out;
  out.fwd = f.value;
  out.rev = r.value;
  out.value = static_cast<T>(0.5 * (static_cast<double>(f.value) + static_cast<double>(r.value)));
  out.bce = static_cast<T>(0.5 * (static_cast<double>(bf.value) + static_cast<double>(br.value)));
  out.bce_positive = static_cast<T>(0.5 * (static_cast<double>(bf.positive) + static_cast<double>(br.positive)));
  out.bce_negative = static_cast<T>(0.5 * (static_cast<double>(bf.negative) + static_cast<double>(br.negative)));
  out.grad_fwd = f.grad;
  out.grad_rev = r.grad;
  for (auto& g : out.grad_fwd.span()) g *= T(0.5);
  for (auto& g : out.grad_rev.span()) g *= T(0.5);
  return out;
}

template <typename T>
LossBreakdown<T> total_loss(const PredictionTensors<T>& prediction, const LabelTensor& mask_a,
                            const LabelTensor& mask_b, const LabelTensor& change_target, const LossConfig& cfg) {
  const LossValue<T> sa = semantic_loss(prediction.semantic_a, mask_a, cfg);
  const LossValue<T> sb = semantic_loss(prediction.semantic_b, mask_b, cfg);
  const SymmetryLoss<T> ch = symmetry_change_loss(prediction.change_fwd, prediction.change_rev, change_target, cfg);

  LossBreakdown<T> out;
  out.seg_a = sa.value;
  out.seg_b = sb.value;
  out.seg = static_cast<T>(0.5 * (static_cast<double>(sa.value) + static_cast<double>(sb.value)));
  out.change = ch.value;
  out.change_fwd = ch.fwd;
  out.change_rev = ch.rev;
  out.change_bce = ch.bce;
  out.change_bce_positive = ch.bce_positive;
  out.change_bce_negative = ch.bce_negative;
  out.total = out.seg + out.change;
  out.grad_semantic_a = sa.grad;
  out.grad_semantic_b = sb.grad;
  for (auto& g : out.grad_semantic_a.span()) g *= T(0.5);
  for (auto& g : out.grad_semantic_b.span()) g *= T(0.5);
  out.grad_change_fwd = ch.grad_fwd;
  out.grad_change_rev = ch.grad_rev;
  return out;
}

LossBreakdown<float> total_loss(const PredictionBundle& bundle, const SemanticMask& mask_a,
                                const SemanticMask& mask_b, const BinaryChangeMask& change_target,
                                const LossConfig& cfg) {
  auto labels = [](int h, int w, std::span<const int> v) {
    return LabelTensor(Shape{1, 1, h, w}, std::vector<int>(v.begin(), v.end()));
  };
  PredictionTensors<float> p{bundle.semantic_logits_a(), bundle.semantic_logits_b(), bundle.change_logits_fwd(),
                             bundle.change_logits_rev()};
  return total_loss(p, labels(mask_a.height(), mask_a.width(), mask_a.labels()),
                    labels(mask_b.height(), mask_b.width(), mask_b.labels()),
                    labels(change_target.height(), change_target.width(), change_target.values()), cfg);
}

#define STARCD_INSTANTIATE(T)                                                                                   \
  template BceValue<T> bce_with_logits(const Tensor<T>&, const LabelTensor&, int);                              \
  template LossValue<T> dice_loss(const Tensor<T>&, const LabelTensor&, int);                                   \
  template LossValue<T> dice_loss_with_logits(const Tensor<T>&, const LabelTensor&, int);                       \
  template LossValue<T> softmax_cross_entropy(const Tensor<T>&, const LabelTensor&, int);                       \
  template BceValue<T> binary_change_loss(const Tensor<T>&, const LabelTensor&, const LossConfig&);             \
  template LossValue<T> semantic_loss(const Tensor<T>&, const LabelTensor&, const LossConfig&);                 \
  template SymmetryLoss<T> symmetry_change_loss(const Tensor<T>&, const std::optional<Tensor<T>>&,              \
                                                const LabelTensor&, const LossConfig&);                         \
  template LossBreakdown<T> total_loss(const PredictionTensors<T>&, const LabelTensor&, const LabelTensor&,     \
                                       const LabelTensor&, const LossConfig&);

STARCD_INSTANTIATE(float)
STARCD_INSTANTIATE(double)
#undef STARCD_INSTANTIATE

}  // namespace starcd::losses
