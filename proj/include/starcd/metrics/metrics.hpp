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

// Change detection scores derived from confusion matrices.
//
// Degenerate denominators never produce NaN: the affected score is 0 and the
// result carries degenerate = true.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "starcd/core/types.hpp"

namespace starcd::metrics {

/// K x K counts, rows = reference, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int k);

  int k() const { return k_; }
  std::int64_t at(int ref, int pred) const { return counts_[static_cast<std::size_t>(ref) * k_ + pred]; }
  std::int64_t& at(int ref, int pred) { return counts_[static_cast<std::size_t>(ref) * k_ + pred]; }
  std::int64_t total() const;
  std::int64_t row_sum(int ref) const;
  std::int64_t col_sum(int pred) const;
  std::span<const std::int64_t> counts() const { return counts_; }

  /// Adds co-located cells; cells where either side equals ignore_value are
  /// skipped. Uses the parallel kernel.
  void accumulate(std::span<const int> reference, std::span<const int> prediction, int ignore_value = kIgnoreValue);
  void accumulate(const BinaryChangeMask& reference, const BinaryChangeMask& prediction);
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

struct BinaryScores {
  double iou = 0;
  double f1 = 0;
  double precision = 0;
  double recall = 0;
  bool degenerate = false;
};

/// Scores of the foreground class (index 1) of a 2 x 2 matrix.
BinaryScores binary_scores(const ConfusionMatrix& cm);

/// Cohen's kappa; 0 for an empty matrix or when chance agreement is 1.
double cohen_kappa(const ConfusionMatrix& cm);
/// IoU per class; classes with an empty union get 0.
std::vector<double> class_iou(const ConfusionMatrix& cm);

struct SecondScores {
  double sek = 0;
  double kappa = 0;
  double miou = 0;
  double iou_change = 0;
  double overall = 0;
  bool degenerate = false;
};

/// Index 0 of the semantic-change matrix is "no change"; see
/// semantic_change_code() for the encoding of change cells. cm_binary
/// supplies the change / no-change IoUs.
///
///   kappa   = Cohen's kappa of cm_semantic_change
///   SeK     = kappa(cm with the [0][0] entry zeroed) * exp(IoU_change - 1)
///   mIoU    = (IoU_nochange + IoU_change) / 2
///   overall = 0.3 mIoU + 0.7 SeK
SecondScores second_scores(const ConfusionMatrix& cm_semantic_change, const ConfusionMatrix& cm_binary);

/// 0 for unchanged cells, 1 + from * K + to for changed cells.
inline int semantic_change_code(bool changed, int from, int to, int num_classes) {
  return changed ? 1 + from * num_classes + to : 0;
}

/// Accumulates the (1 + K^2)-class semantic-change matrix and the binary
/// matrix for one pair of per-time class maps with their change masks.
void accumulate_semantic_change(ConfusionMatrix& cm_semantic_change, ConfusionMatrix& cm_binary,
                                const SemanticMask& ref_a, const SemanticMask& ref_b,
                                const BinaryChangeMask& ref_change, const SemanticMask& pred_a,
                                const SemanticMask& pred_b, const BinaryChangeMask& pred_change);

// -- Time-series scoring (binary change / semantic change / their mean) --

/// One frame of a time series: the predicted and reference class maps.
struct Frame {
  SemanticMask prediction;
  SemanticMask reference;
};

/// Scoring rule for the binary-change part, given a matrix accumulated over
/// all adjacent frame pairs (reference change vs predicted change).
class BinaryChangeRule {
 public:
  virtual ~BinaryChangeRule() = default;
  virtual std::string name() const = 0;
  virtual double score(const ConfusionMatrix& cm_binary) const = 0;
};

/// Scoring rule for the semantic part, given the K x K class matrix
/// accumulated on change-involved cells. Fills per-class scores.
class SemanticChangeRule {
 public:
  virtual ~SemanticChangeRule() = default;
  virtual std::string name() const = 0;
  virtual double score(const ConfusionMatrix& cm_classes, std::vector<double>& per_class) const = 0;
};

/// F1 of the change class.
class F1BinaryChangeRule final : public BinaryChangeRule {
 public:
  std::string name() const override { return "f1"; }
  double score(const ConfusionMatrix& cm_binary) const override;
};

/// Mean IoU over classes that occur (non-empty union).
class MeanIouSemanticChangeRule final : public SemanticChangeRule {
 public:
  std::string name() const override { return "miou_on_change"; }
  double score(const ConfusionMatrix& cm_classes, std::vector<double>& per_class) const override;
};

struct TimeSeriesScores {
  double bc = 0;
  double sc = 0;
  double scs = 0;
  std::vector<double> per_class_sc;
  std::vector<double> per_class_iou;
  int frame_pairs = 0;
};

/// Accumulates over every adjacent (t, t+1) frame pair. Change-involved
/// cells are those where the reference or the prediction changes between
/// the two frames; the semantic matrix compares classes at t+1 there.
/// per_class_iou is the plain segmentation IoU over all frames.
TimeSeriesScores dynamicearthnet_scores(const std::vector<Frame>& series,
                                        const BinaryChangeRule& bc_rule = F1BinaryChangeRule{},
                                        const SemanticChangeRule& sc_rule = MeanIouSemanticChangeRule{});

// -- Error maps --

enum class ErrorCategory : std::uint8_t { tn = 0, tp = 1, fp = 2, fn = 3, ignore = 4 };

struct ErrorMap {
  int height = 0;
  int width = 0;
  std::vector<ErrorCategory> cells;

  std::size_t count(ErrorCategory c) const;
};

ErrorMap error_map(const BinaryChangeMask& prediction, const BinaryChangeMask& reference);

/// RGBA palette indexed by ErrorCategory: TN transparent, TP green, FP red,
/// FN blue, ignore transparent gray.
struct PaletteEntry {
  std::uint8_t r, g, b, a;
};
const std::vector<PaletteEntry>& error_palette();

}  // namespace starcd::metrics
