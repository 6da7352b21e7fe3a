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

#include "starcd/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "starcd/kernels/kernels.hpp"

namespace starcd::metrics {

ConfusionMatrix::ConfusionMatrix(int k) : k_(k), counts_(static_cast<std::size_t>(k) * k, 0) {
  check(k >= 1, ErrorKind::invalid_argument, "confusion matrix needs k >= 1");
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::row_sum(int ref) const {
  std::int64_t s = 0;
  for (int p = 0; p < k_; ++p) s += at(ref, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int pred) const {
  std::int64_t s = 0;
  for (int r = 0; r < k_; ++r) s += at(r, pred);
  return s;
}

void ConfusionMatrix::accumulate(std::span<const int> reference, std::span<const int> prediction,
                                 int ignore_value) {
  const auto counts = kernels::confusion_counts(reference, prediction, k_, ignore_value);
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += counts[i];
}

void ConfusionMatrix::accumulate(const BinaryChangeMask& reference, const BinaryChangeMask& prediction) {
  check(k_ == 2, ErrorKind::invalid_argument, "binary masks need a 2 x 2 matrix");
  check(reference.height() == prediction.height() && reference.width() == prediction.width(),
        ErrorKind::shape_mismatch, "change masks differ in shape");
  accumulate(reference.values(), prediction.values(), reference.ignore_value());
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  check(other.k_ == k_, ErrorKind::shape_mismatch, "cannot merge matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

namespace {
double ratio(double num, double den, bool& degenerate) {
  if (den <= 0.0) {
    degenerate = true;
    return 0.0;
  }
  return num / den;
}
}  // namespace

BinaryScores binary_scores(const ConfusionMatrix& cm) {
  check(cm.k() == 2, ErrorKind::invalid_argument, "binary scores need a 2 x 2 matrix");
  const double tp = static_cast<double>(cm.at(1, 1));
  const double fp = static_cast<double>(cm.at(0, 1));
  const double fn = static_cast<double>(cm.at(1, 0));
  BinaryScores s;
  s.iou = ratio(tp, tp + fp + fn, s.degenerate);
  s.precision = ratio(tp, tp + fp, s.degenerate);
  s.recall = ratio(tp, tp + fn, s.degenerate);
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall, s.degenerate);
  return s;
}

double cohen_kappa(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n == 0.0) return 0.0;
  double diag = 0.0, chance = 0.0;
  for (int i = 0; i < cm.k(); ++i) {
    diag += static_cast<double>(cm.at(i, i));
    chance += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i));
  }
  const double po = diag / n;
  const double pe = chance / (n * n);
  if (pe == 1.0) return 0.0;
  return (po - pe) / (1.0 - pe);
}

std::vector<double> class_iou(const ConfusionMatrix& cm) {
  std::vector<double> iou(cm.k(), 0.0);
  for (int c = 0; c < cm.k(); ++c) {
    const double inter = static_cast<double>(cm.at(c, c));
    const double uni = static_cast<double>(cm.row_sum(c) + cm.col_sum(c)) - inter;
    iou[c] = uni > 0 ? inter / uni : 0.0;
  }
  return iou;
}

SecondScores second_scores(const ConfusionMatrix& cm_semantic_change, const ConfusionMatrix& cm_binary) {
  check(cm_binary.k() == 2, ErrorKind::invalid_argument, "second_scores needs a 2 x 2 binary matrix");
  check(cm_semantic_change.total() > 0 && cm_binary.total() > 0, ErrorKind::empty_batch,
        "no scored cells in the evaluation set");
  SecondScores s;
  s.kappa = cohen_kappa(cm_semantic_change);
  ConfusionMatrix n0 = cm_semantic_change;
  n0.at(0, 0) = 0;
  const double kappa_n0 = cohen_kappa(n0);
  const auto iou = class_iou(cm_binary);
  s.iou_change = iou[1];
  s.miou = 0.5 * (iou[0] + iou[1]);
  s.sek = kappa_n0 * std::exp(s.iou_change - 1.0);
  s.overall = 0.3 * s.miou + 0.7 * s.sek;
  // No detected or no reference change leaves SeK without support.
  s.degenerate = cm_binary.col_sum(1) == 0 || cm_binary.row_sum(1) == 0 || n0.total() == 0;
  return s;
}

void accumulate_semantic_change(ConfusionMatrix& cm_semantic_change, ConfusionMatrix& cm_binary,
                                const SemanticMask& ref_a, const SemanticMask& ref_b,
                                const BinaryChangeMask& ref_change, const SemanticMask& pred_a,
                                const SemanticMask& pred_b, const BinaryChangeMask& pred_change) {
  validate(ref_a, ref_b);
  validate(ref_a, pred_a);
  validate(ref_a, pred_b);
  const int k = ref_a.num_classes();
  check(cm_semantic_change.k() == 1 + k * k, ErrorKind::shape_mismatch,
        "semantic change matrix must be (1 + K^2) square");
  const std::size_t cells = ref_a.labels().size();
  check(ref_change.values().size() == cells && pred_change.values().size() == cells, ErrorKind::shape_mismatch,
        "change masks differ in shape");
  const int ignore = ref_a.ignore_value();
  std::vector<int> ref(cells), pred(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const bool ref_skip = ref_change.values()[i] == ref_change.ignore_value() || ref_a.labels()[i] == ignore ||
                          ref_b.labels()[i] == ignore;
    ref[i] = ref_skip ? -1 : semantic_change_code(ref_change.values()[i] == 1, ref_a.labels()[i],
                                                  ref_b.labels()[i], k);
    pred[i] = semantic_change_code(pred_change.values()[i] == 1, pred_a.labels()[i], pred_b.labels()[i], k);
  }
  cm_semantic_change.accumulate(ref, pred, -1);
  std::vector<int> ref_bin(cells), pred_bin(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    ref_bin[i] = ref[i] < 0 ? -1 : (ref[i] > 0 ? 1 : 0);
    pred_bin[i] = pred[i] > 0 ? 1 : 0;
  }
  cm_binary.accumulate(ref_bin, pred_bin, -1);
}

double F1BinaryChangeRule::score(const ConfusionMatrix& cm_binary) const { return binary_scores(cm_binary).f1; }

double MeanIouSemanticChangeRule::score(const ConfusionMatrix& cm, std::vector<double>& per_class) const {
  per_class = class_iou(cm);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < cm.k(); ++c) {
    if (cm.row_sum(c) + cm.col_sum(c) == 0) continue;
    sum += per_class[c];
    ++present;
  }
  return present > 0 ? sum / present : 0.0;
}

TimeSeriesScores dynamicearthnet_scores(const std::vector<Frame>& series, const BinaryChangeRule& bc_rule,
                                        const SemanticChangeRule& sc_rule) {
  check(series.size() >= 2, ErrorKind::invalid_argument, "time series needs at least two frames");
  const SemanticMask& first = series.front().reference;
  const int k = first.num_classes();
  const int ignore = first.ignore_value();
  for (const auto& f : series) {
    validate(first, f.reference);
    validate(first, f.prediction);
  }
  ConfusionMatrix cm_bin(2), cm_sc(k), cm_seg(k);
  for (const auto& f : series) cm_seg.accumulate(f.reference.labels(), f.prediction.labels(), ignore);
  const std::size_t cells = first.labels().size();
  for (std::size_t t = 0; t + 1 < series.size(); ++t) {
    const auto r0 = series[t].reference.labels(), r1 = series[t + 1].reference.labels();
    const auto p0 = series[t].prediction.labels(), p1 = series[t + 1].prediction.labels();
    std::vector<int> ref_change(cells), pred_change(cells), ref_cls(cells), pred_cls(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      const bool skip = r0[i] == ignore || r1[i] == ignore;
      const bool rc = r0[i] != r1[i];
      const bool pc = p0[i] != p1[i];
      ref_change[i] = skip ? -1 : (rc ? 1 : 0);
      pred_change[i] = pc ? 1 : 0;
      const bool involved = !skip && (rc || pc);
      ref_cls[i] = involved ? r1[i] : -1;
      pred_cls[i] = p1[i];
    }
    cm_bin.accumulate(ref_change, pred_change, -1);
    cm_sc.accumulate(ref_cls, pred_cls, -1);
  }
  TimeSeriesScores out;
  out.frame_pairs = static_cast<int>(series.size() - 1);
  out.bc = bc_rule.score(cm_bin);
  out.sc = sc_rule.score(cm_sc, out.per_class_sc);
  out.scs = 0.5 * (out.bc + out.sc);
  out.per_class_iou = class_iou(cm_seg);
  return out;
}

std::size_t ErrorMap::count(ErrorCategory c) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c));
}

ErrorMap error_map(const BinaryChangeMask& prediction, const BinaryChangeMask& reference) {
  check(prediction.height() == reference.height() && prediction.width() == reference.width(),
        ErrorKind::shape_mismatch, "error map inputs differ in shape");
  ErrorMap m{prediction.height(), prediction.width(), {}};
  m.cells.resize(prediction.values().size());
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    const int p = prediction.values()[i];
    const int r = reference.values()[i];
    if (r == reference.ignore_value() || p == prediction.ignore_value()) {
      m.cells[i] = ErrorCategory::ignore;
    } else if (p == 1) {
      m.cells[i] = r == 1 ? ErrorCategory::tp : ErrorCategory::fp;
    } else {
      m.cells[i] = r == 1 ? ErrorCategory::fn : ErrorCategory::tn;
    }
  }
  return m;
}

const std::vector<PaletteEntry>& error_palette() {
  static const std::vector<PaletteEntry> palette = {
      {0, 0, 0, 0},        // TN
      {0, 200, 0, 255},    // TP
      {220, 0, 0, 255},    // FP
      {0, 80, 255, 255},   // FN
      {128, 128, 128, 0},  // ignore
  };
  return palette;
}

}  // namespace starcd::metrics
