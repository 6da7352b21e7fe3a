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

#include "starcd/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "starcd/data/data.hpp"

namespace starcd::harness {

EvalTask parse_task(const std::string& name) {
  if (name == "binary") return EvalTask::binary;
  if (name == "object") return EvalTask::object;
  if (name == "semantic") return EvalTask::semantic;
  throw Error(ErrorKind::config, "unknown task '" + name + "' (expected binary, object or semantic)");
}

std::string_view to_string(EvalTask t) {
  switch (t) {
    case EvalTask::binary: return "binary";
    case EvalTask::object: return "object";
    case EvalTask::semantic: return "semantic";
  }
  return "?";
}

namespace {

nlohmann::json scores_json(const metrics::BinaryScores& s) {
  return {{"iou", s.iou}, {"f1", s.f1}, {"precision", s.precision}, {"recall", s.recall}, {"degenerate", s.degenerate}};
}

nlohmann::json counts_json(const metrics::ConfusionMatrix& cm) {
  return {{"tn", cm.at(0, 0)}, {"fp", cm.at(0, 1)}, {"fn", cm.at(1, 0)}, {"tp", cm.at(1, 1)}};
}

}  // namespace

nlohmann::json EvalRecord::to_json() const {
  nlohmann::json j = {{"step", step},
                      {"task", std::string(to_string(task))},
                      {"pairs", pairs},
                      {"change", scores_json(change)},
                      {"dpcc", scores_json(dpcc)},
                      {"change_counts", counts_json(cm_change)},
                      {"dpcc_counts", counts_json(cm_dpcc)}};
  if (segmentation) j["segmentation"] = scores_json(*segmentation);
  if (second) {
    j["second"] = {{"sek", second->sek},
                   {"kappa", second->kappa},
                   {"miou", second->miou},
                   {"iou_change", second->iou_change},
                   {"overall", second->overall},
                   {"degenerate", second->degenerate}};
  }
  return j;
}

EvalRecord evaluate(model::ChangeStar<float>& net, const std::vector<PseudoPair>& pairs, const EvalOptions& opt) {
  check(!pairs.empty(), ErrorKind::empty_batch, "evaluation set is empty");
  check(opt.batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be positive");
  check(opt.threshold > 0.0 && opt.threshold < 1.0, ErrorKind::invalid_argument, "threshold must lie in (0, 1)");
  const int k = net.config().num_classes;
  if (opt.task == EvalTask::object)
    check(net.config().binary(), ErrorKind::invalid_argument, "object task needs a two-class model");
  if (opt.task == EvalTask::semantic)
    check(!net.config().binary(), ErrorKind::invalid_argument, "semantic task needs a model with more than two classes");
  for (const auto& p : pairs)
    check(p.mask_a().num_classes() == k, ErrorKind::class_count_mismatch,
          "evaluation masks declare " + std::to_string(p.mask_a().num_classes()) + " classes, model has " +
              std::to_string(k));

  EvalRecord rec;
  rec.task = opt.task;
  rec.pairs = static_cast<int>(pairs.size());
  metrics::ConfusionMatrix cm_seg(2), cm_sc(1 + k * k), cm_bin(2);
  const double cut = std::log(opt.threshold / (1.0 - opt.threshold));

  for (std::size_t start = 0; start < pairs.size(); start += opt.batch_size) {
    const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(opt.batch_size));
    std::vector<const ImageTile*> ia, ib;
    for (std::size_t i = start; i < end; ++i) {
      ia.push_back(&pairs[i].image_a());
      ib.push_back(&pairs[i].image_b());
    }
    const auto out = net.forward(model::to_batch<float>(ia), model::to_batch<float>(ib), nn::Mode::infer, nullptr);
    const LabelTensor ca = net.class_map(out.semantic_a, opt.threshold);
    const LabelTensor cb = net.class_map(out.semantic_b, opt.threshold);
    const int h = ca.h(), w = ca.w();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = start; i < end; ++i) {
      const PseudoPair& p = pairs[i];
      const std::size_t off = (i - start) * plane;
      std::vector<int> change(plane), dpcc(plane), la(plane), lb(plane);
      for (std::size_t c = 0; c < plane; ++c) {
        change[c] = static_cast<double>(out.change_fwd[off + c]) > cut ? 1 : 0;
        la[c] = ca[off + c];
        lb[c] = cb[off + c];
        dpcc[c] = la[c] != lb[c] ? 1 : 0;
      }
      const BinaryChangeMask pred_change(h, w, change);
      rec.cm_change.accumulate(p.change().values(), change, p.change().ignore_value());
      rec.cm_dpcc.accumulate(p.change().values(), dpcc, p.change().ignore_value());
      if (opt.task == EvalTask::object) {
        cm_seg.accumulate(p.mask_a().labels(), la, p.mask_a().ignore_value());
        cm_seg.accumulate(p.mask_b().labels(), lb, p.mask_b().ignore_value());
      }
      if (opt.task == EvalTask::semantic) {
        metrics::accumulate_semantic_change(cm_sc, cm_bin, p.mask_a(), p.mask_b(), p.change(),
                                            SemanticMask(h, w, k, la), SemanticMask(h, w, k, lb), pred_change);
      }
      if (opt.error_map_dir) {
        const std::string id = i < opt.ids.size() ? opt.ids[i] : std::to_string(i);
        data::write_png(*opt.error_map_dir / (id + ".png"), metrics::error_map(pred_change, p.change()));
      }
    }
  }
  rec.change = metrics::binary_scores(rec.cm_change);
  rec.dpcc = metrics::binary_scores(rec.cm_dpcc);
  if (opt.task == EvalTask::object) rec.segmentation = metrics::binary_scores(cm_seg);
  if (opt.task == EvalTask::semantic) rec.second = metrics::second_scores(cm_sc, cm_bin);
  return rec;
}

}  // namespace starcd::harness
