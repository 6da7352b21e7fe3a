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

#include "starcd/model/change_star.hpp"

#include <cmath>
#include <cstring>

#include "starcd/kernels/kernels.hpp"

namespace starcd::model {

void ModelConfig::validate() const {
  check(num_classes >= 2, ErrorKind::config, "num_classes must be at least 2");
  check(backbone.in_channels >= 1, ErrorKind::config, "in_channels must be positive");
  head.validate();
}

namespace {
constexpr std::uint64_t kBackboneStream = 1;
constexpr std::uint64_t kHeadStream = 2;
constexpr std::uint64_t kSemanticStream = 3;
}  // namespace

template <typename T>
ChangeStar<T>::ChangeStar(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.validate();
  if (!cfg_.backbone.name.empty()) {
    Rng rng = Rng(seed_).derive(kBackboneStream);
    attach_backbone(BackboneRegistry<T>::instance().create(cfg_.backbone, rng));
  } else {
    Rng head_rng = Rng(seed_).derive(kHeadStream);
    head_ = std::make_unique<heads::ChangeMixin<T>>(cfg_.head, head_rng);
    Rng sem_rng = Rng(seed_).derive(kSemanticStream);
    semantic_classifier_ = nn::Conv2d<T>(cfg_.head.in_channels, cfg_.semantic_channels(), 1, 1, true);
    semantic_classifier_.init(sem_rng);
  }
}

template <typename T>
void ChangeStar<T>::attach_backbone(std::unique_ptr<Backbone<T>> backbone) {
  check(backbone != nullptr, ErrorKind::missing_input, "null backbone");
  if (head_) {
    check(backbone->out_channels() == cfg_.head.in_channels &&
              backbone->output_stride() == cfg_.head.upsample_scale,
          ErrorKind::shape_mismatch, "backbone output does not match the existing heads");
  } else {
    cfg_.head.in_channels = backbone->out_channels();
    cfg_.head.upsample_scale = backbone->output_stride();
    Rng head_rng = Rng(seed_).derive(kHeadStream);
    head_ = std::make_unique<heads::ChangeMixin<T>>(cfg_.head, head_rng);
    Rng sem_rng = Rng(seed_).derive(kSemanticStream);
    semantic_classifier_ = nn::Conv2d<T>(cfg_.head.in_channels, cfg_.semantic_channels(), 1, 1, true);
    semantic_classifier_.init(sem_rng);
  }
  cfg_.backbone.name = backbone->name();
  backbone_ = std::move(backbone);
}

template <typename T>
Backbone<T>& ChangeStar<T>::backbone() {
  check(backbone_ != nullptr, ErrorKind::missing_input, "no backbone attached");
  return *backbone_;
}

template <typename T>
heads::ChangeMixin<T>& ChangeStar<T>::head() {
  return *head_;
}

template <typename T>
Tensor<T> ChangeStar<T>::classify(const Tensor<T>& features) const {
  return kernels::upsample_bilinear(semantic_classifier_.forward(features), cfg_.head.upsample_scale);
}

template <typename T>
PredictionTensors<T> ChangeStar<T>::forward(const Tensor<T>& a, const Tensor<T>& b, Mode mode, Cache* cache) {
  require_same_shape(a.shape(), b.shape(), "image pair");
  Backbone<T>& bb = backbone();
  Tensor<T> fa = bb.forward(a, mode, cache ? &cache->backbone_a : nullptr);
  Tensor<T> fb = bb.forward(b, mode, cache ? &cache->backbone_b : nullptr);
  PredictionTensors<T> out;
  out.semantic_a = classify(fa);
  out.semantic_b = classify(fb);
  auto change = head_->forward(fa, fb, mode, cache ? &cache->head : nullptr);
  out.change_fwd = std::move(change.fwd);
  out.change_rev = std::move(change.rev);
  if (cache) {
    cache->features_a = std::move(fa);
    cache->features_b = std::move(fb);
  }
  return out;
}

template <typename T>
void ChangeStar<T>::backward(const PredictionGrads<T>& grads, const Cache& cache) {
  const int s = cfg_.head.upsample_scale;
  auto [ga, gb] = head_->backward(grads.change_fwd, grads.change_rev ? &*grads.change_rev : nullptr, cache.head);
  nn::add_inplace(ga, semantic_classifier_.backward(kernels::upsample_bilinear_backward(grads.semantic_a, s),
                                                    cache.features_a));
  nn::add_inplace(gb, semantic_classifier_.backward(kernels::upsample_bilinear_backward(grads.semantic_b, s),
                                                    cache.features_b));
  Backbone<T>& bb = backbone();
  bb.backward(ga, *cache.backbone_a);
  bb.backward(gb, *cache.backbone_b);
}

template <typename T>
Tensor<T> ChangeStar<T>::features(const Tensor<T>& x, Mode mode) {
  return backbone().forward(x, mode, nullptr);
}

template <typename T>
Tensor<T> ChangeStar<T>::segment(const Tensor<T>& x, Mode mode) {
  return classify(features(x, mode));
}

template <typename T>
LabelTensor ChangeStar<T>::class_map(const Tensor<T>& logits, double threshold) const {
  const Shape& s = logits.shape();
  LabelTensor out(Shape{s.n, 1, s.h, s.w});
  if (cfg_.binary()) {
    check(threshold > 0.0 && threshold < 1.0, ErrorKind::invalid_argument, "threshold must lie in (0, 1)");
    const double cut = std::log(threshold / (1.0 - threshold));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(logits[i]) > cut ? 1 : 0;
    return out;
  }
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        int best = 0;
        for (int c = 1; c < s.c; ++c)
          if (logits.at(n, c, y, x) > logits.at(n, best, y, x)) best = c;
        out.at(n, 0, y, x) = best;
      }
  return out;
}

template <typename T>
LabelTensor ChangeStar<T>::dpcc(const Tensor<T>& a, const Tensor<T>& b, double threshold) {
  check(threshold > 0.0 && threshold < 1.0, ErrorKind::invalid_argument, "threshold must lie in (0, 1)");
  require_same_shape(a.shape(), b.shape(), "image pair");
  const LabelTensor ca = class_map(segment(a, Mode::infer), threshold);
  const LabelTensor cb = class_map(segment(b, Mode::infer), threshold);
  LabelTensor out(ca.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ca[i] != cb[i] ? 1 : 0;
  return out;
}

template <typename T>
LabelTensor ChangeStar<T>::change_map(const Tensor<T>& a, const Tensor<T>& b, double threshold) {
  check(threshold > 0.0 && threshold < 1.0, ErrorKind::invalid_argument, "threshold must lie in (0, 1)");
  const auto out = forward(a, b, Mode::infer, nullptr);
  const double cut = std::log(threshold / (1.0 - threshold));
  LabelTensor change(out.change_fwd.shape());
  for (std::size_t i = 0; i < change.size(); ++i) change[i] = static_cast<double>(out.change_fwd[i]) > cut ? 1 : 0;
  return change;
}

template <typename T>
PredictionBundle ChangeStar<T>::forward_pair(const ImageTile& a, const ImageTile& b, Mode mode) {
  auto out = forward(to_batch<T>(a), to_batch<T>(b), mode, nullptr);
  std::optional<Tensor<float>> rev;
  if (out.change_rev) rev = out.change_rev->template cast<float>();
  return PredictionBundle(out.semantic_a.template cast<float>(), out.semantic_b.template cast<float>(),
                          out.change_fwd.template cast<float>(), std::move(rev));
}

template <typename T>
BinaryChangeMask ChangeStar<T>::dpcc_predict(const ImageTile& a, const ImageTile& b, double threshold) {
  const LabelTensor m = dpcc(to_batch<T>(a), to_batch<T>(b), threshold);
  return BinaryChangeMask(m.h(), m.w(), m.vec());
}

template <typename T>
SemanticChangeReadout ChangeStar<T>::predict_semantic_change(const ImageTile& a, const ImageTile& b) {
  check(!cfg_.binary(), ErrorKind::invalid_argument, "semantic change readout needs a multi-class model");
  const Tensor<T> ta = to_batch<T>(a);
  const Tensor<T> tb = to_batch<T>(b);
  const auto out = forward(ta, tb, Mode::infer, nullptr);
  const LabelTensor ca = class_map(out.semantic_a);
  const LabelTensor cb = class_map(out.semantic_b);
  std::vector<int> change(out.change_fwd.size());
  for (std::size_t i = 0; i < change.size(); ++i) change[i] = out.change_fwd[i] > T(0) ? 1 : 0;
  const int h = ca.h(), w = ca.w();
  return SemanticChangeReadout{SemanticMask(h, w, cfg_.num_classes, ca.vec()),
                               SemanticMask(h, w, cfg_.num_classes, cb.vec()),
                               BinaryChangeMask(h, w, std::move(change))};
}

template <typename T>
void ChangeStar<T>::visit(const nn::StateVisitor<T>& v) {
  backbone().visit("backbone", v);
  semantic_classifier_.visit("semantic_classifier", v);
  head_->visit("change_head", v);
}

template <typename T>
void ChangeStar<T>::zero_grad() {
  visit({[](const std::string&, nn::Parameter<T>& p) { p.zero_grad(); }, {}});
}

template <typename T>
std::size_t ChangeStar<T>::parameter_count() {
  std::size_t count = 0;
  visit({[&](const std::string&, nn::Parameter<T>& p) { count += p.value.size(); }, {}});
  return count;
}

template <typename T>
std::size_t ChangeStar<T>::head_parameter_count() {
  std::size_t count = 0;
  head_->visit("change_head", {[&](const std::string&, nn::Parameter<T>& p) { count += p.value.size(); }, {}});
  return count;
}

template <typename T>
Tensor<T> to_batch(const std::vector<const ImageTile*>& tiles) {
  check(!tiles.empty(), ErrorKind::empty_batch, "no tiles to batch");
  const ImageTile& first = *tiles.front();
  Tensor<T> out(Shape{static_cast<int>(tiles.size()), first.channels(), first.height(), first.width()});
  const std::size_t per = first.data().size();
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const ImageTile& t = *tiles[i];
    check(t.channels() == first.channels() && t.height() == first.height() && t.width() == first.width(),
          ErrorKind::shape_mismatch, "tiles in a batch must share their shape");
    T* dst = out.data() + i * per;
    for (std::size_t k = 0; k < per; ++k) dst[k] = static_cast<T>(t.data()[k]);
  }
  return out;
}

template <typename T>
Tensor<T> to_batch(const ImageTile& tile) {
  return to_batch<T>(std::vector<const ImageTile*>{&tile});
}

namespace {
template <typename Mask>
LabelTensor label_batch(const std::vector<const Mask*>& masks, std::span<const int> (Mask::*cells)() const) {
  check(!masks.empty(), ErrorKind::empty_batch, "no masks to batch");
  const int h = masks.front()->height(), w = masks.front()->width();
  LabelTensor out(Shape{static_cast<int>(masks.size()), 1, h, w});
  const std::size_t per = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    check(masks[i]->height() == h && masks[i]->width() == w, ErrorKind::shape_mismatch,
          "masks in a batch must share their shape");
    const auto src = (masks[i]->*cells)();
    std::memcpy(out.data() + i * per, src.data(), per * sizeof(int));
  }
  return out;
}
}  // namespace

LabelTensor to_label_batch(const std::vector<const SemanticMask*>& masks) {
  return label_batch(masks, &SemanticMask::labels);
}

LabelTensor to_label_batch(const std::vector<const BinaryChangeMask*>& masks) {
  return label_batch(masks, &BinaryChangeMask::values);
}

template class ChangeStar<float>;
template class ChangeStar<double>;
template Tensor<float> to_batch<float>(const std::vector<const ImageTile*>&);
template Tensor<double> to_batch<double>(const std::vector<const ImageTile*>&);
template Tensor<float> to_batch<float>(const ImageTile&);
template Tensor<double> to_batch<double>(const ImageTile&);

}  // namespace starcd::model
