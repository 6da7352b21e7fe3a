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

#include "starcd/heads/change_mixin.hpp"

#include <cmath>

#include "starcd/kernels/kernels.hpp"

namespace starcd::heads {

void HeadConfig::validate() const {
  check(n_conv_layers >= 1, ErrorKind::config, "head needs at least one conv layer");
  check(conv_channels >= 1, ErrorKind::config, "head conv_channels must be positive");
  check(in_channels >= 1, ErrorKind::config, "head in_channels must be positive");
  check(upsample_scale >= 1, ErrorKind::config, "head upsample_scale must be positive");
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> temporal_swap(const Tensor<T>& xa, const Tensor<T>& xb) {
  require_same_shape(xa.shape(), xb.shape(), "temporal swap");
  return {nn::concat_channels(xa, xb), nn::concat_channels(xb, xa)};
}

template <typename T>
Tensor<T> temporal_difference(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "temporal difference");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a[i] - b[i]);
  return out;
}

template <typename T>
Tensor<T> aggregate(TemporalAggregation kind, const Tensor<T>& a, const Tensor<T>& b) {
  if (kind == TemporalAggregation::absolute_difference) return temporal_difference(a, b);
  require_same_shape(a.shape(), b.shape(), "hadamard product");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> aggregate_backward(TemporalAggregation kind, const Tensor<T>& grad,
                                                   const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> ga(a.shape()), gb(b.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (kind == TemporalAggregation::absolute_difference) {
      const T d = a[i] - b[i];
      const T sign = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      ga[i] = sign * grad[i];
      gb[i] = -sign * grad[i];
    } else {
      ga[i] = b[i] * grad[i];
      gb[i] = a[i] * grad[i];
    }
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
ChangeMixin<T>::ChangeMixin(HeadConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  for (int i = 0; i < cfg_.n_conv_layers; ++i) {
    const int in = i == 0 ? 2 * cfg_.in_channels : cfg_.conv_channels;
    tsn_.emplace_back(in, cfg_.conv_channels, 3, 1);
    tsn_.back().init(rng);
  }
  classifier_ = nn::Conv2d<T>(cfg_.conv_channels, 1, 1, 1, /*bias=*/true);
  classifier_.init(rng);
  if (cfg_.use_tdn) {
    projector_.emplace(cfg_.in_channels, cfg_.conv_channels, 1, 1);
    projector_->init(rng);
  }
}

template <typename T>
void ChangeMixin<T>::disable_tdn() {
  projector_.reset();
  cfg_.use_tdn = false;
}

template <typename T>
Tensor<T> ChangeMixin<T>::run_tsn(const Tensor<T>& input, Mode mode, std::vector<BlockCache>* caches) {
  if (caches) caches->assign(tsn_.size(), BlockCache{});
  Tensor<T> x = input;
  for (std::size_t i = 0; i < tsn_.size(); ++i) x = tsn_[i].forward(x, mode, caches ? &(*caches)[i] : nullptr);
  return x;
}

template <typename T>
Tensor<T> ChangeMixin<T>::tsn_backward(const Tensor<T>& grad, const std::vector<BlockCache>& caches) {
  Tensor<T> g = grad;
  for (std::size_t i = tsn_.size(); i-- > 0;) g = tsn_[i].backward(g, caches[i]);
  return g;
}

template <typename T>
Tensor<T> ChangeMixin<T>::classify(const Tensor<T>& features) const {
  return kernels::upsample_bilinear(classifier_.forward(features), cfg_.upsample_scale);
}

template <typename T>
Tensor<T> ChangeMixin<T>::classify_backward(const Tensor<T>& grad_logits, const Tensor<T>& features) {
  return classifier_.backward(kernels::upsample_bilinear_backward(grad_logits, cfg_.upsample_scale), features);
}

template <typename T>
ChangeLogits<T> ChangeMixin<T>::forward(const Tensor<T>& xa, const Tensor<T>& xb, Mode mode, Cache* cache) {
  require_same_shape(xa.shape(), xb.shape(), "change head inputs");
  check(xa.c() == cfg_.in_channels, ErrorKind::shape_mismatch,
        "change head expects " + std::to_string(cfg_.in_channels) + " feature channels, got " +
            std::to_string(xa.c()));
  const bool both = mode == Mode::train;
  auto [cat_fwd, cat_rev] = temporal_swap(xa, xb);

  Tensor<T> fused_fwd = run_tsn(cat_fwd, mode, cache ? &cache->tsn_fwd : nullptr);
  Tensor<T> fused_rev;
  if (both) fused_rev = run_tsn(cat_rev, mode, cache ? &cache->tsn_rev : nullptr);

  if (projector_) {
    const Tensor<T> diff = aggregate(cfg_.aggregation, xa, xb);
    const Tensor<T> tdn = projector_->forward(diff, mode, cache ? &cache->projector : nullptr);
    check(tdn.shape() == fused_fwd.shape(), ErrorKind::shape_mismatch,
          "projector output " + to_string(tdn.shape()) + " vs TSN features " + to_string(fused_fwd.shape()));
    nn::add_inplace(fused_fwd, tdn);
    if (both) nn::add_inplace(fused_rev, tdn);
  }

  ChangeLogits<T> out;
  out.fwd = classify(fused_fwd);
  if (both) out.rev = classify(fused_rev);
  if (cache) {
    cache->xa = xa;
    cache->xb = xb;
    cache->has_rev = both;
    cache->used_tdn = projector_.has_value();
    cache->fused_fwd = std::move(fused_fwd);
    if (both) cache->fused_rev = std::move(fused_rev);
  }
  return out;
}

template <typename T>
ChangeLogits<T> ChangeMixin<T>::tsn_forward(const Tensor<T>& xa, const Tensor<T>& xb, Mode mode) {
  require_same_shape(xa.shape(), xb.shape(), "change head inputs");
  check(xa.c() == cfg_.in_channels, ErrorKind::shape_mismatch, "TSN input channel mismatch");
  auto [cat_fwd, cat_rev] = temporal_swap(xa, xb);
  ChangeLogits<T> out;
  out.fwd = classify(run_tsn(cat_fwd, mode, nullptr));
  if (mode == Mode::train) out.rev = classify(run_tsn(cat_rev, mode, nullptr));
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> ChangeMixin<T>::backward(const Tensor<T>& grad_fwd, const Tensor<T>* grad_rev,
                                                         const Cache& cache) {
  check(grad_rev == nullptr || cache.has_rev, ErrorKind::missing_input,
        "reverse gradient given for a forward without the reverse order");
  const int c = cache.xa.c();
  Tensor<T> ga(cache.xa.shape()), gb(cache.xb.shape());

  const Tensor<T> g_fused_fwd = classify_backward(grad_fwd, cache.fused_fwd);
  Tensor<T> g_tdn = g_fused_fwd;
  {
    auto [g1, g2] = nn::split_channels(tsn_backward(g_fused_fwd, cache.tsn_fwd), c);
    nn::add_inplace(ga, g1);
    nn::add_inplace(gb, g2);
  }
  if (grad_rev) {
    const Tensor<T> g_fused_rev = classify_backward(*grad_rev, cache.fused_rev);
    nn::add_inplace(g_tdn, g_fused_rev);
    auto [g1, g2] = nn::split_channels(tsn_backward(g_fused_rev, cache.tsn_rev), c);
    nn::add_inplace(gb, g1);
    nn::add_inplace(ga, g2);
  }
  if (cache.used_tdn) {
    check(projector_.has_value(), ErrorKind::invalid_argument, "TDN was disabled after the forward pass");
    const Tensor<T> g_diff = projector_->backward(g_tdn, cache.projector);
    auto [da, db] = aggregate_backward(cfg_.aggregation, g_diff, cache.xa, cache.xb);
    nn::add_inplace(ga, da);
    nn::add_inplace(gb, db);
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
void ChangeMixin<T>::visit(const std::string& prefix, const nn::StateVisitor<T>& v) {
  for (std::size_t i = 0; i < tsn_.size(); ++i) tsn_[i].visit(prefix + ".tsn." + std::to_string(i), v);
  classifier_.visit(prefix + ".classifier", v);
  if (projector_) projector_->visit(prefix + ".tdn_projector", v);
}

#define STARCD_INSTANTIATE(T)                                                                              \
  template std::pair<Tensor<T>, Tensor<T>> temporal_swap(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> temporal_difference(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> aggregate(TemporalAggregation, const Tensor<T>&, const Tensor<T>&);                   \
  template std::pair<Tensor<T>, Tensor<T>> aggregate_backward(TemporalAggregation, const Tensor<T>&,       \
                                                              const Tensor<T>&, const Tensor<T>&);         \
  template class ChangeMixin<T>;

STARCD_INSTANTIATE(float)
STARCD_INSTANTIATE(double)
#undef STARCD_INSTANTIATE

}  // namespace starcd::heads
