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

#include "starcd/model/backbone.hpp"

#include "starcd/kernels/kernels.hpp"

namespace starcd::model {

template <typename T>
struct TinyBackbone<T>::TinyCache final : Backbone<T>::Cache {
  typename nn::ConvBnRelu<T>::Cache stem, down1, down2, down3, fuse;
};

template <typename T>
TinyBackbone<T>::TinyBackbone(int in_channels, int width, Rng& rng)
    : in_channels_(in_channels),
      stem_(in_channels, width, 3, 1),
      down1_(width, 2 * width, 3, 2),
      down2_(2 * width, 2 * width, 3, 2),
      down3_(2 * width, 4 * width, 3, 2),
      fuse_(6 * width, 2 * width, 3, 1) {
  check(in_channels >= 1 && width >= 1, ErrorKind::config, "tiny backbone needs positive channels and width");
  stem_.init(rng);
  down1_.init(rng);
  down2_.init(rng);
  down3_.init(rng);
  fuse_.init(rng);
}

template <typename T>
void TinyBackbone<T>::check_input(const Shape& s) const {
  check(s.c == in_channels_, ErrorKind::shape_mismatch,
        "backbone expects " + std::to_string(in_channels_) + " channels, got " + to_string(s));
  check(s.h % 8 == 0 && s.w % 8 == 0 && s.h >= 8 && s.w >= 8, ErrorKind::shape_mismatch,
        "tiny backbone needs height and width divisible by 8, got " + to_string(s));
}

template <typename T>
Tensor<T> TinyBackbone<T>::forward(const Tensor<T>& x, Mode mode,
                                   std::unique_ptr<typename Backbone<T>::Cache>* cache) {
  check_input(x.shape());
  TinyCache* c = nullptr;
  if (cache) {
    auto owned = std::make_unique<TinyCache>();
    c = owned.get();
    *cache = std::move(owned);
  }
  const Tensor<T> s1 = stem_.forward(x, mode, c ? &c->stem : nullptr);
  const Tensor<T> s2 = down1_.forward(s1, mode, c ? &c->down1 : nullptr);
  const Tensor<T> s4 = down2_.forward(s2, mode, c ? &c->down2 : nullptr);
  const Tensor<T> s8 = down3_.forward(s4, mode, c ? &c->down3 : nullptr);
  const Tensor<T> up = kernels::upsample_bilinear(s8, 2);
  return fuse_.forward(nn::concat_channels(s4, up), mode, c ? &c->fuse : nullptr);
}

template <typename T>
Tensor<T> TinyBackbone<T>::backward(const Tensor<T>& grad_out, const typename Backbone<T>::Cache& cache) {
  const auto& c = dynamic_cast<const TinyCache&>(cache);
  const int skip_channels = down2_.out_channels();
  auto [g_s4, g_up] = nn::split_channels(fuse_.backward(grad_out, c.fuse), skip_channels);
  const Tensor<T> g_s8 = kernels::upsample_bilinear_backward(g_up, 2);
  nn::add_inplace(g_s4, down3_.backward(g_s8, c.down3));
  const Tensor<T> g_s2 = down2_.backward(g_s4, c.down2);
  const Tensor<T> g_s1 = down1_.backward(g_s2, c.down1);
  return stem_.backward(g_s1, c.stem);
}

template <typename T>
void TinyBackbone<T>::visit(const std::string& prefix, const nn::StateVisitor<T>& v) {
  stem_.visit(prefix + ".stem", v);
  down1_.visit(prefix + ".down1", v);
  down2_.visit(prefix + ".down2", v);
  down3_.visit(prefix + ".down3", v);
  fuse_.visit(prefix + ".fuse", v);
}

template <typename T>
BackboneRegistry<T>::BackboneRegistry() {
  add("tiny", [](const BackboneConfig& cfg, Rng& rng) -> std::unique_ptr<Backbone<T>> {
    return std::make_unique<TinyBackbone<T>>(cfg.in_channels, cfg.width, rng);
  });
}

template <typename T>
BackboneRegistry<T>& BackboneRegistry<T>::instance() {
  static BackboneRegistry registry;
  return registry;
}

template <typename T>
void BackboneRegistry<T>::add(const std::string& name, Factory factory) {
  factories_[name] = std::move(factory);
}

template <typename T>
std::vector<std::string> BackboneRegistry<T>::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

template <typename T>
std::unique_ptr<Backbone<T>> BackboneRegistry<T>::create(const BackboneConfig& cfg, Rng& rng) const {
  auto it = factories_.find(cfg.name);
  check(it != factories_.end(), ErrorKind::config, "unknown backbone '" + cfg.name + "'");
  return it->second(cfg, rng);
}

template class TinyBackbone<float>;
template class TinyBackbone<double>;
template class BackboneRegistry<float>;
template class BackboneRegistry<double>;

}  // namespace starcd::model
