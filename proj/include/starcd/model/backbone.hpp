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

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "starcd/core/rng.hpp"
#include "starcd/core/tensor.hpp"
#include "starcd/nn/layers.hpp"

namespace starcd::model {

using nn::Mode;

struct BackboneConfig {
  std::string name = "tiny";
  int in_channels = 3;
  int width = 8;
};

/// Dense feature extractor: N x C_in x H x W -> N x C_out x H/s x W/s.
/// One instance serves both temporal inputs.
template <typename T>
class Backbone {
 public:
  struct Cache {
    virtual ~Cache() = default;
  };

  virtual ~Backbone() = default;

  virtual std::string name() const = 0;
  virtual int out_channels() const = 0;
  virtual int output_stride() const = 0;
  /// Throws shape-mismatch if the input extent is not supported.
  virtual void check_input(const Shape& s) const = 0;

  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, std::unique_ptr<Cache>* cache) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache) = 0;
  virtual void visit(const std::string& prefix, const nn::StateVisitor<T>& v) = 0;
};

/// Encoder with three stride-2 stages (s = 2, 4, 8) and a decoder stage that
/// upsamples the deepest map and fuses it with the stride-4 skip, so the
/// output stride is 4. Output channels = 2 * width.
template <typename T>
class TinyBackbone final : public Backbone<T> {
 public:
  TinyBackbone(int in_channels, int width, Rng& rng);

  std::string name() const override { return "tiny"; }
  int out_channels() const override { return fuse_.out_channels(); }
  int output_stride() const override { return 4; }
  void check_input(const Shape& s) const override;

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::unique_ptr<typename Backbone<T>::Cache>* cache) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const typename Backbone<T>::Cache& cache) override;
  void visit(const std::string& prefix, const nn::StateVisitor<T>& v) override;

 private:
  struct TinyCache;

  int in_channels_;
  nn::ConvBnRelu<T> stem_;
  nn::ConvBnRelu<T> down1_;
  nn::ConvBnRelu<T> down2_;
  nn::ConvBnRelu<T> down3_;
  nn::ConvBnRelu<T> fuse_;
};

/// Name -> factory lookup so other segmentation networks can be plugged in
/// without touching the heads.
template <typename T>
class BackboneRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Backbone<T>>(const BackboneConfig&, Rng&)>;

  static BackboneRegistry& instance();

  void add(const std::string& name, Factory factory);
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }
  std::vector<std::string> names() const;
  /// Throws a config error for unknown names.
  std::unique_ptr<Backbone<T>> create(const BackboneConfig& cfg, Rng& rng) const;

 private:
  BackboneRegistry();
  std::map<std::string, Factory> factories_;
};

}  // namespace starcd::model
