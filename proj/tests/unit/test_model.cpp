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

#include <doctest.h>

#include "starcd/model/change_star.hpp"
#include "support.hpp"

using namespace starcd;
using namespace starcd::model;
using starcd::testing::error_kind_of;
using starcd::testing::numeric_gradient;
using starcd::testing::random_tensor;
using starcd::testing::random_tile;
using starcd::testing::relative_error;

namespace {

ModelConfig small_model(int k = 2, bool tdn = true) {
  ModelConfig c;
  c.num_classes = k;
  c.backbone.width = 2;
  c.head.n_conv_layers = 2;
  c.head.conv_channels = 4;
  c.head.use_tdn = tdn;
  return c;
}

}  // namespace

TEST_CASE("output shapes and arity") {
  for (int k : {2, 4}) {
    ChangeStar<float> net(small_model(k), 1);
    Rng rng(1);
    const auto a = random_tensor<float>({2, 3, 16, 16}, rng, 0, 1);
    const auto b = random_tensor<float>({2, 3, 16, 16}, rng, 0, 1);
    const auto train = net.forward(a, b, Mode::train, nullptr);
    CHECK(train.semantic_a.shape() == Shape{2, k == 2 ? 1 : k, 16, 16});
    CHECK(train.semantic_b.shape() == train.semantic_a.shape());
    CHECK(train.change_fwd.shape() == Shape{2, 1, 16, 16});
    CHECK(train.change_rev.has_value());
    CHECK_FALSE(net.forward(a, b, Mode::infer, nullptr).change_rev.has_value());

    const auto bundle = net.forward_pair(random_tile(3, 8, 8, rng), random_tile(3, 8, 8, rng), Mode::train);
    CHECK(bundle.has_reverse());
    CHECK(bundle.change_logits_fwd().shape() == Shape{1, 1, 8, 8});
  }
}

TEST_CASE("backbone contract") {
  Rng rng(2);
  TinyBackbone<float> bb(3, 4, rng);
  CHECK(bb.output_stride() == 4);
  CHECK(bb.out_channels() == 8);
  const auto f = bb.forward(random_tensor<float>({1, 3, 16, 24}, rng), Mode::infer, nullptr);
  CHECK(f.shape() == Shape{1, 8, 4, 6});
  CHECK(error_kind_of([&] { bb.check_input({1, 3, 12, 16}); }) == ErrorKind::shape_mismatch);
  CHECK(error_kind_of([&] { bb.check_input({1, 1, 16, 16}); }) == ErrorKind::shape_mismatch);
}

TEST_CASE("same seed builds the same model") {
  ChangeStar<float> a(small_model(), 7), b(small_model(), 7), c(small_model(), 8);
  Rng rng(3);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto y = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  CHECK(a.forward(x, y, Mode::infer, nullptr).change_fwd.vec() == b.forward(x, y, Mode::infer, nullptr).change_fwd.vec());
  CHECK(a.forward(x, y, Mode::infer, nullptr).change_fwd.vec() != c.forward(x, y, Mode::infer, nullptr).change_fwd.vec());
}

TEST_CASE("siamese weight sharing") {
  ChangeStar<float> net(small_model(3), 4);
  Rng rng(4);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto y = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto xy = net.forward(x, y, Mode::infer, nullptr);
  const auto yx = net.forward(y, x, Mode::infer, nullptr);
  CHECK(xy.semantic_a.vec() == yx.semantic_b.vec());
  CHECK(xy.semantic_b.vec() == yx.semantic_a.vec());
  CHECK(net.segment(x, Mode::infer).vec() == xy.semantic_a.vec());
}

TEST_CASE("inference is deterministic") {
  ChangeStar<float> net(small_model(), 5);
  Rng rng(5);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto y = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto p = net.forward(x, y, Mode::infer, nullptr);
  const auto q = net.forward(x, y, Mode::infer, nullptr);
  CHECK(p.change_fwd.vec() == q.change_fwd.vec());
  CHECK(p.semantic_a.vec() == q.semantic_a.vec());
}

TEST_CASE("dpcc") {
  ChangeStar<float> net(small_model(), 6);
  Rng rng(6);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto y = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  const auto same = net.dpcc(x, x);
  for (int v : same.vec()) CHECK(v == 0);
  CHECK(net.dpcc(x, y).vec() == net.dpcc(y, x).vec());
  CHECK(error_kind_of([&] { net.dpcc(x, y, 0.0); }) == ErrorKind::invalid_argument);
  CHECK(error_kind_of([&] { net.dpcc(x, y, 1.0); }) == ErrorKind::invalid_argument);

  const auto ta = random_tile(3, 8, 8, rng), tb = random_tile(3, 8, 8, rng);
  CHECK(net.dpcc_predict(ta, ta).count(1) == 0);
  CHECK(net.dpcc_predict(ta, tb) == net.dpcc_predict(tb, ta));

  // DPCC is the inequality of the two class maps.
  const auto ca = net.class_map(net.segment(x, Mode::infer));
  const auto cb = net.class_map(net.segment(y, Mode::infer));
  const auto d = net.dpcc(x, y);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == (ca[i] != cb[i] ? 1 : 0));
}

TEST_CASE("class maps") {
  ChangeStar<float> bin(small_model(2), 1);
  Tensor<float> logits({1, 1, 1, 3}, std::vector<float>{-1.0f, 0.5f, 2.0f});
  CHECK(bin.class_map(logits).vec() == std::vector<int>{0, 1, 1});
  CHECK(bin.class_map(logits, 0.8).vec() == std::vector<int>{0, 0, 1});
  ChangeStar<float> multi(small_model(3), 1);
  Tensor<float> l3({1, 3, 1, 2}, std::vector<float>{0.1f, 3.0f, 2.0f, -1.0f, 0.5f, 0.0f});
  // Channel-major: pixel 0 sees (0.1, 2.0, 0.5), pixel 1 sees (3.0, -1.0, 0.0).
  CHECK(multi.class_map(l3).vec() == std::vector<int>{1, 0});
}

TEST_CASE("semantic change readout") {
  Rng rng(7);
  const auto a = random_tile(3, 8, 8, rng), b = random_tile(3, 8, 8, rng);
  ChangeStar<float> bin(small_model(2), 1);
  CHECK(error_kind_of([&] { bin.predict_semantic_change(a, b); }) == ErrorKind::invalid_argument);

  ChangeStar<float> net(small_model(4), 1);
  const auto r = net.predict_semantic_change(a, b);
  CHECK(r.class_a.num_classes() == 4);
  CHECK(r.class_a.height() == 8);
  const auto bundle = net.forward_pair(a, b, Mode::infer);
  for (std::size_t i = 0; i < r.change.values().size(); ++i)
    CHECK(r.change.values()[i] == (bundle.change_logits_fwd()[i] > 0 ? 1 : 0));
  CHECK(r.class_a.labels()[0] == net.class_map(bundle.semantic_logits_a())[0]);
}

TEST_CASE("head parameter count is resolution independent") {
  ChangeStar<float> net(small_model(), 2);
  const auto n = net.head_parameter_count();
  Rng rng(8);
  for (int e : {8, 16, 32}) {
    const auto x = random_tensor<float>({2, 3, e, e}, rng, 0, 1);
    net.forward(x, x, Mode::train, nullptr);
    CHECK(net.head_parameter_count() == n);
  }
  CHECK(n < net.parameter_count());
}

TEST_CASE("backbone registry") {
  auto& reg = BackboneRegistry<float>::instance();
  CHECK(reg.contains("tiny"));
  Rng rng(9);
  BackboneConfig bad;
  bad.name = "resnet-unavailable";
  CHECK(error_kind_of([&] { reg.create(bad, rng); }) == ErrorKind::config);
  reg.add("tiny-wide", [](const BackboneConfig& c, Rng& r) {
    return std::make_unique<TinyBackbone<float>>(c.in_channels, c.width * 2, r);
  });
  auto cfg = small_model();
  cfg.backbone.name = "tiny-wide";
  ChangeStar<float> net(cfg, 1);
  const auto x = random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  CHECK(net.forward(x, x, Mode::infer, nullptr).change_fwd.shape() == Shape{2, 1, 8, 8});

  auto detached = small_model();
  detached.backbone.name = "";
  ChangeStar<float> empty(detached, 1);
  CHECK_FALSE(empty.has_backbone());
  CHECK_THROWS_AS(empty.forward(x, x, Mode::infer, nullptr), Error);
}

TEST_CASE("batch packing") {
  Rng rng(10);
  const auto a = random_tile(3, 4, 4, rng), b = random_tile(3, 4, 4, rng);
  const auto t = to_batch<float>({&a, &b});
  CHECK(t.shape() == Shape{2, 3, 4, 4});
  CHECK(t.at(1, 2, 3, 1) == b.at(2, 3, 1));
  const auto small = random_tile(3, 2, 2, rng);
  CHECK(error_kind_of([&] { to_batch<float>({&a, &small}); }) == ErrorKind::shape_mismatch);
  const SemanticMask m(1, 2, 3, {2, kIgnoreValue});
  CHECK(to_label_batch({&m}).vec() == std::vector<int>{2, kIgnoreValue});
}

TEST_CASE("full model gradients") {
  for (int k : {2, 3}) {
    auto cfg = small_model(k);
    ChangeStar<double> net(cfg, 3);
    Rng rng(11);
    auto a = random_tensor<double>({2, 3, 8, 8}, rng, 0, 1);
    auto b = random_tensor<double>({2, 3, 8, 8}, rng, 0, 1);
    typename ChangeStar<double>::Cache cache;
    const auto out = net.forward(a, b, Mode::train, &cache);
    const auto wa = random_tensor<double>(out.semantic_a.shape(), rng);
    const auto wb = random_tensor<double>(out.semantic_b.shape(), rng);
    const auto wf = random_tensor<double>(out.change_fwd.shape(), rng);
    const auto wr = random_tensor<double>(out.change_fwd.shape(), rng);
    net.zero_grad();
    net.backward({wa, wb, wf, wr}, cache);
    auto f = [&] {
      const auto o = net.forward(a, b, Mode::train, nullptr);
      double s = 0;
      for (std::size_t i = 0; i < o.semantic_a.size(); ++i) s += o.semantic_a[i] * wa[i] + o.semantic_b[i] * wb[i];
      for (std::size_t i = 0; i < o.change_fwd.size(); ++i) s += o.change_fwd[i] * wf[i] + (*o.change_rev)[i] * wr[i];
      return s;
    };
    int checked = 0;
    net.visit({[&](const std::string& name, nn::Parameter<double>& p) {
                 if (p.value.size() > 64 && name.find("classifier") == std::string::npos) return;
                 INFO(name);
                 CHECK(relative_error(p.grad, numeric_gradient(p.value, f)) < 1e-4);
                 ++checked;
               },
               {}});
    CHECK(checked > 5);
  }
}
