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

#include <cmath>
#include <fstream>

#include "starcd/harness/config.hpp"
#include "support.hpp"

using namespace starcd;
using namespace starcd::harness;
using starcd::testing::error_kind_of;

TEST_CASE("defaults follow the training recipe") {
  const TrainConfig c;
  CHECK(c.base_lr == 0.03);
  CHECK(c.lr_gamma == 0.9);
  CHECK(c.momentum == 0.9);
  CHECK(c.weight_decay == 1e-4);
  CHECK(c.supervision == Supervision::star);
  CHECK(c.pairing.self_contrast_p == 0.9);
  CHECK(c.model.head.n_conv_layers == 4);
  CHECK(c.model.head.conv_channels == 16);
  CHECK(c.model.head.use_tdn);
  CHECK(c.model.head.aggregation == heads::TemporalAggregation::absolute_difference);
  CHECK(c.loss.binary_change_loss == losses::BinaryChangeLoss::bce);
  CHECK(c.augment.scale_min == 0.75);
  CHECK(c.augment.scale_max == 1.25);
  CHECK(c.pairing.jitter.brightness == doctest::Approx(0.3));
  CHECK(c.pairing.jitter.hue_shift == doctest::Approx(0.05));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("poly learning rate") {
  CHECK(poly_lr(0, 1000, 0.03, 0.9) == 0.03);
  CHECK(poly_lr(1000, 1000, 0.03, 0.9) == 0.0);
  CHECK(std::abs(poly_lr(500, 1000, 0.03, 0.9) - 0.03 * std::pow(0.5, 0.9)) < 1e-9);
  double prev = 1.0;
  for (int s = 0; s <= 100; ++s) {
    const double lr = poly_lr(s, 100, 0.03, 0.9);
    CHECK(lr < prev);
    prev = lr;
  }
  CHECK(error_kind_of([] { poly_lr(1001, 1000, 0.03, 0.9); }) == ErrorKind::invalid_argument);
  CHECK(error_kind_of([] { poly_lr(-1, 1000, 0.03, 0.9); }) == ErrorKind::invalid_argument);
}

TEST_CASE("toml round trip") {
  TrainConfig c;
  c.max_steps = 123;
  c.batch_size = 6;
  c.base_lr = 0.0123456789012345;
  c.seed = 987654321012ULL;
  c.supervision = Supervision::bitemporal;
  c.eval_every = 25;
  c.data_root = "/data/x y";
  c.pairing.self_contrast_p = 0.35;
  c.pairing.jitter_strength = pairing::JitterStrength::strong;
  c.loss.binary_change_loss = losses::BinaryChangeLoss::bce_plus_soft_dice;
  c.model.num_classes = 5;
  c.model.backbone.width = 12;
  c.model.head.use_tdn = false;
  c.model.head.aggregation = heads::TemporalAggregation::hadamard_product;
  c.augment.crop_size = 16;
  c.augment.rot90 = false;
  const auto text = c.to_toml();
  const auto back = TrainConfig::parse(text);
  CHECK(back.to_toml() == text);
  CHECK(back.hash() == c.hash());
  CHECK(back.base_lr == c.base_lr);
  CHECK(back.seed == c.seed);
  CHECK(back.supervision == Supervision::bitemporal);
  CHECK(back.model.head.aggregation == heads::TemporalAggregation::hadamard_product);
  CHECK(back.data_root == "/data/x y");
  CHECK_FALSE(back.model.head.use_tdn);
}

TEST_CASE("partial documents keep defaults") {
  const auto c = TrainConfig::parse("max_steps = 10\n[head]\nuse_tdn = false\n");
  CHECK(c.max_steps == 10);
  CHECK(c.batch_size == 16);
  CHECK_FALSE(c.model.head.use_tdn);
}

TEST_CASE("config errors") {
  CHECK(error_kind_of([] { TrainConfig::parse("max_step = 10\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::parse("[head]\nwidth = 3\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::parse("max_steps = \"ten\"\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::parse("supervision = \"oracle\"\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::parse("max_steps = = 1\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::parse("batch_size = 1\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::parse("[pairing]\nself_contrast_p = 2.0\n"); }) == ErrorKind::config);
  CHECK(error_kind_of([] { TrainConfig::load("/nonexistent/run.toml"); }) == ErrorKind::config);
  TrainConfig c;
  c.momentum = 1.0;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::config);
}

TEST_CASE("hash identifies the config") {
  TrainConfig a, b;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.seed = 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("load from file") {
  starcd::testing::TempDir dir("config");
  std::ofstream(dir.path() / "run.toml") << "seed = 5\n[data]\nroot = \"ds\"\n";
  const auto c = TrainConfig::load(dir.path() / "run.toml");
  CHECK(c.seed == 5);
  CHECK(c.data_root == "ds");
}
