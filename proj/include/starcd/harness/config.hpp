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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "starcd/data/data.hpp"
#include "starcd/losses/losses.hpp"
#include "starcd/model/change_star.hpp"
#include "starcd/pairing/pairing.hpp"

namespace starcd::harness {

enum class Supervision { star, bitemporal };

struct TrainConfig {
  int max_steps = 2000;
  int batch_size = 16;
  double base_lr = 0.03;
  double lr_gamma = 0.9;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  Supervision supervision = Supervision::star;
  int eval_every = 0;  // 0 disables periodic evaluation
  int threads = 1;     // 0 uses every available core

  std::string data_root;
  std::string train_split = "train";
  std::string eval_split = "val";

  pairing::PairingConfig pairing;
  losses::LossConfig loss;
  model::ModelConfig model;
  data::AugmentConfig augment;

  /// Throws ErrorKind::config naming the offending field.
  void validate() const;

  /// Canonical TOML rendering; parse(to_toml()) reproduces the config.
  std::string to_toml() const;
  /// Unknown keys and wrongly typed values are config errors.
  static TrainConfig parse(std::string_view toml_text);
  static TrainConfig load(const std::filesystem::path& path);

  /// FNV-1a of to_toml(), as 16 hex digits.
  std::string hash() const;
};

std::string_view to_string(Supervision s);

/// base_lr * (1 - step / max_steps)^gamma for 0 <= step <= max_steps.
double poly_lr(int step, int max_steps, double base_lr, double gamma);

}  // namespace starcd::harness
