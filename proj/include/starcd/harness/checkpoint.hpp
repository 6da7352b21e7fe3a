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

// Binary checkpoint (all integers little-endian):
//
//   magic        8 bytes  "STARCKPT"
//   version      u32      1
//   manifest     u64 length + UTF-8 JSON {config (TOML text), config_hash,
//                step, seed, tensor_count}
//   tensor_count u32
//   per tensor   u32 name length, name bytes, u8 kind (0 parameter,
//                1 buffer), 4 x u32 shape (n, c, h, w), float32 values
//   checksum     u64 FNV-1a over every preceding byte

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "starcd/harness/config.hpp"
#include "starcd/model/change_star.hpp"

namespace starcd::harness {

struct CheckpointInfo {
  TrainConfig config;
  std::string config_hash;
  int step = 0;
};

void save_checkpoint(const std::filesystem::path& path, model::ChangeStar<float>& net, const TrainConfig& cfg,
                     int step);

struct LoadedCheckpoint {
  CheckpointInfo info;
  std::unique_ptr<model::ChangeStar<float>> model;
};

/// Rebuilds the model from the stored config and restores every tensor.
/// Corrupt or incompatible files throw ErrorKind::data.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace starcd::harness
