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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "starcd/metrics/metrics.hpp"
#include "starcd/model/change_star.hpp"

namespace starcd::harness {

/// binary: change head and DPCC scored against the change masks.
/// object: binary plus per-time foreground IoU (two-class models).
/// semantic: SeK / mIoU / kappa / overall from the from-to readout
/// (models with more than two classes).
enum class EvalTask { binary, object, semantic };

EvalTask parse_task(const std::string& name);
std::string_view to_string(EvalTask t);

struct EvalRecord {
  int step = 0;
  EvalTask task = EvalTask::binary;
  int pairs = 0;
  metrics::BinaryScores change;
  metrics::BinaryScores dpcc;
  std::optional<metrics::BinaryScores> segmentation;  // object
  std::optional<metrics::SecondScores> second;        // semantic
  metrics::ConfusionMatrix cm_change{2};
  metrics::ConfusionMatrix cm_dpcc{2};

  nlohmann::json to_json() const;
};

struct EvalOptions {
  EvalTask task = EvalTask::binary;
  int batch_size = 16;
  double threshold = 0.5;
  /// When set, one indexed error-map PNG per pair is written here.
  std::optional<std::filesystem::path> error_map_dir;
  std::vector<std::string> ids;  // names for error maps; defaults to indices
};

/// Streams pairs through the model in inference mode and accumulates
/// confusion matrices. Throws ErrorKind::invalid_argument for a task the
/// model cannot serve.
EvalRecord evaluate(model::ChangeStar<float>& net, const std::vector<PseudoPair>& pairs, const EvalOptions& opt);

}  // namespace starcd::harness
