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

// Learning-curve and ablation tables from JSON-lines training logs.
//
// For every log <name>.jsonl the report writes
//   <name>.steps.csv   per-step loss terms and lr, including the BCE split
//                      into positive and negative cells
//   <name>.evals.csv   change-head vs DPCC F1 / IoU at each evaluation
// and, across all logs,
//   summary.csv        one row per run
//   summary.txt        the same as an aligned text table

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace starcd::harness {

struct ReportOptions {
  /// Threshold on the moving average of the change loss.
  double change_loss_threshold = 0.2;
  /// Weight of the newest value in the moving average.
  double ema_alpha = 0.1;
};

struct RunSummary {
  std::string name;
  int steps = 0;
  double final_loss = 0;
  double final_change_loss = 0;
  /// First step whose averaged change loss is <= the threshold.
  std::optional<int> steps_to_threshold;
  std::optional<double> change_f1;
  std::optional<double> change_iou;
  std::optional<double> dpcc_f1;
  std::optional<double> dpcc_iou;
  /// First evaluated step from which the change head stays ahead of DPCC.
  std::optional<int> change_overtakes_dpcc;
};

/// Moving average used for loss thresholds: a_1 = x_1,
/// a_t = (1 - alpha) a_{t-1} + alpha x_t.
std::vector<double> moving_average(const std::vector<double>& xs, double alpha);

/// Runs are named after the log file stem, or after its directory for the
/// log.jsonl written by `starcd train`. Throws ErrorKind::data for
/// unreadable or malformed logs.
std::vector<RunSummary> report(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& out_dir,
                               const ReportOptions& opt = {});

}  // namespace starcd::harness
