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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "starcd/data/data.hpp"
#include "starcd/harness/config.hpp"
#include "starcd/harness/evaluate.hpp"
#include "starcd/model/change_star.hpp"
#include "starcd/pairing/pairing.hpp"

namespace starcd::harness {

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- mu v + (g + wd w);  w <- w - lr v
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(model::ChangeStar<float>& net, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::map<std::string, Tensor<float>> velocity_;
};

struct StepRecord {
  int step = 0;  // 1-based index of the completed update
  double lr = 0;
  double loss = 0;
  double seg = 0;
  double seg_a = 0;
  double seg_b = 0;
  double change = 0;
  double change_fwd = 0;
  double change_rev = 0;
  double change_bce = 0;
  double bce_positive = 0;
  double bce_negative = 0;
  int self_contrast_pairs = 0;
  double seconds = 0;
};

/// Trains one model. The two supervision modes differ only in how a step's
/// pairs are sampled; everything after the sampler is shared.
class Trainer {
 public:
  /// STAR: pseudo pairs are built from single-temporal tiles each step.
  Trainer(TrainConfig cfg, std::vector<data::LabeledTile> train);
  /// Bitemporal supervision from stored pairs and change masks.
  Trainer(TrainConfig cfg, std::vector<PseudoPair> train);

  /// Replaces the label assigner of STAR pairing (test fixtures).
  void set_assigner(pairing::LabelAssigner assigner) { assigner_ = std::move(assigner); }
  /// Evaluated every eval_every steps and logged.
  void set_eval_set(std::vector<PseudoPair> pairs) { eval_set_ = std::move(pairs); }
  /// JSON-lines sink for step and eval records.
  void set_log(std::ostream* log) { log_ = log; }

  StepRecord step();
  /// Runs until max_steps or until stop returns true for a record.
  std::vector<StepRecord> run(const std::function<bool(const StepRecord&)>& stop = {});

  int current_step() const { return step_; }
  bool finished() const { return step_ >= cfg_.max_steps; }
  const TrainConfig& config() const { return cfg_; }
  model::ChangeStar<float>& model() { return *model_; }
  std::unique_ptr<model::ChangeStar<float>> release_model() { return std::move(model_); }
  const std::vector<EvalRecord>& evals() const { return evals_; }

 private:
  void init();
  std::vector<PseudoPair> sample();
  void log_step(const StepRecord& r);

  TrainConfig cfg_;
  std::vector<data::LabeledTile> single_;
  std::vector<PseudoPair> pairs_;
  std::vector<PseudoPair> eval_set_;
  pairing::LabelAssigner assigner_ = pairing::assign_change;
  std::unique_ptr<model::ChangeStar<float>> model_;
  std::unique_ptr<data::BatchSampler> sampler_;
  std::optional<Rng> augment_rng_;
  std::optional<Rng> pairing_rng_;
  Sgd sgd_;
  int step_ = 0;
  std::ostream* log_ = nullptr;
  std::vector<EvalRecord> evals_;
};

/// Builds a model from a config, seeded from cfg.seed.
std::unique_ptr<model::ChangeStar<float>> make_model(const TrainConfig& cfg);

}  // namespace starcd::harness
