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

#include "starcd/harness/trainer.hpp"

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "starcd/kernels/kernels.hpp"
#include "starcd/losses/losses.hpp"

namespace starcd::harness {

void Sgd::step(model::ChangeStar<float>& net, double lr) {
  const float mu = static_cast<float>(momentum_);
  const float wd = static_cast<float>(weight_decay_);
  const float rate = static_cast<float>(lr);
  net.visit({[&](const std::string& name, nn::Parameter<float>& p) {
               auto [it, fresh] = velocity_.try_emplace(name, p.value.shape(), 0.0f);
               Tensor<float>& v = it->second;
               for (std::size_t i = 0; i < v.size(); ++i) {
                 v[i] = mu * v[i] + (p.grad[i] + wd * p.value[i]);
                 p.value[i] -= rate * v[i];
               }
             },
             {}});
}

std::unique_ptr<model::ChangeStar<float>> make_model(const TrainConfig& cfg) {
  cfg.validate();
  return std::make_unique<model::ChangeStar<float>>(cfg.model, Rng(cfg.seed).derive(1).seed());
}

Trainer::Trainer(TrainConfig cfg, std::vector<data::LabeledTile> train)
    : cfg_(std::move(cfg)), single_(std::move(train)), sgd_(cfg_.momentum, cfg_.weight_decay) {
  check(cfg_.supervision == Supervision::star, ErrorKind::config,
        "single-temporal data needs supervision = \"star\"");
  init();
}

Trainer::Trainer(TrainConfig cfg, std::vector<PseudoPair> train)
    : cfg_(std::move(cfg)), pairs_(std::move(train)), sgd_(cfg_.momentum, cfg_.weight_decay) {
  check(cfg_.supervision == Supervision::bitemporal, ErrorKind::config,
        "bitemporal pairs need supervision = \"bitemporal\"");
  init();
}

void Trainer::init() {
  cfg_.validate();
  const int n = static_cast<int>(cfg_.supervision == Supervision::star ? single_.size() : pairs_.size());
  check(n > 0, ErrorKind::data, "training split is empty");
  auto check_tile = [&](const ImageTile& img, const SemanticMask& mask, int i) {
    const std::string where = "training tile " + std::to_string(i) + ": ";
    check(img.channels() == cfg_.model.backbone.in_channels, ErrorKind::data,
          where + "has " + std::to_string(img.channels()) + " channels, model expects " +
              std::to_string(cfg_.model.backbone.in_channels));
    check(mask.num_classes() == cfg_.model.num_classes, ErrorKind::data,
          where + "declares " + std::to_string(mask.num_classes()) + " classes, model has " +
              std::to_string(cfg_.model.num_classes));
  };
  int tile = 0;
  for (int i = 0; i < n; ++i) {
    if (cfg_.supervision == Supervision::star) {
      check_tile(single_[i].image, single_[i].mask, i);
      tile = single_[i].image.height();
    } else {
      check_tile(pairs_[i].image_a(), pairs_[i].mask_a(), i);
      tile = pairs_[i].image_a().height();
    }
  }
  const int crop = cfg_.augment.crop_size == 0 ? tile : cfg_.augment.crop_size;
  check(crop % 8 == 0, ErrorKind::config, "training tile size " + std::to_string(crop) + " must be a multiple of 8");
  if (cfg_.threads > 0) kernels::set_num_threads(cfg_.threads);

  const Rng root(cfg_.seed);
  model_ = make_model(cfg_);
  sampler_ = std::make_unique<data::BatchSampler>(n, cfg_.batch_size, root.derive(2).seed());
  augment_rng_.emplace(root.derive(3));
  pairing_rng_.emplace(root.derive(4));
}

std::vector<PseudoPair> Trainer::sample() {
  const std::vector<int> idx = sampler_->next();
  if (cfg_.supervision == Supervision::bitemporal) {
    std::vector<PseudoPair> out;
    for (int i : idx) out.push_back(pairs_[i]);
    return out;
  }
  std::vector<data::LabeledTile> batch;
  for (int i : idx) batch.push_back(data::augment_train(single_[i], cfg_.augment, *augment_rng_));
  return pairing::build_pseudo_pairs(batch, cfg_.pairing, *pairing_rng_, assigner_);
}

StepRecord Trainer::step() {
  check(!finished(), ErrorKind::invalid_argument, "training already reached max_steps");
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<PseudoPair> pairs = sample();

  std::vector<const ImageTile*> ia, ib;
  std::vector<const SemanticMask*> ma, mb;
  std::vector<const BinaryChangeMask*> ch;
  StepRecord r;
  for (const auto& p : pairs) {
    ia.push_back(&p.image_a());
    ib.push_back(&p.image_b());
    ma.push_back(&p.mask_a());
    mb.push_back(&p.mask_b());
    ch.push_back(&p.change());
    if (p.provenance() == PairProvenance::self_contrast) ++r.self_contrast_pairs;
  }
  const Tensor<float> xa = model::to_batch<float>(ia);
  const Tensor<float> xb = model::to_batch<float>(ib);

  model::ChangeStar<float>::Cache cache;
  model_->zero_grad();
  const auto pred = model_->forward(xa, xb, nn::Mode::train, &cache);
  const auto lb = losses::total_loss(pred, model::to_label_batch(ma), model::to_label_batch(mb),
                                     model::to_label_batch(ch), cfg_.loss);
  check(std::isfinite(lb.total), ErrorKind::non_finite_value,
        "loss became non-finite at step " + std::to_string(step_ + 1));
  model_->backward({lb.grad_semantic_a, lb.grad_semantic_b, lb.grad_change_fwd, lb.grad_change_rev}, cache);

  r.lr = poly_lr(step_, cfg_.max_steps, cfg_.base_lr, cfg_.lr_gamma);
  sgd_.step(*model_, r.lr);
  ++step_;

  r.step = step_;
  r.loss = lb.total;
  r.seg = lb.seg;
  r.seg_a = lb.seg_a;
  r.seg_b = lb.seg_b;
  r.change = lb.change;
  r.change_fwd = lb.change_fwd;
  r.change_rev = lb.change_rev;
  r.change_bce = lb.change_bce;
  r.bce_positive = lb.change_bce_positive;
  r.bce_negative = lb.change_bce_negative;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log_step(r);

  if (cfg_.eval_every > 0 && !eval_set_.empty() && (step_ % cfg_.eval_every == 0 || finished())) {
    EvalRecord e = evaluate(*model_, eval_set_, EvalOptions{});
    e.step = step_;
    if (log_ != nullptr) {
      nlohmann::json j = e.to_json();
      j["type"] = "eval";
      *log_ << j.dump() << "\n" << std::flush;
    }
    evals_.push_back(std::move(e));
  }
  return r;
}

std::vector<StepRecord> Trainer::run(const std::function<bool(const StepRecord&)>& stop) {
  std::vector<StepRecord> out;
  while (!finished()) {
    out.push_back(step());
    if (stop && stop(out.back())) break;
  }
  return out;
}

void Trainer::log_step(const StepRecord& r) {
  if (log_ == nullptr) return;
  const nlohmann::json j = {{"type", "step"},
                            {"step", r.step},
                            {"lr", r.lr},
                            {"loss", r.loss},
                            {"seg", r.seg},
                            {"seg_a", r.seg_a},
                            {"seg_b", r.seg_b},
                            {"change", r.change},
                            {"change_fwd", r.change_fwd},
                            {"change_rev", r.change_rev},
                            {"change_bce", r.change_bce},
                            {"bce_positive", r.bce_positive},
                            {"bce_negative", r.bce_negative},
                            {"self_contrast_pairs", r.self_contrast_pairs},
                            {"seconds", r.seconds}};
  *log_ << j.dump() << "\n";
}

}  // namespace starcd::harness
