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

// starcd command line: gen-data, train, eval, predict, report.
// Exit codes: 0 success, 1 runtime failure, 2 config error, 3 data error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "starcd/data/data.hpp"
#include "starcd/harness/checkpoint.hpp"
#include "starcd/harness/config.hpp"
#include "starcd/harness/evaluate.hpp"
#include "starcd/harness/report.hpp"
#include "starcd/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace starcd;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
    case ErrorKind::class_count_mismatch:
      return kExitConfig;
    case ErrorKind::data:
    case ErrorKind::io:
    case ErrorKind::missing_input:
    case ErrorKind::shape_mismatch:
    case ErrorKind::out_of_range_label:
    case ErrorKind::placement_failed:
    case ErrorKind::empty_batch:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

struct GenDataArgs {
  fs::path out;
  std::uint64_t seed = 0;
  int train = 512;
  int val = 64;
  int test = 0;
  data::SyntheticWorldConfig world;
};

void run_gen_data(const GenDataArgs& a) {
  a.world.validate();
  data::DatasetWriter writer(a.out, a.world.num_classes);
  const Rng root(a.seed);
  Rng train_rng = root.derive(1);
  const auto train = data::gen_single_temporal(a.world, a.train, train_rng);
  for (int i = 0; i < a.train; ++i) writer.add("train", "train_" + std::to_string(i), train[i]);
  auto pairs = [&](const std::string& split, int n, std::uint64_t stream) {
    Rng rng = root.derive(stream);
    const auto ps = data::gen_bitemporal_eval(a.world, n, rng);
    for (int i = 0; i < n; ++i) writer.add(split, split + "_" + std::to_string(i), ps[i]);
  };
  if (a.val > 0) pairs("val", a.val, 2);
  if (a.test > 0) pairs("test", a.test, 3);
  writer.finish();
  std::cout << nlohmann::json{{"out", a.out.string()}, {"train", a.train}, {"val", a.val}, {"test", a.test}}.dump()
            << "\n";
}

struct TrainArgs {
  std::optional<fs::path> config;
  fs::path out = "run";
  std::optional<std::string> data;
  std::optional<int> max_steps, batch_size, eval_every, threads;
  std::optional<double> base_lr, lr_gamma, momentum, weight_decay, self_contrast_p;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> supervision, backbone;
  std::optional<int> num_classes, width, n_conv_layers, conv_channels;
  bool no_tdn = false;
  bool quiet = false;
};

void run_train(const TrainArgs& a) {
  harness::TrainConfig cfg = a.config ? harness::TrainConfig::load(*a.config) : harness::TrainConfig{};
  if (a.data) cfg.data_root = *a.data;
  if (a.max_steps) cfg.max_steps = *a.max_steps;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.eval_every) cfg.eval_every = *a.eval_every;
  if (a.threads) cfg.threads = *a.threads;
  if (a.base_lr) cfg.base_lr = *a.base_lr;
  if (a.lr_gamma) cfg.lr_gamma = *a.lr_gamma;
  if (a.momentum) cfg.momentum = *a.momentum;
  if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
  if (a.self_contrast_p) cfg.pairing.self_contrast_p = *a.self_contrast_p;
  if (a.seed) cfg.seed = *a.seed;
  if (a.supervision) {
    check(*a.supervision == "star" || *a.supervision == "bitemporal", ErrorKind::config,
          "supervision must be star or bitemporal");
    cfg.supervision = *a.supervision == "star" ? harness::Supervision::star : harness::Supervision::bitemporal;
  }
  if (a.backbone) cfg.model.backbone.name = *a.backbone;
  if (a.width) cfg.model.backbone.width = *a.width;
  if (a.num_classes) cfg.model.num_classes = *a.num_classes;
  if (a.n_conv_layers) cfg.model.head.n_conv_layers = *a.n_conv_layers;
  if (a.conv_channels) cfg.model.head.conv_channels = *a.conv_channels;
  if (a.no_tdn) cfg.model.head.use_tdn = false;
  cfg.validate();
  check(!cfg.data_root.empty(), ErrorKind::config, "no dataset given (--data or [data].root)");

  const data::DatasetManifest m = data::load_manifest(cfg.data_root);
  const bool star = cfg.supervision == harness::Supervision::star;
  check(m.mode(cfg.train_split) == (star ? data::SplitMode::single_temporal : data::SplitMode::bitemporal),
        ErrorKind::data,
        "split '" + cfg.train_split + "' does not match supervision = " + std::string(harness::to_string(cfg.supervision)));
  check(m.num_classes == cfg.model.num_classes, ErrorKind::config,
        "dataset declares " + std::to_string(m.num_classes) + " classes, config has " +
            std::to_string(cfg.model.num_classes));
  std::optional<harness::Trainer> trainer;
  if (star) {
    trainer.emplace(cfg, data::load_single_split(m, cfg.train_split));
  } else {
    trainer.emplace(cfg, data::load_pair_split(m, cfg.train_split));
  }
  if (cfg.eval_every > 0 && m.has_split(cfg.eval_split) && m.mode(cfg.eval_split) == data::SplitMode::bitemporal)
    trainer->set_eval_set(data::load_pair_split(m, cfg.eval_split));

  fs::create_directories(a.out);
  {
    std::ofstream cfg_out(a.out / "config.toml");
    cfg_out << cfg.to_toml();
  }
  std::ofstream log(a.out / "log.jsonl");
  check(log.good(), ErrorKind::io, "cannot write " + (a.out / "log.jsonl").string());
  trainer->set_log(&log);
  trainer->run([&](const harness::StepRecord& r) {
    if (!a.quiet && (r.step % 50 == 0 || r.step == cfg.max_steps))
      std::fprintf(stderr, "step %d/%d loss %.4f change %.4f lr %.5f\n", r.step, cfg.max_steps, r.loss, r.change, r.lr);
    return false;
  });
  harness::save_checkpoint(a.out / "checkpoint.bin", trainer->model(), cfg, trainer->current_step());
  std::cout << nlohmann::json{{"checkpoint", (a.out / "checkpoint.bin").string()},
                              {"log", (a.out / "log.jsonl").string()},
                              {"steps", trainer->current_step()},
                              {"config_hash", cfg.hash()}}
                   .dump()
            << "\n";
}

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  std::string split = "val";
  std::string task = "binary";
  std::optional<fs::path> error_maps;
  std::optional<fs::path> out;
  double threshold = 0.5;
};

void run_eval(const EvalArgs& a) {
  const harness::EvalTask task = harness::parse_task(a.task);
  auto ck = harness::load_checkpoint(a.checkpoint);
  const data::DatasetManifest m = data::load_manifest(a.data);
  check(m.mode(a.split) == data::SplitMode::bitemporal, ErrorKind::data,
        "evaluation split '" + a.split + "' is not bitemporal");
  check(m.num_classes == ck.info.config.model.num_classes, ErrorKind::config,
        "dataset declares " + std::to_string(m.num_classes) + " classes, checkpoint model has " +
            std::to_string(ck.info.config.model.num_classes));
  harness::EvalOptions opt;
  opt.task = task;
  opt.threshold = a.threshold;
  opt.error_map_dir = a.error_maps;
  opt.ids = m.ids(a.split);
  harness::EvalRecord rec = harness::evaluate(*ck.model, data::load_pair_split(m, a.split), opt);
  rec.step = ck.info.step;
  nlohmann::json j = rec.to_json();
  j["type"] = "eval";
  j["split"] = a.split;
  j["config_hash"] = ck.info.config_hash;
  if (a.out) {
    if (a.out->has_parent_path()) fs::create_directories(a.out->parent_path());
    std::ofstream out(*a.out, std::ios::app);
    check(out.good(), ErrorKind::io, "cannot write " + a.out->string());
    out << j.dump() << "\n";
  }
  std::cout << j.dump() << "\n";
}

struct PredictArgs {
  fs::path checkpoint;
  fs::path data;
  std::string split = "val";
  fs::path out = "predictions";
  double threshold = 0.5;
};

void run_predict(const PredictArgs& a) {
  auto ck = harness::load_checkpoint(a.checkpoint);
  auto& net = *ck.model;
  const data::DatasetManifest m = data::load_manifest(a.data);
  const int k = net.config().num_classes;
  check(m.num_classes == k, ErrorKind::config, "dataset and checkpoint disagree on the class count");
  const fs::path root = a.out / a.split;
  int written = 0;
  auto semantic = [&](const LabelTensor& t) { return SemanticMask(t.h(), t.w(), k, t.vec()); };
  for (const auto& id : m.ids(a.split)) {
    if (m.mode(a.split) == data::SplitMode::bitemporal) {
      const PseudoPair p = data::load_pair(m, a.split, id);
      const auto ta = model::to_batch<float>(p.image_a());
      const auto tb = model::to_batch<float>(p.image_b());
      const auto out = net.forward(ta, tb, nn::Mode::infer, nullptr);
      const LabelTensor change = net.change_map(ta, tb, a.threshold);
      data::write_png(root / "masks" / (id + ".png"), semantic(net.class_map(out.semantic_a, a.threshold)));
      data::write_png(root / "masks_t2" / (id + ".png"), semantic(net.class_map(out.semantic_b, a.threshold)));
      data::write_png(root / "change" / (id + ".png"), BinaryChangeMask(change.h(), change.w(), change.vec()));
    } else {
      const data::LabeledTile t = data::load_single(m, a.split, id);
      const auto logits = net.segment(model::to_batch<float>(t.image), nn::Mode::infer);
      data::write_png(root / "masks" / (id + ".png"), semantic(net.class_map(logits, a.threshold)));
    }
    ++written;
  }
  std::cout << nlohmann::json{{"out", root.string()}, {"tiles", written}}.dump() << "\n";
}

struct ReportArgs {
  std::vector<fs::path> logs;
  fs::path out = "report";
  double threshold = 0.2;
};

void run_report(const ReportArgs& a) {
  harness::ReportOptions opt;
  opt.change_loss_threshold = a.threshold;
  const auto runs = harness::report(a.logs, a.out, opt);
  std::cout << nlohmann::json{{"out", a.out.string()}, {"runs", runs.size()}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change detection from single-temporal supervision"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic dataset");
  g->add_option("--out", gen.out, "Output dataset root")->required();
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--train", gen.train, "Single-temporal training tiles");
  g->add_option("--val", gen.val, "Bitemporal validation pairs");
  g->add_option("--test", gen.test, "Bitemporal test pairs");
  g->add_option("--tile-size", gen.world.tile_size, "Tile edge in pixels");
  g->add_option("--num-classes", gen.world.num_classes, "Classes including background");
  g->add_option("--min-objects", gen.world.min_objects, "Minimum objects per tile");
  g->add_option("--max-objects", gen.world.max_objects, "Maximum objects per tile");
  g->add_option("--max-distractors", gen.world.max_distractors, "Maximum background-labelled distractors per tile");
  g->add_option("--change-rate", gen.world.change_rate, "Fraction of objects toggled between times");
  g->add_option("--radiometric-jitter", gen.world.radiometric_jitter, "Time-2 gain half-width");
  g->add_option("--texture-seed", gen.world.background_texture_seed, "Seed of the class palette");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", tr.config, "TOML config file");
  t->add_option("--data", tr.data, "Dataset root");
  t->add_option("--out", tr.out, "Run directory (checkpoint.bin, log.jsonl, config.toml)");
  t->add_option("--max-steps", tr.max_steps);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--base-lr", tr.base_lr);
  t->add_option("--lr-gamma", tr.lr_gamma);
  t->add_option("--momentum", tr.momentum);
  t->add_option("--weight-decay", tr.weight_decay);
  t->add_option("--seed", tr.seed);
  t->add_option("--supervision", tr.supervision, "star or bitemporal");
  t->add_option("--self-contrast-p", tr.self_contrast_p);
  t->add_option("--eval-every", tr.eval_every);
  t->add_option("--threads", tr.threads, "Kernel threads (0 = all cores)");
  t->add_option("--backbone", tr.backbone, "Registered backbone name");
  t->add_option("--width", tr.width, "Backbone width");
  t->add_option("--num-classes", tr.num_classes);
  t->add_option("--n-conv-layers", tr.n_conv_layers, "Temporal swap network depth");
  t->add_option("--conv-channels", tr.conv_channels, "Change head width");
  t->add_flag("--no-tdn", tr.no_tdn, "Disable the temporal difference network");
  t->add_flag("--quiet", tr.quiet, "No progress lines on stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a bitemporal split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--split", ev.split);
  e->add_option("--task", ev.task, "binary, object or semantic");
  e->add_option("--error-maps", ev.error_maps, "Directory for TP/FP/FN PNGs");
  e->add_option("--out", ev.out, "Append the metric record to this JSON-lines file");
  e->add_option("--threshold", ev.threshold);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Write predicted rasters for a split");
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--data", pr.data)->required();
  p->add_option("--split", pr.split);
  p->add_option("--out", pr.out);
  p->add_option("--threshold", pr.threshold);

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Learning curves and summary tables from training logs");
  r->add_option("logs", rp.logs, "log.jsonl files")->required();
  r->add_option("--out", rp.out);
  r->add_option("--threshold", rp.threshold, "Change-loss threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }

  try {
    if (g->parsed()) run_gen_data(gen);
    if (t->parsed()) run_train(tr);
    if (e->parsed()) run_eval(ev);
    if (p->parsed()) run_predict(pr);
    if (r->parsed()) run_report(rp);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
