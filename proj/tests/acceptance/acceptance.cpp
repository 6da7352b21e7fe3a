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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "starcd/data/data.hpp"
#include "starcd/harness/config.hpp"
#include "starcd/harness/evaluate.hpp"
#include "starcd/harness/trainer.hpp"
#include "starcd/heads/change_mixin.hpp"
#include "starcd/losses/losses.hpp"
#include "starcd/metrics/metrics.hpp"
#include "starcd/pairing/pairing.hpp"
#include "support.hpp"

using namespace starcd;
using starcd::testing::numeric_gradient;
using starcd::testing::random_change;
using starcd::testing::random_mask;
using starcd::testing::random_tensor;
using starcd::testing::random_tile;
using starcd::testing::relative_error;
using starcd::testing::separated_pair;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

LabelTensor random_targets(Shape s, int k, Rng& rng, double ignore) {
  LabelTensor t(s);
  for (auto& v : t.vec()) v = rng.bernoulli(ignore) ? kIgnoreValue : rng.uniform_int(0, k - 1);
  return t;
}

heads::HeadConfig small_head(bool tdn) {
  heads::HeadConfig c;
  c.n_conv_layers = 2;
  c.conv_channels = 4;
  c.in_channels = 3;
  c.upsample_scale = 2;
  c.use_tdn = tdn;
  return c;
}

// -- 1 --

Outcome assigner_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const int k = rng.uniform_int(2, 6);
    const auto a = random_mask(8, 8, k, rng, 0.1);
    const auto b = random_mask(8, 8, k, rng, 0.1);
    const auto c = pairing::assign_change(a, b);
    for (int j = 0; j < 64; ++j) {
      const int x = a.labels()[j], y = b.labels()[j];
      int want;
      if (x == kIgnoreValue || y == kIgnoreValue) {
        want = kIgnoreValue;
      } else if (k == 2) {
        want = (x != 0) ^ (y != 0);
      } else {
        want = x != y ? 1 : 0;
      }
      mismatches += c.values()[j] != want;
    }
  }
  // Pure binary masks against xor once more, without ignore cells.
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_mask(8, 8, 2, rng);
    const auto b = random_mask(8, 8, 2, rng);
    const auto c = pairing::assign_change(a, b);
    for (int j = 0; j < 64; ++j) mismatches += c.values()[j] != (a.labels()[j] ^ b.labels()[j]);
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 5.0, fmt("%.0f mismatching cells, %.3f s", mismatches, s)};
}

// -- 2 --

Outcome temporal_symmetry() {
  const auto t0 = Clock::now();
  Rng rng(202);
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    const Shape s{rng.uniform_int(1, 3), rng.uniform_int(1, 8), rng.uniform_int(1, 8), rng.uniform_int(1, 8)};
    const auto a = random_tensor<float>(s, rng);
    const auto b = random_tensor<float>(s, rng);
    failures += heads::temporal_difference(a, b).vec() != heads::temporal_difference(b, a).vec();
    const auto [ab, ba] = heads::temporal_swap(a, b);
    const auto [ba2, ab2] = heads::temporal_swap(b, a);
    failures += ab.vec() != ab2.vec() || ba.vec() != ba2.vec();
    // [a, b] holds a in its first half and b in its second.
    const std::size_t half = static_cast<std::size_t>(s.c) * s.h * s.w;
    for (int n = 0; n < s.n; ++n) {
      const float* p = ab.data() + 2 * n * half;
      failures += !std::equal(p, p + half, a.data() + n * half) || !std::equal(p + half, p + 2 * half, b.data() + n * half);
    }
  }
  const double s = seconds_since(t0);
  return {failures == 0 && s < 1.0, fmt("%.0f failing cases, %.3f s", failures, s)};
}

// -- 3 --

Outcome symmetry_invariance() {
  Rng rng(303);
  double worst = 0;
  const losses::LossConfig configs[] = {
      {},
      {losses::BinaryChangeLoss::bce_plus_soft_dice, losses::SemanticLoss::bce_plus_dice, kIgnoreValue}};
  for (int i = 0; i < 100; ++i) {
    heads::ChangeMixin<double> head(small_head(true), rng);
    const auto fa = random_tensor<double>({2, 3, 4, 4}, rng);
    const auto fb = random_tensor<double>({2, 3, 4, 4}, rng);
    const int k = rng.uniform_int(2, 6);
    std::vector<SemanticMask> ma, mb;
    for (int n = 0; n < 2; ++n) {
      ma.push_back(random_mask(8, 8, k, rng, 0.1));
      mb.push_back(random_mask(8, 8, k, rng, 0.1));
    }
    std::vector<BinaryChangeMask> ab, ba;
    for (int n = 0; n < 2; ++n) {
      ab.push_back(pairing::assign_change(ma[n], mb[n]));
      ba.push_back(pairing::assign_change(mb[n], ma[n]));
    }
    const auto target_ab = model::to_label_batch(std::vector<const BinaryChangeMask*>{&ab[0], &ab[1]});
    const auto target_ba = model::to_label_batch(std::vector<const BinaryChangeMask*>{&ba[0], &ba[1]});
    const auto out_ab = head.forward(fa, fb, heads::Mode::train, nullptr);
    const auto out_ba = head.forward(fb, fa, heads::Mode::train, nullptr);
    const auto& cfg = configs[i % 2];
    const double l1 = losses::symmetry_change_loss(out_ab.fwd, out_ab.rev, target_ab, cfg).value;
    const double l2 = losses::symmetry_change_loss(out_ba.fwd, out_ba.rev, target_ba, cfg).value;
    worst = std::max(worst, std::abs(l1 - l2) / std::max(std::abs(l1), 1e-300));
  }
  return {worst <= 1e-6, fmt("max relative change %.3g", worst)};
}

// -- 4 --

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  Rng rng(404);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };
  const Shape s{2, 1, 4, 4};
  const losses::LossConfig bce{};
  const losses::LossConfig bce_dice{losses::BinaryChangeLoss::bce_plus_soft_dice,
                                    losses::SemanticLoss::bce_plus_dice, kIgnoreValue};
  const losses::LossConfig ce{losses::BinaryChangeLoss::bce, losses::SemanticLoss::cross_entropy, kIgnoreValue};

  for (int rep = 0; rep < 3; ++rep) {
    auto z = random_tensor<double>(s, rng, -3, 3);
    const auto y = random_targets(s, 2, rng, 0.1);
    note("bce", relative_error(losses::bce_with_logits(z, y, kIgnoreValue).grad,
                               numeric_gradient(z, [&] { return losses::bce_with_logits(z, y, kIgnoreValue).value; })));
    auto p = random_tensor<double>(s, rng, 0.05, 0.95);
    note("dice", relative_error(losses::dice_loss(p, y, kIgnoreValue).grad,
                                numeric_gradient(p, [&] { return losses::dice_loss(p, y, kIgnoreValue).value; })));
    note("dice_logits",
         relative_error(losses::dice_loss_with_logits(z, y, kIgnoreValue).grad,
                        numeric_gradient(z, [&] { return losses::dice_loss_with_logits(z, y, kIgnoreValue).value; })));
    auto zk = random_tensor<double>({2, 4, 4, 4}, rng, -3, 3);
    const auto yk = random_targets(s, 4, rng, 0.1);
    note("cross_entropy",
         relative_error(losses::softmax_cross_entropy(zk, yk, kIgnoreValue).grad,
                        numeric_gradient(zk, [&] { return losses::softmax_cross_entropy(zk, yk, kIgnoreValue).value; })));
    for (const auto* cfg : {&bce, &bce_dice}) {
      note("binary_change", relative_error(losses::binary_change_loss(z, y, *cfg).grad,
                                           numeric_gradient(z, [&] { return losses::binary_change_loss(z, y, *cfg).value; })));
      note("semantic", relative_error(losses::semantic_loss(z, y, *cfg).grad,
                                      numeric_gradient(z, [&] { return losses::semantic_loss(z, y, *cfg).value; })));
      auto r = random_tensor<double>(s, rng, -3, 3);
      const auto l = losses::symmetry_change_loss<double>(z, r, y, *cfg);
      auto f = [&] { return losses::symmetry_change_loss<double>(z, r, y, *cfg).value; };
      note("symmetry", relative_error(l.grad_fwd, numeric_gradient(z, f)));
      note("symmetry", relative_error(l.grad_rev, numeric_gradient(r, f)));
    }
    for (const auto* cfg : {&bce, &ce}) {
      const int c = cfg == &ce ? 3 : 1;
      const int k = c == 1 ? 2 : 3;
      PredictionTensors<double> pred{random_tensor<double>({2, c, 4, 4}, rng, -3, 3),
                                             random_tensor<double>({2, c, 4, 4}, rng, -3, 3),
                                             random_tensor<double>(s, rng, -3, 3),
                                             random_tensor<double>(s, rng, -3, 3)};
      const auto ma = random_targets(s, k, rng, 0.1);
      const auto mb = random_targets(s, k, rng, 0.1);
      const auto l = losses::total_loss(pred, ma, mb, y, *cfg);
      auto f = [&] { return losses::total_loss(pred, ma, mb, y, *cfg).total; };
      note("total", relative_error(l.grad_semantic_a, numeric_gradient(pred.semantic_a, f)));
      note("total", relative_error(l.grad_semantic_b, numeric_gradient(pred.semantic_b, f)));
      note("total", relative_error(l.grad_change_fwd, numeric_gradient(pred.change_fwd, f)));
      note("total", relative_error(l.grad_change_rev, numeric_gradient(*pred.change_rev, f)));
    }
  }

  for (auto agg : {heads::TemporalAggregation::absolute_difference, heads::TemporalAggregation::hadamard_product}) {
    auto cfg = small_head(true);
    cfg.aggregation = agg;
    heads::ChangeMixin<double> head(cfg, rng);
    auto [a, b] = separated_pair<double>({2, 3, 4, 4}, rng);
    heads::ChangeMixin<double>::Cache cache;
    const auto out = head.forward(a, b, heads::Mode::train, &cache);
    const auto wf = random_tensor<double>(out.fwd.shape(), rng);
    const auto wr = random_tensor<double>(out.fwd.shape(), rng);
    head.visit("h", {[](const std::string&, nn::Parameter<double>& p) { p.zero_grad(); }, {}});
    const auto [ga, gb] = head.backward(wf, &wr, cache);
    auto f = [&] {
      const auto o = head.forward(a, b, heads::Mode::train, nullptr);
      double sum = 0;
      for (std::size_t i = 0; i < o.fwd.size(); ++i) sum += o.fwd[i] * wf[i] + (*o.rev)[i] * wr[i];
      return sum;
    };
    note("head_inputs", relative_error(ga, numeric_gradient(a, f)));
    note("head_inputs", relative_error(gb, numeric_gradient(b, f)));
    head.visit("h", {[&](const std::string&, nn::Parameter<double>& p) {
                       note("head_params", relative_error(p.grad, numeric_gradient(p.value, f)));
                     },
                     {}});
  }

  double max_err = 0;
  std::string which;
  for (const auto& [name, e] : worst)
    if (e >= max_err) {
      max_err = e;
      which = name;
    }
  const double secs = seconds_since(t0);
  return {max_err < 1e-4 && secs < 30.0,
          fmt("max relative error %.3g", max_err) + " (" + which + ", " + std::to_string(worst.size()) +
              " groups), " + fmt("%.2f s", secs)};
}

// -- 5 --

Outcome metric_oracle() {
  Rng rng(505);
  int score_mismatches = 0;
  metrics::ConfusionMatrix streamed(2), batched(2);
  std::vector<int> all_ref, all_pred;
  for (int i = 0; i < 1000; ++i) {
    const auto ref = random_change(16, 16, rng, rng.uniform(), 0.05);
    const auto pred = random_change(16, 16, rng, rng.uniform());
    double tp = 0, fp = 0, fn = 0;
    for (int j = 0; j < 256; ++j) {
      const int r = ref.values()[j], p = pred.values()[j];
      if (r == kIgnoreValue) continue;
      tp += r == 1 && p == 1;
      fp += r == 0 && p == 1;
      fn += r == 1 && p == 0;
    }
    const double iou = tp + fp + fn > 0 ? tp / (tp + fp + fn) : 0;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0;
    metrics::ConfusionMatrix cm(2);
    cm.accumulate(ref, pred);
    const auto got = metrics::binary_scores(cm);
    score_mismatches += got.iou != iou || got.precision != precision || got.recall != recall || got.f1 != f1;
    streamed.accumulate(ref, pred);
    all_ref.insert(all_ref.end(), ref.values().begin(), ref.values().end());
    all_pred.insert(all_pred.end(), pred.values().begin(), pred.values().end());
  }
  batched.accumulate(all_ref, all_pred);
  const bool stream_equal = streamed == batched;

  double worst_overall = 0;
  for (int i = 0; i < 200; ++i) {
    const int k = rng.uniform_int(2, 5);
    metrics::ConfusionMatrix sc(1 + k * k), bin(2);
    for (int t = 0; t < 3; ++t) {
      const auto ra = random_mask(16, 16, k, rng, 0.05), rb = random_mask(16, 16, k, rng);
      const auto pa = random_mask(16, 16, k, rng), pb = random_mask(16, 16, k, rng);
      metrics::accumulate_semantic_change(sc, bin, ra, rb, pairing::assign_change(ra, rb), pa, pb,
                                          random_change(16, 16, rng, rng.uniform()));
    }
    const auto s = metrics::second_scores(sc, bin);
    const double want = 0.3 * s.miou + 0.7 * s.sek;
    worst_overall = std::max(worst_overall, std::abs(s.overall - want) / std::numeric_limits<double>::epsilon());
  }
  return {score_mismatches == 0 && stream_equal && worst_overall <= 1.0,
          fmt("%.0f score mismatches, overall off by %.1f ulp, ", score_mismatches, worst_overall) +
              (stream_equal ? "streaming == batch" : "streaming != batch")};
}

// -- 6 --

Outcome schedule() {
  const double base = 0.03, gamma = 0.9;
  const int max = 1000;
  const double start = harness::poly_lr(0, max, base, gamma);
  const double end = harness::poly_lr(max, max, base, gamma);
  const double mid = harness::poly_lr(max / 2, max, base, gamma);
  const double err = std::abs(mid - 0.03 * std::pow(0.5, 0.9));
  return {start == base && end == 0.0 && err <= 1e-9,
          fmt("lr(0)=%.6g lr(max)=%.6g, midpoint error %.3g", start, end, err)};
}

// -- 7 --

Outcome self_contrast() {
  Rng rng(707);
  std::vector<pairing::LabeledTile> batch;
  for (int i = 0; i < 10; ++i) batch.push_back({random_tile(3, 8, 8, rng), random_mask(8, 8, 3, rng, 0.1)});
  pairing::PairingConfig cfg;
  cfg.self_contrast_p = 0.9;
  int replaced = 0, total = 0;
  for (int i = 0; i < 1000; ++i)
    for (const auto& p : pairing::build_pseudo_pairs(batch, cfg, rng)) {
      replaced += p.provenance() == PairProvenance::self_contrast;
      ++total;
    }
  const double frac = static_cast<double>(replaced) / total;
  cfg.self_contrast_p = 1.0;
  long nonzero = 0;
  for (int i = 0; i < 100; ++i)
    for (const auto& p : pairing::build_pseudo_pairs(batch, cfg, rng))
      for (int v : p.change().values()) nonzero += v != 0 && v != kIgnoreValue;
  return {total == 10000 && frac >= 0.89 && frac <= 0.91 && nonzero == 0,
          fmt("p=0.9 fraction %.4f over %.0f samples, p=1 non-zero targets %.0f", frac, total, nonzero)};
}

// -- 8, 9, 10: training runs on the synthetic world --

struct World {
  std::vector<pairing::LabeledTile> train;
  std::vector<PseudoPair> eval;
};

World make_world(const data::SyntheticWorldConfig& w, std::uint64_t seed) {
  Rng root(1000 + seed);
  Rng tr = root.derive(1), ev = root.derive(2);
  return {data::gen_single_temporal(w, 512, tr), data::gen_bitemporal_eval(w, 64, ev)};
}

BinaryChangeMask or_assigner(const SemanticMask& a, const SemanticMask& b) {
  std::vector<int> v(a.labels().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int x = a.labels()[i], y = b.labels()[i];
    v[i] = (x == kIgnoreValue || y == kIgnoreValue) ? kIgnoreValue : ((x == 1 || y == 1) ? 1 : 0);
  }
  return BinaryChangeMask(a.height(), a.width(), std::move(v));
}

struct RunResult {
  double change_f1 = 0, dpcc_f1 = 0, seconds = 0;
};

RunResult star_run(std::uint64_t seed, bool use_or) {
  const World world = make_world({}, seed);
  harness::TrainConfig cfg;
  cfg.max_steps = 1000;
  cfg.batch_size = 8;
  cfg.seed = seed;
  cfg.pairing.self_contrast_p = 0.9;
  const auto t0 = Clock::now();
  harness::Trainer t(cfg, world.train);
  if (use_or) t.set_assigner(or_assigner);
  t.run();
  const auto rec = harness::evaluate(t.model(), world.eval, {});
  return {rec.change.f1, rec.dpcc.f1, seconds_since(t0)};
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::vector<RunResult>& xor_runs() {
  static std::vector<RunResult> runs;
  if (runs.empty()) {
    for (std::uint64_t seed : {0, 1, 2}) {
      runs.push_back(star_run(seed, false));
      std::printf("  seed %d: change F1 %.4f, DPCC F1 %.4f, %.1f s\n", static_cast<int>(seed), runs.back().change_f1,
                  runs.back().dpcc_f1, runs.back().seconds);
      std::fflush(stdout);
    }
  }
  return runs;
}

Outcome star_beats_dpcc() {
  const auto& runs = xor_runs();
  std::vector<double> change, dpcc;
  double slowest = 0;
  for (const auto& r : runs) {
    change.push_back(r.change_f1);
    dpcc.push_back(r.dpcc_f1);
    slowest = std::max(slowest, r.seconds);
  }
  const double mc = median3(change), md = median3(dpcc);
  return {mc >= 0.70 && mc - md >= 0.02 && slowest < 600.0,
          fmt("median change F1 %.4f, median DPCC F1 %.4f, slowest run %.0f s", mc, md, slowest)};
}

// First step at which the moving average of the change loss reaches 0.2;
// max_steps + 1 when it never does.
int steps_to_threshold(std::uint64_t seed, bool tdn) {
  data::SyntheticWorldConfig w;
  w.max_distractors = 0;
  const World world = make_world(w, seed);
  harness::TrainConfig cfg;
  cfg.max_steps = 2000;
  cfg.batch_size = 8;
  cfg.seed = seed;
  cfg.pairing.self_contrast_p = 0.0;
  cfg.model.head.use_tdn = tdn;
  harness::Trainer t(cfg, world.train);
  const double alpha = 0.1, threshold = 0.2;
  double avg = -1;
  int crossed = cfg.max_steps + 1;
  t.run([&](const harness::StepRecord& r) {
    avg = avg < 0 ? r.change : (1 - alpha) * avg + alpha * r.change;
    if (avg <= threshold) crossed = r.step;
    return avg <= threshold;
  });
  return crossed;
}

Outcome tdn_converges_faster() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int with = steps_to_threshold(seed, true);
    const int without = steps_to_threshold(seed, false);
    wins += with < without;
    std::printf("  seed %d: steps to change loss 0.2 with TDN %d, without %d\n", static_cast<int>(seed), with,
                without);
    std::fflush(stdout);
  }
  return {wins >= 4, fmt("TDN faster in %.0f of 5 seed pairs", wins)};
}

Outcome assigner_ablation() {
  const auto& base = xor_runs();
  std::vector<double> xf, of;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto r = star_run(seed, true);
    of.push_back(r.change_f1);
    std::printf("  seed %d: or-assigner change F1 %.4f\n", static_cast<int>(seed), r.change_f1);
    std::fflush(stdout);
  }
  for (const auto& r : base) xf.push_back(r.change_f1);
  const double mx = median3(xf), mo = median3(of);
  return {mx - mo >= 0.02, fmt("median F1 xor %.4f, or %.4f", mx, mo)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"assigner oracle", assigner_oracle},
      {"temporal symmetry", temporal_symmetry},
      {"symmetry loss invariance", symmetry_invariance},
      {"gradient checks", gradient_checks},
      {"metric oracle", metric_oracle},
      {"schedule", schedule},
      {"self-contrast statistics", self_contrast},
      {"STAR change head beats DPCC", star_beats_dpcc},
      {"TDN speeds up convergence", tdn_converges_faster},
      {"assigner ablation direction", assigner_ablation},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
