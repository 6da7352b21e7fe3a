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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "starcd/data/data.hpp"

namespace starcd::data {

void SyntheticWorldConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) { check(ok, ErrorKind::config, msg); };
  need(tile_size >= 8, "tile_size must be at least 8");
  need(channels == 1 || channels == 3, "channels must be 1 or 3");
  need(min_objects >= 0 && max_objects >= min_objects, "object count range is empty or negative");
  need(!object_kinds.empty(), "object_kinds must name at least one shape");
  need(min_object_size >= 1 && max_object_size >= min_object_size && max_object_size <= tile_size,
       "object size range must lie in [1, tile_size]");
  need(num_classes >= 2 && num_classes < kIgnoreValue, "num_classes must lie in [2, 255)");
  need(change_rate >= 0.0 && change_rate <= 1.0, "change_rate must lie in [0, 1]");
  need(min_distractors >= 0 && max_distractors >= min_distractors, "distractor count range is empty or negative");
  need(distractor_blend >= 0.0 && distractor_blend <= 1.0, "distractor_blend must lie in [0, 1]");
  need(object_color_spread >= 0 && texture_amplitude >= 0 && sensor_noise >= 0 && radiometric_jitter >= 0,
       "noise amplitudes must be non-negative");
  need(max_placement_retries >= 1, "max_placement_retries must be positive");
}

bool SceneObject::contains(int y, int x) const {
  if (y < y0 || y >= y0 + h || x < x0 || x >= x0 + w) return false;
  if (kind == ObjectKind::rectangle) return true;
  const double ry = 0.5 * h, rx = 0.5 * w;
  const double dy = (y + 0.5 - (y0 + ry)) / ry;
  const double dx = (x + 0.5 - (x0 + rx)) / rx;
  return dy * dy + dx * dx <= 1.0;
}

std::vector<std::array<float, 3>> class_palette(const SyntheticWorldConfig& cfg) {
  Rng rng(cfg.background_texture_seed);
  std::vector<std::array<float, 3>> palette(cfg.num_classes);
  palette[0] = {0.40f, 0.45f, 0.35f};
  for (int c = 1; c < cfg.num_classes; ++c) {
    // Keep classes apart from the background and each other.
    for (int attempt = 0;; ++attempt) {
      std::array<float, 3> col;
      for (auto& v : col) v = static_cast<float>(rng.uniform(0.15, 0.85));
      double min_dist = 1e9;
      for (int j = 0; j < c; ++j) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += (col[k] - palette[j][k]) * (col[k] - palette[j][k]);
        min_dist = std::min(min_dist, std::sqrt(d));
      }
      if (min_dist > 0.25 || attempt > 100) {
        palette[c] = col;
        break;
      }
    }
  }
  return palette;
}

namespace {

bool overlaps(const SceneObject& a, const SceneObject& b) {
  // One free pixel between bounding boxes keeps objects separate.
  return a.y0 < b.y0 + b.h + 1 && b.y0 < a.y0 + a.h + 1 && a.x0 < b.x0 + b.w + 1 && b.x0 < a.x0 + a.w + 1;
}

SceneObject random_object(const SyntheticWorldConfig& cfg, Rng& rng) {
  SceneObject o{};
  o.kind = cfg.object_kinds[rng.uniform_int(0, static_cast<int>(cfg.object_kinds.size()) - 1)];
  o.h = rng.uniform_int(cfg.min_object_size, cfg.max_object_size);
  o.w = rng.uniform_int(cfg.min_object_size, cfg.max_object_size);
  o.y0 = rng.uniform_int(0, cfg.tile_size - o.h);
  o.x0 = rng.uniform_int(0, cfg.tile_size - o.w);
  return o;
}

void paint(SceneObject& o, const SyntheticWorldConfig& cfg, const std::vector<std::array<float, 3>>& palette,
           Rng& rng) {
  for (int k = 0; k < 3; ++k) {
    float base = palette[o.label][k];
    if (o.distractor) {
      base = static_cast<float>((1.0 - cfg.distractor_blend) * palette[0][k] + cfg.distractor_blend * palette[1][k]);
    }
    o.color[k] = base + static_cast<float>(rng.normal(0.0, cfg.object_color_spread));
  }
}

// Places o without overlapping `placed`; throws after the retry budget.
SceneObject place(const SyntheticWorldConfig& cfg, const std::vector<SceneObject>& placed, Rng& rng) {
  for (int attempt = 0; attempt < cfg.max_placement_retries; ++attempt) {
    SceneObject o = random_object(cfg, rng);
    const bool free = std::none_of(placed.begin(), placed.end(), [&](const SceneObject& p) { return overlaps(o, p); });
    if (free) return o;
  }
  throw Error(ErrorKind::placement_failed, "could not place an object without overlap after " +
                                               std::to_string(cfg.max_placement_retries) + " attempts");
}

int object_label(const SyntheticWorldConfig& cfg, Rng& rng) { return rng.uniform_int(1, cfg.num_classes - 1); }

}  // namespace

Scene sample_scene(const SyntheticWorldConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto palette = class_palette(cfg);
  Scene s{};
  for (int k = 0; k < 3; ++k) s.background[k] = palette[0][k] + static_cast<float>(rng.normal(0.0, 0.04));
  for (int i = 0; i < 3; ++i) {
    const double f = rng.uniform(0.05, 0.25);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    s.waves.push_back({cfg.texture_amplitude * rng.uniform(0.5, 1.0), f * std::sin(theta), f * std::cos(theta),
                       rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }
  const int n_objects = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  const int n_distractors = rng.uniform_int(cfg.min_distractors, cfg.max_distractors);
  for (int i = 0; i < n_objects + n_distractors; ++i) {
    SceneObject o = place(cfg, s.objects, rng);
    o.distractor = i >= n_objects;
    o.label = o.distractor ? 0 : object_label(cfg, rng);
    paint(o, cfg, palette, rng);
    s.objects.push_back(o);
  }
  return s;
}

LabeledTile render_scene(const Scene& scene, const SyntheticWorldConfig& cfg, const Radiometry& radiometry,
                         Rng& noise_rng) {
  const int n = cfg.tile_size;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  std::vector<float> rgb(3 * plane);
  std::vector<int> labels(plane, 0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double tex = 0.0;
      for (const auto& w : scene.waves) tex += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fy * y + w.fx * x) + w.phase);
      const float* color = scene.background;
      for (const auto& o : scene.objects) {
        if (o.contains(y, x)) {
          color = o.color;
          labels[static_cast<std::size_t>(y) * n + x] = o.label;
          tex *= 0.5;
          break;
        }
      }
      for (int k = 0; k < 3; ++k) {
        const double v = color[k] + tex + noise_rng.normal(0.0, cfg.sensor_noise);
        rgb[k * plane + static_cast<std::size_t>(y) * n + x] =
            std::clamp(static_cast<float>(v * radiometry.gain[k] + radiometry.offset[k]), 0.0f, 1.0f);
      }
    }
  }
  std::vector<float> data;
  if (cfg.channels == 3) {
    data = std::move(rgb);
  } else {
    data.resize(plane);
    for (std::size_t i = 0; i < plane; ++i) data[i] = (rgb[i] + rgb[plane + i] + rgb[2 * plane + i]) / 3.0f;
  }
  return {ImageTile(cfg.channels, n, n, std::move(data)), SemanticMask(n, n, cfg.num_classes, std::move(labels))};
}

std::vector<LabeledTile> gen_single_temporal(const SyntheticWorldConfig& cfg, int n, Rng& rng) {
  cfg.validate();
  check(n >= 0, ErrorKind::invalid_argument, "tile count must be non-negative");
  std::vector<LabeledTile> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng tile_rng = rng.derive(static_cast<std::uint64_t>(i));
    const Scene scene = sample_scene(cfg, tile_rng);
    out.push_back(render_scene(scene, cfg, Radiometry{}, tile_rng));
  }
  return out;
}

std::vector<PseudoPair> gen_bitemporal_eval(const SyntheticWorldConfig& cfg, int n, Rng& rng) {
  cfg.validate();
  check(n >= 0, ErrorKind::invalid_argument, "tile count must be non-negative");
  const auto palette = class_palette(cfg);
  std::vector<PseudoPair> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng tile_rng = rng.derive(static_cast<std::uint64_t>(i));
    const Scene s1 = sample_scene(cfg, tile_rng);
    Scene s2 = s1;

    std::vector<int> real;
    for (int j = 0; j < static_cast<int>(s1.objects.size()); ++j)
      if (!s1.objects[j].distractor) real.push_back(j);
    std::shuffle(real.begin(), real.end(), tile_rng);
    const int toggles = static_cast<int>(std::lround(cfg.change_rate * static_cast<double>(real.size())));
    std::vector<int> removed;
    int additions = 0;
    for (int t = 0; t < toggles; ++t) {
      SceneObject& o = s2.objects[real[t]];
      if (cfg.num_classes > 2 && tile_rng.bernoulli(0.5)) {
        int label = o.label;
        while (label == o.label) label = object_label(cfg, tile_rng);
        o.label = label;
        paint(o, cfg, palette, tile_rng);
      } else {
        removed.push_back(real[t]);
      }
      if (tile_rng.bernoulli(0.5)) ++additions;
    }
    std::sort(removed.rbegin(), removed.rend());
    // Removed footprints stay reserved so additions land on time-1 background.
    std::vector<SceneObject> reserved = s1.objects;
    for (int j : removed) s2.objects.erase(s2.objects.begin() + j);
    for (int a = 0; a < additions; ++a) {
      // Additions are optional; a crowded tile keeps the removals only.
      SceneObject o;
      try {
        o = place(cfg, reserved, tile_rng);
      } catch (const Error&) {
        break;
      }
      o.distractor = false;
      o.label = object_label(cfg, tile_rng);
      paint(o, cfg, palette, tile_rng);
      reserved.push_back(o);
      s2.objects.push_back(o);
    }

    Radiometry r2;
    for (int k = 0; k < 3; ++k) {
      r2.gain[k] = static_cast<float>(1.0 + cfg.radiometric_jitter * (2.0 * tile_rng.uniform() - 1.0));
      r2.offset[k] = static_cast<float>(0.5 * cfg.radiometric_jitter * (2.0 * tile_rng.uniform() - 1.0));
    }
    LabeledTile t1 = render_scene(s1, cfg, Radiometry{}, tile_rng);
    LabeledTile t2 = render_scene(s2, cfg, r2, tile_rng);
    BinaryChangeMask change = pairing::assign_change(t1.mask, t2.mask);
    out.emplace_back(std::move(t1.image), std::move(t2.image), std::move(t1.mask), std::move(t2.mask),
                     std::move(change), PairProvenance::bitemporal);
  }
  return out;
}

}  // namespace starcd::data
