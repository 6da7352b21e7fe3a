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

#include "starcd/pairing/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace starcd::pairing {

void PairingConfig::validate() const {
  check(self_contrast_p >= 0.0 && self_contrast_p <= 1.0, ErrorKind::config,
        "self_contrast_p must lie in [0, 1], got " + std::to_string(self_contrast_p));
  check(jitter.brightness >= 0 && jitter.contrast >= 0 && jitter.saturation >= 0 && jitter.hue_shift >= 0,
        ErrorKind::config, "jitter bounds must be non-negative");
}

std::vector<int> permute_batch(int n, Rng& rng) {
  check(n >= 1, ErrorKind::empty_batch, "cannot permute an empty batch");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  // Fisher-Yates
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  return perm;
}

BinaryChangeMask assign_change(const SemanticMask& mask_i, const SemanticMask& mask_j) {
  validate(mask_i, mask_j);
  const int ignore = mask_i.ignore_value();
  const auto a = mask_i.labels();
  const auto b = mask_j.labels();
  std::vector<int> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == ignore || b[k] == ignore) {
      out[k] = ignore;
    } else {
      out[k] = a[k] != b[k] ? 1 : 0;
    }
  }
  return BinaryChangeMask(mask_i.height(), mask_i.width(), std::move(out), ignore);
}

namespace {

using Planes = std::vector<std::vector<float>>;

Planes split(const ImageTile& img) {
  const std::size_t plane = static_cast<std::size_t>(img.height()) * img.width();
  Planes p(img.channels());
  for (int c = 0; c < img.channels(); ++c)
    p[c].assign(img.data().begin() + c * plane, img.data().begin() + (c + 1) * plane);
  return p;
}

ImageTile join(const Planes& p, int h, int w) {
  std::vector<float> data;
  data.reserve(p.size() * static_cast<std::size_t>(h) * w);
  for (const auto& c : p)
    for (float v : c) data.push_back(std::clamp(v, 0.0f, 1.0f));
  return ImageTile(static_cast<int>(p.size()), h, w, std::move(data));
}

// Factor in [1 - half_width, 1 + half_width]; exactly 1 for a zero width.
float factor(Rng& rng, double half_width) {
  return static_cast<float>(1.0 + half_width * (2.0 * rng.uniform() - 1.0));
}

float mean_of(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += x;
  return static_cast<float>(s / static_cast<double>(v.size()));
}

void photometric(Planes& p, Rng& rng, const JitterBounds& b) {
  for (auto& plane : p) {
    const float bf = factor(rng, b.brightness);
    const float cf = factor(rng, b.contrast);
    for (float& v : plane) v *= bf;
    const float m = mean_of(plane);
    for (float& v : plane) v = v * cf + m * (1.0f - cf);
  }
  const float sf = factor(rng, b.saturation);
  const double hue = b.hue_shift * (2.0 * rng.uniform() - 1.0);
  if (p.size() == 3) {
    for (std::size_t i = 0; i < p[0].size(); ++i) {
      const float gray = 0.299f * p[0][i] + 0.587f * p[1][i] + 0.114f * p[2][i];
      for (auto& plane : p) plane[i] = plane[i] * sf + gray * (1.0f - sf);
    }
    if (b.hue_shift > 0.0) {
      // Rotate chroma in YIQ space.
      const double theta = 2.0 * std::numbers::pi * hue;
      const double cs = std::cos(theta), sn = std::sin(theta);
      for (std::size_t i = 0; i < p[0].size(); ++i) {
        const double r = p[0][i], g = p[1][i], bl = p[2][i];
        const double y = 0.299 * r + 0.587 * g + 0.114 * bl;
        const double ci = 0.596 * r - 0.274 * g - 0.322 * bl;
        const double cq = 0.211 * r - 0.523 * g + 0.312 * bl;
        const double i2 = ci * cs - cq * sn;
        const double q2 = ci * sn + cq * cs;
        p[0][i] = static_cast<float>(y + 0.956 * i2 + 0.621 * q2);
        p[1][i] = static_cast<float>(y - 0.272 * i2 - 0.647 * q2);
        p[2][i] = static_cast<float>(y - 1.106 * i2 + 1.703 * q2);
      }
    }
  } else if (b.hue_shift > 0.0) {
    for (auto& plane : p) {
      const float shift = static_cast<float>(b.hue_shift * (2.0 * rng.uniform() - 1.0));
      for (float& v : plane) v += shift;
    }
  }
}

void box_blur(std::vector<float>& plane, int h, int w) {
  const std::vector<float> src = plane;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          s += src[static_cast<std::size_t>(yy) * w + xx];
          ++n;
        }
      plane[static_cast<std::size_t>(y) * w + x] = s / static_cast<float>(n);
    }
}

struct Rect {
  int y0, x0, y1, x1;
};

Rect random_rect(Rng& rng, int h, int w, double min_frac, double max_frac) {
  const int rh = std::max(1, static_cast<int>(h * rng.uniform(min_frac, max_frac)));
  const int rw = std::max(1, static_cast<int>(w * rng.uniform(min_frac, max_frac)));
  const int y0 = rng.uniform_int(0, h - rh);
  const int x0 = rng.uniform_int(0, w - rw);
  return {y0, x0, y0 + rh, x0 + rw};
}

// Composes a random subset of heavier corruptions, each applied with
// probability 1/2 in a fixed order.
void strong_corruptions(Planes& p, Rng& rng, int h, int w) {
  if (rng.bernoulli(0.5)) {  // tone curve
    const float gamma = static_cast<float>(rng.uniform(0.7, 1.4));
    for (auto& plane : p)
      for (float& v : plane) v = std::pow(std::clamp(v, 0.0f, 1.0f), gamma);
  }
  if (rng.bernoulli(0.5)) {  // shadow
    const Rect r = random_rect(rng, h, w, 0.3, 0.7);
    const float k = static_cast<float>(rng.uniform(0.5, 0.8));
    for (auto& plane : p)
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) plane[static_cast<std::size_t>(y) * w + x] *= k;
  }
  if (rng.bernoulli(0.5)) {  // haze
    const float level = static_cast<float>(rng.uniform(0.6, 0.9));
    const float t = static_cast<float>(rng.uniform(0.1, 0.35));
    for (auto& plane : p)
      for (float& v : plane) v = v * (1.0f - t) + level * t;
  }
  if (rng.bernoulli(0.5)) {  // additive noise
    const double sigma = rng.uniform(0.01, 0.05);
    for (auto& plane : p)
      for (float& v : plane) v += static_cast<float>(rng.normal(0.0, sigma));
  }
  if (rng.bernoulli(0.5)) {
    for (auto& plane : p) box_blur(plane, h, w);
  }
  if (rng.bernoulli(0.5)) {  // cutout
    const Rect r = random_rect(rng, h, w, 0.15, 0.3);
    for (auto& plane : p)
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) plane[static_cast<std::size_t>(y) * w + x] = 0.0f;
  }
}

}  // namespace

ImageTile color_jitter(const ImageTile& image, Rng& rng, JitterStrength strength, const JitterBounds& bounds) {
  Planes p = split(image);
  photometric(p, rng, bounds);
  if (strength == JitterStrength::strong) strong_corruptions(p, rng, image.height(), image.width());
  return join(p, image.height(), image.width());
}

std::vector<PseudoPair> build_pseudo_pairs(const std::vector<LabeledTile>& batch, const PairingConfig& cfg,
                                           Rng& rng, const LabelAssigner& assigner) {
  check(!batch.empty(), ErrorKind::empty_batch, "cannot pair an empty batch");
  cfg.validate();
  for (const auto& s : batch) validate(s.image, s.mask);
  const std::vector<int> perm = permute_batch(static_cast<int>(batch.size()), rng);
  std::vector<PseudoPair> pairs;
  pairs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledTile& a = batch[i];
    if (rng.uniform() < cfg.self_contrast_p) {
      ImageTile b = color_jitter(a.image, rng, cfg.jitter_strength, cfg.jitter);
      BinaryChangeMask change = assigner(a.mask, a.mask);
      pairs.emplace_back(a.image, std::move(b), a.mask, a.mask, std::move(change), PairProvenance::self_contrast);
    } else {
      const LabeledTile& b = batch[perm[i]];
      BinaryChangeMask change = assigner(a.mask, b.mask);
      pairs.emplace_back(a.image, b.image, a.mask, b.mask, std::move(change), PairProvenance::permutation);
    }
  }
  return pairs;
}

}  // namespace starcd::pairing
