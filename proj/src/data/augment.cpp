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

#include "starcd/data/data.hpp"

namespace starcd::data {

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.flips = false;
  c.rot90 = false;
  c.scale_jitter = false;
  c.color_jitter = false;
  return c;
}

void AugmentConfig::validate() const {
  check(scale_min > 0.0 && scale_max >= scale_min, ErrorKind::config, "scale jitter range must be positive");
  check(crop_size >= 0, ErrorKind::config, "crop_size must be non-negative");
}

namespace {

// Generic remap: out(y, x) = in(src_y(y, x), src_x(y, x)).
template <typename F>
ImageTile remap(const ImageTile& t, int oh, int ow, F src) {
  std::vector<float> out(static_cast<std::size_t>(t.channels()) * oh * ow);
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const auto [sy, sx] = src(y, x);
        out[(static_cast<std::size_t>(c) * oh + y) * ow + x] = t.at(c, sy, sx);
      }
  return ImageTile(t.channels(), oh, ow, std::move(out));
}

template <typename F>
SemanticMask remap(const SemanticMask& m, int oh, int ow, F src) {
  std::vector<int> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const auto [sy, sx] = src(y, x);
      out[static_cast<std::size_t>(y) * ow + x] = m.at(sy, sx);
    }
  return SemanticMask(oh, ow, m.num_classes(), std::move(out), m.ignore_value());
}

struct Pt {
  int y, x;
};

}  // namespace

ImageTile flip_horizontal(const ImageTile& t) {
  return remap(t, t.height(), t.width(), [&](int y, int x) { return Pt{y, t.width() - 1 - x}; });
}
ImageTile flip_vertical(const ImageTile& t) {
  return remap(t, t.height(), t.width(), [&](int y, int x) { return Pt{t.height() - 1 - y, x}; });
}
ImageTile rotate90(const ImageTile& t) {
  return remap(t, t.width(), t.height(), [&](int y, int x) { return Pt{x, t.width() - 1 - y}; });
}
SemanticMask flip_horizontal(const SemanticMask& m) {
  return remap(m, m.height(), m.width(), [&](int y, int x) { return Pt{y, m.width() - 1 - x}; });
}
SemanticMask flip_vertical(const SemanticMask& m) {
  return remap(m, m.height(), m.width(), [&](int y, int x) { return Pt{m.height() - 1 - y, x}; });
}
SemanticMask rotate90(const SemanticMask& m) {
  return remap(m, m.width(), m.height(), [&](int y, int x) { return Pt{x, m.width() - 1 - y}; });
}

ImageTile resize(const ImageTile& t, int height, int width) {
  check(height >= 1 && width >= 1, ErrorKind::invalid_argument, "resize target must be positive");
  const double sy = static_cast<double>(t.height()) / height;
  const double sx = static_cast<double>(t.width()) / width;
  std::vector<float> out(static_cast<std::size_t>(t.channels()) * height * width);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, t.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, t.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, t.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, t.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < t.channels(); ++c) {
        const double top = t.at(c, y0, x0) * (1 - wx) + t.at(c, y0, x1) * wx;
        const double bot = t.at(c, y1, x0) * (1 - wx) + t.at(c, y1, x1) * wx;
        out[(static_cast<std::size_t>(c) * height + y) * width + x] = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return ImageTile(t.channels(), height, width, std::move(out));
}

SemanticMask resize(const SemanticMask& m, int height, int width) {
  check(height >= 1 && width >= 1, ErrorKind::invalid_argument, "resize target must be positive");
  const double sy = static_cast<double>(m.height()) / height;
  const double sx = static_cast<double>(m.width()) / width;
  return remap(m, height, width, [&](int y, int x) {
    return Pt{std::min(static_cast<int>((y + 0.5) * sy), m.height() - 1),
              std::min(static_cast<int>((x + 0.5) * sx), m.width() - 1)};
  });
}

LabeledTile augment_train(const LabeledTile& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  validate(sample.image, sample.mask);
  const int crop = cfg.crop_size == 0 ? std::min(sample.image.height(), sample.image.width()) : cfg.crop_size;
  check(crop <= sample.image.height() && crop <= sample.image.width(), ErrorKind::config,
        "crop_size " + std::to_string(crop) + " exceeds the tile size");

  ImageTile img = sample.image;
  SemanticMask mask = sample.mask;
  if (cfg.flips) {
    if (rng.bernoulli(0.5)) {
      img = flip_horizontal(img);
      mask = flip_horizontal(mask);
    }
    if (rng.bernoulli(0.5)) {
      img = flip_vertical(img);
      mask = flip_vertical(mask);
    }
  }
  if (cfg.rot90) {
    const int k = rng.uniform_int(0, 3);
    for (int i = 0; i < k; ++i) {
      img = rotate90(img);
      mask = rotate90(mask);
    }
  }
  if (cfg.scale_jitter) {
    const double s = rng.uniform(cfg.scale_min, cfg.scale_max);
    const int h = std::max(1, static_cast<int>(std::lround(img.height() * s)));
    const int w = std::max(1, static_cast<int>(std::lround(img.width() * s)));
    if (h != img.height() || w != img.width()) {
      img = resize(img, h, w);
      mask = resize(mask, h, w);
    }
  }
  if (img.height() != crop || img.width() != crop) {
    // Pad to at least crop x crop, then take a random window.
    const int ch = std::max(img.height(), crop), cw = std::max(img.width(), crop);
    const int oy = rng.uniform_int(0, ch - crop), ox = rng.uniform_int(0, cw - crop);
    std::vector<float> pix(static_cast<std::size_t>(img.channels()) * crop * crop, 0.0f);
    std::vector<int> lab(static_cast<std::size_t>(crop) * crop, mask.ignore_value());
    for (int y = 0; y < crop; ++y)
      for (int x = 0; x < crop; ++x) {
        const int sy = y + oy, sx = x + ox;
        if (sy >= img.height() || sx >= img.width()) continue;
        for (int c = 0; c < img.channels(); ++c)
          pix[(static_cast<std::size_t>(c) * crop + y) * crop + x] = img.at(c, sy, sx);
        lab[static_cast<std::size_t>(y) * crop + x] = mask.at(sy, sx);
      }
    img = ImageTile(img.channels(), crop, crop, std::move(pix));
    mask = SemanticMask(crop, crop, mask.num_classes(), std::move(lab), mask.ignore_value());
  }
  if (cfg.color_jitter) img = pairing::color_jitter(img, rng, pairing::JitterStrength::default_color_jitter, cfg.jitter);
  return {std::move(img), std::move(mask)};
}

}  // namespace starcd::data
