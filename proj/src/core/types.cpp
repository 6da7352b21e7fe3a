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

#include "starcd/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace starcd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::non_finite_value: return "non-finite-value";
    case ErrorKind::out_of_range_label: return "out-of-range-label";
    case ErrorKind::class_count_mismatch: return "class-count-mismatch";
    case ErrorKind::empty_batch: return "empty-batch";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::missing_input: return "missing-input";
    case ErrorKind::placement_failed: return "placement-failed";
    case ErrorKind::config: return "config-error";
    case ErrorKind::data: return "data-error";
    case ErrorKind::io: return "io-error";
  }
  return "unknown";
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << '[' << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w << ']';
}

std::string_view to_string(PairProvenance p) {
  switch (p) {
    case PairProvenance::permutation: return "permutation";
    case PairProvenance::self_contrast: return "self_contrast";
    case PairProvenance::bitemporal: return "bitemporal";
  }
  return "unknown";
}

namespace {

std::string dims(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

void check_extent(int h, int w, const char* what) {
  check(h >= 1 && w >= 1, ErrorKind::shape_mismatch,
        std::string(what) + " needs height >= 1 and width >= 1, got " + dims(h, w));
}

}  // namespace

ImageTile::ImageTile(int channels, int height, int width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  validate(*this);
}

ImageTile ImageTile::filled(int channels, int height, int width, float value) {
  check(channels >= 1 && height >= 1 && width >= 1, ErrorKind::shape_mismatch, "empty tile");
  return ImageTile(channels, height, width,
                   std::vector<float>(static_cast<std::size_t>(channels) * height * width, value));
}

SemanticMask::SemanticMask(int height, int width, int num_classes, std::vector<int> labels,
                           int ignore_value)
    : height_(height), width_(width), num_classes_(num_classes), ignore_value_(ignore_value),
      labels_(std::move(labels)) {
  validate(*this);
}

SemanticMask SemanticMask::filled(int height, int width, int num_classes, int label, int ignore_value) {
  check_extent(height, width, "mask");
  return SemanticMask(height, width, num_classes,
                      std::vector<int>(static_cast<std::size_t>(height) * width, label), ignore_value);
}

BinaryChangeMask::BinaryChangeMask(int height, int width, std::vector<int> values, int ignore_value)
    : height_(height), width_(width), ignore_value_(ignore_value), values_(std::move(values)) {
  validate(*this);
}

std::size_t BinaryChangeMask::count(int value) const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), value));
}

PseudoPair::PseudoPair(ImageTile image_a, ImageTile image_b, SemanticMask mask_a, SemanticMask mask_b,
                       BinaryChangeMask change, PairProvenance provenance)
    : image_a_(std::move(image_a)), image_b_(std::move(image_b)), mask_a_(std::move(mask_a)),
      mask_b_(std::move(mask_b)), change_(std::move(change)), provenance_(provenance) {
  validate(*this);
}

PredictionBundle::PredictionBundle(Tensor<float> semantic_logits_a, Tensor<float> semantic_logits_b,
                                   Tensor<float> change_logits_fwd,
                                   std::optional<Tensor<float>> change_logits_rev)
    : semantic_a_(std::move(semantic_logits_a)), semantic_b_(std::move(semantic_logits_b)),
      change_fwd_(std::move(change_logits_fwd)), change_rev_(std::move(change_logits_rev)) {
  validate(*this);
}

void validate(const ImageTile& tile) {
  check(tile.channels() >= 1, ErrorKind::shape_mismatch, "tile needs at least one channel");
  check_extent(tile.height(), tile.width(), "tile");
  const auto expected = static_cast<std::size_t>(tile.channels()) * tile.height() * tile.width();
  check(tile.data().size() == expected, ErrorKind::shape_mismatch,
        "tile data length " + std::to_string(tile.data().size()) + " != " + std::to_string(expected));
  const auto bad = std::find_if(tile.data().begin(), tile.data().end(),
                                [](float v) { return !std::isfinite(v); });
  check(bad == tile.data().end(), ErrorKind::non_finite_value,
        "tile value at offset " + std::to_string(bad - tile.data().begin()) + " is not finite");
}

void validate(const SemanticMask& mask) {
  check_extent(mask.height(), mask.width(), "mask");
  check(mask.num_classes() >= 1, ErrorKind::invalid_argument, "num_classes must be positive");
  check(mask.ignore_value() < 0 || mask.ignore_value() >= mask.num_classes(), ErrorKind::invalid_argument,
        "ignore value " + std::to_string(mask.ignore_value()) + " collides with a class id");
  check(mask.labels().size() == static_cast<std::size_t>(mask.height()) * mask.width(),
        ErrorKind::shape_mismatch, "mask label count does not match " + dims(mask.height(), mask.width()));
  for (std::size_t i = 0; i < mask.labels().size(); ++i) {
    const int v = mask.labels()[i];
    check((v >= 0 && v < mask.num_classes()) || v == mask.ignore_value(), ErrorKind::out_of_range_label,
          "label " + std::to_string(v) + " at offset " + std::to_string(i) + " outside [0, " +
              std::to_string(mask.num_classes()) + ")");
  }
}

void validate(const BinaryChangeMask& mask) {
  check_extent(mask.height(), mask.width(), "change mask");
  check(mask.values().size() == static_cast<std::size_t>(mask.height()) * mask.width(),
        ErrorKind::shape_mismatch, "change mask length does not match " + dims(mask.height(), mask.width()));
  for (std::size_t i = 0; i < mask.values().size(); ++i) {
    const int v = mask.values()[i];
    check(v == 0 || v == 1 || v == mask.ignore_value(), ErrorKind::out_of_range_label,
          "change value " + std::to_string(v) + " at offset " + std::to_string(i));
  }
}

void validate(const ImageTile& tile, const SemanticMask& mask) {
  check(tile.height() == mask.height() && tile.width() == mask.width(), ErrorKind::shape_mismatch,
        "tile " + dims(tile.height(), tile.width()) + " vs mask " + dims(mask.height(), mask.width()));
}

void validate(const SemanticMask& a, const SemanticMask& b) {
  check(a.height() == b.height() && a.width() == b.width(), ErrorKind::shape_mismatch,
        "mask " + dims(a.height(), a.width()) + " vs " + dims(b.height(), b.width()));
  check(a.num_classes() == b.num_classes(), ErrorKind::class_count_mismatch,
        std::to_string(a.num_classes()) + " vs " + std::to_string(b.num_classes()) + " classes");
  check(a.ignore_value() == b.ignore_value(), ErrorKind::invalid_argument, "ignore values differ");
}

void validate(const PseudoPair& pair) {
  validate(pair.image_a(), pair.mask_a());
  validate(pair.image_b(), pair.mask_b());
  validate(pair.mask_a(), pair.mask_b());
  check(pair.image_a().channels() == pair.image_b().channels(), ErrorKind::shape_mismatch,
        "pair images differ in channel count");
  check(pair.change().height() == pair.mask_a().height() && pair.change().width() == pair.mask_a().width(),
        ErrorKind::shape_mismatch, "change mask shape differs from the pair");
}

void validate(const PredictionBundle& bundle) {
  const Shape& a = bundle.semantic_logits_a().shape();
  const Shape& b = bundle.semantic_logits_b().shape();
  const Shape& f = bundle.change_logits_fwd().shape();
  require_same_shape(a, b, "semantic logits");
  check(f.c == 1 && f.n == a.n && f.same_spatial(a), ErrorKind::shape_mismatch,
        "change logits " + to_string(f) + " vs semantic " + to_string(a));
  if (bundle.change_logits_rev()) {
    require_same_shape(bundle.change_logits_rev()->shape(), f, "reverse change logits");
  }
}

}  // namespace starcd
