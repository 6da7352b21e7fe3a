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

// Change supervision from single-temporal data.
//
// A mini-batch of labeled images is paired with a random permutation of
// itself; the change target of each pair is the cell-wise label inequality of
// the two masks. With probability p a pair is instead built from the image
// and a color-jittered copy of itself, which yields spatially aligned pairs
// whose change target is zero.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "starcd/core/rng.hpp"
#include "starcd/core/types.hpp"

namespace starcd::pairing {

enum class JitterStrength { default_color_jitter, strong };

/// Half-widths of the random photometric factors. Brightness and contrast
/// factors are drawn from [1 - b, 1 + b]; hue_shift is a fraction of a full
/// hue turn.
struct JitterBounds {
  double brightness = 0.3;
  double contrast = 0.3;
  double saturation = 0.3;
  double hue_shift = 0.05;

  static JitterBounds none() { return {0.0, 0.0, 0.0, 0.0}; }
};

struct PairingConfig {
  double self_contrast_p = 0.9;
  JitterStrength jitter_strength = JitterStrength::default_color_jitter;
  JitterBounds jitter;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniformly sampled permutation of {0, ..., n-1}.
std::vector<int> permute_batch(int n, Rng& rng);

/// 1 where the labels differ, 0 where they agree, ignore where either input
/// is ignore.
BinaryChangeMask assign_change(const SemanticMask& mask_i, const SemanticMask& mask_j);

using LabelAssigner = std::function<BinaryChangeMask(const SemanticMask&, const SemanticMask&)>;

/// Per-channel photometric perturbation clamped to [0, 1]. Zero bounds with
/// default strength return the input unchanged.
ImageTile color_jitter(const ImageTile& image, Rng& rng, JitterStrength strength,
                       const JitterBounds& bounds = {});

struct LabeledTile {
  ImageTile image;
  SemanticMask mask;
};

/// One pseudo pair per input, in input order. The RNG is consumed as: the
/// permutation first, then for each index one uniform draw and, for
/// self-contrast pairs, the jitter draws.
std::vector<PseudoPair> build_pseudo_pairs(const std::vector<LabeledTile>& batch, const PairingConfig& cfg,
                                           Rng& rng, const LabelAssigner& assigner = assign_change);

}  // namespace starcd::pairing
