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

// Synthetic scenes, training augmentation and the on-disk dataset layout.
//
//   <root>/dataset.toml                      num_classes, ignore_value
//   <root>/<split>.txt                       one tile id per line
//   <root>/<split>/images/<id>.png           8-bit gray or RGB
//   <root>/<split>/masks/<id>.png            8-bit, pixel = class id, 255 = ignore
//   <root>/<split>/images_t2/<id>.png        bitemporal splits only
//   <root>/<split>/masks_t2/<id>.png
//   <root>/<split>/change/<id>.png           0 / 1 / 255
//
// A split is bitemporal iff its images_t2 directory exists.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "starcd/core/rng.hpp"
#include "starcd/core/types.hpp"
#include "starcd/metrics/metrics.hpp"
#include "starcd/pairing/pairing.hpp"

namespace starcd::data {

using pairing::LabeledTile;

// -- Synthetic world --

enum class ObjectKind { rectangle, ellipse };

struct SyntheticWorldConfig {
  int tile_size = 32;
  int channels = 3;
  int min_objects = 1;
  int max_objects = 3;
  std::vector<ObjectKind> object_kinds = {ObjectKind::rectangle, ObjectKind::ellipse};
  int min_object_size = 5;
  int max_object_size = 11;
  int num_classes = 2;
  std::uint64_t background_texture_seed = 7;
  double change_rate = 0.3;

  // Background-labelled shapes whose color lies between the background and
  // the class-1 color (distractor_blend = 0 is background, 1 is class 1).
  int min_distractors = 0;
  int max_distractors = 3;
  double distractor_blend = 0.6;

  double object_color_spread = 0.05;
  double texture_amplitude = 0.06;
  double sensor_noise = 0.02;
  // Half-width of the per-channel gain applied to time-2 images.
  double radiometric_jitter = 0.2;
  int max_placement_retries = 200;

  void validate() const;
};

struct SceneObject {
  ObjectKind kind;
  int label;  // class id; distractors carry 0
  bool distractor;
  int y0, x0, h, w;
  float color[3];

  bool contains(int y, int x) const;
};

/// Tile-level state shared by both times of a bitemporal pair.
struct Scene {
  float background[3];
  struct Wave {
    double amplitude, fy, fx, phase;
  };
  std::vector<Wave> waves;
  std::vector<SceneObject> objects;
};

struct Radiometry {
  float gain[3] = {1.0f, 1.0f, 1.0f};
  float offset[3] = {0.0f, 0.0f, 0.0f};
};

/// Per-class mean colors derived from background_texture_seed; index 0 is
/// the background.
std::vector<std::array<float, 3>> class_palette(const SyntheticWorldConfig& cfg);

Scene sample_scene(const SyntheticWorldConfig& cfg, Rng& rng);
LabeledTile render_scene(const Scene& scene, const SyntheticWorldConfig& cfg, const Radiometry& radiometry,
                         Rng& noise_rng);

std::vector<LabeledTile> gen_single_temporal(const SyntheticWorldConfig& cfg, int n, Rng& rng);

/// Time 2 toggles round(change_rate * #objects) of the time-1 objects
/// (removal, or re-classing when more than one object class exists), adds a
/// new object for about half of the toggles where free space allows, and
/// applies a random global gain and offset. The change mask is
/// assign_change(mask_1, mask_2).
std::vector<PseudoPair> gen_bitemporal_eval(const SyntheticWorldConfig& cfg, int n, Rng& rng);

// -- Augmentation --

struct AugmentConfig {
  bool flips = true;
  bool rot90 = true;
  bool scale_jitter = true;
  double scale_min = 0.75;
  double scale_max = 1.25;
  int crop_size = 0;  // 0 keeps the tile size
  bool color_jitter = true;
  pairing::JitterBounds jitter;

  static AugmentConfig none();
  void validate() const;
};

/// Geometric primitives, applied identically to images and masks.
ImageTile flip_horizontal(const ImageTile& t);
ImageTile flip_vertical(const ImageTile& t);
ImageTile rotate90(const ImageTile& t);  // counter-clockwise
SemanticMask flip_horizontal(const SemanticMask& m);
SemanticMask flip_vertical(const SemanticMask& m);
SemanticMask rotate90(const SemanticMask& m);
/// Bilinear image resize / nearest-neighbour mask resize to an explicit size.
ImageTile resize(const ImageTile& t, int height, int width);
SemanticMask resize(const SemanticMask& m, int height, int width);

/// Draw order: hflip, vflip, k in {0..3}, scale, crop offset, then color
/// jitter. Regions outside a down-scaled tile are zero in the image and
/// ignore in the mask.
LabeledTile augment_train(const LabeledTile& sample, const AugmentConfig& cfg, Rng& rng);

// -- PNG I/O --

void write_png(const std::filesystem::path& path, const ImageTile& image);
void write_png(const std::filesystem::path& path, const SemanticMask& mask);
void write_png(const std::filesystem::path& path, const BinaryChangeMask& mask);
/// Palette PNG with transparency, one index per ErrorCategory.
void write_png(const std::filesystem::path& path, const metrics::ErrorMap& map);

ImageTile read_png_image(const std::filesystem::path& path);
/// Raw 8-bit gray values; RGB or 16-bit files are rejected.
std::vector<int> read_png_labels(const std::filesystem::path& path, int& height, int& width);

// -- Datasets --

enum class SplitMode { single_temporal, bitemporal };

struct DatasetManifest {
  std::filesystem::path root;
  int num_classes = 2;
  int ignore_value = kIgnoreValue;
  std::map<std::string, std::vector<std::string>> splits;
  std::map<std::string, SplitMode> modes;

  bool has_split(const std::string& split) const { return splits.count(split) != 0; }
  SplitMode mode(const std::string& split) const;
  const std::vector<std::string>& ids(const std::string& split) const;
};

/// Throws ErrorKind::data for a missing dataset.toml, list file or tile.
DatasetManifest load_manifest(const std::filesystem::path& root);

/// Errors name the split and tile id.
LabeledTile load_single(const DatasetManifest& m, const std::string& split, const std::string& id);
PseudoPair load_pair(const DatasetManifest& m, const std::string& split, const std::string& id);
std::vector<LabeledTile> load_single_split(const DatasetManifest& m, const std::string& split);
std::vector<PseudoPair> load_pair_split(const DatasetManifest& m, const std::string& split);

/// Writers create directories and append ids to the split list.
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path root, int num_classes, int ignore_value = kIgnoreValue);

  void add(const std::string& split, const std::string& id, const LabeledTile& tile);
  void add(const std::string& split, const std::string& id, const PseudoPair& pair);
  /// Writes dataset.toml and the list files.
  void finish();

 private:
  std::filesystem::path root_;
  int num_classes_;
  int ignore_value_;
  std::map<std::string, std::vector<std::string>> ids_;
};

/// Seeded shuffled batches of indices into [0, n). Each epoch is a fresh
/// permutation derived from (seed, epoch); a short trailing batch is
/// dropped so every batch has batch_size entries.
class BatchSampler {
 public:
  BatchSampler(int n, int batch_size, std::uint64_t seed);

  std::vector<int> next();
  int epoch() const { return epoch_; }
  int batches_per_epoch() const { return n_ / batch_size_; }

 private:
  void reshuffle();

  int n_;
  int batch_size_;
  std::uint64_t seed_;
  int epoch_ = -1;
  std::size_t cursor_ = 0;
  std::vector<int> order_;
};

}  // namespace starcd::data
