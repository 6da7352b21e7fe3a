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

#include <fstream>
#include <numeric>

#include <toml.hpp>

#include "starcd/data/data.hpp"

namespace fs = std::filesystem;

namespace starcd::data {

SplitMode DatasetManifest::mode(const std::string& split) const {
  const auto it = modes.find(split);
  check(it != modes.end(), ErrorKind::data, "dataset has no split '" + split + "'");
  return it->second;
}

const std::vector<std::string>& DatasetManifest::ids(const std::string& split) const {
  const auto it = splits.find(split);
  check(it != splits.end(), ErrorKind::data, "dataset has no split '" + split + "'");
  return it->second;
}

DatasetManifest load_manifest(const fs::path& root) {
  const fs::path meta = root / "dataset.toml";
  check(fs::exists(meta), ErrorKind::data, "missing " + meta.string());
  DatasetManifest m;
  m.root = root;
  try {
    const toml::table tbl = toml::parse_file(meta.string());
    m.num_classes = static_cast<int>(tbl["num_classes"].value_or<std::int64_t>(2));
    m.ignore_value = static_cast<int>(tbl["ignore_value"].value_or<std::int64_t>(kIgnoreValue));
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::data, "cannot parse " + meta.string() + ": " + std::string(e.description()));
  }
  check(m.num_classes >= 2 && m.num_classes <= 255, ErrorKind::data, "num_classes must lie in [2, 255]");
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    const std::string split = entry.path().stem().string();
    std::ifstream in(entry.path());
    std::vector<std::string> ids;
    for (std::string line; std::getline(in, line);) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
    m.splits[split] = std::move(ids);
    m.modes[split] = fs::is_directory(root / split / "images_t2") ? SplitMode::bitemporal : SplitMode::single_temporal;
  }
  check(!m.splits.empty(), ErrorKind::data, "no <split>.txt list files under " + root.string());
  return m;
}

namespace {

fs::path tile_path(const DatasetManifest& m, const std::string& split, const char* dir, const std::string& id) {
  return m.root / split / dir / (id + ".png");
}

SemanticMask read_mask(const DatasetManifest& m, const fs::path& path, const std::string& where) {
  int h = 0, w = 0;
  std::vector<int> labels = read_png_labels(path, h, w);
  for (int v : labels)
    check(v == m.ignore_value || (v >= 0 && v < m.num_classes), ErrorKind::data,
          where + ": label " + std::to_string(v) + " is neither a declared class nor ignore");
  return SemanticMask(h, w, m.num_classes, std::move(labels), m.ignore_value);
}

template <typename F>
auto with_context(const std::string& where, F f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorKind::data, where + ": " + e.what());
  }
}

}  // namespace

LabeledTile load_single(const DatasetManifest& m, const std::string& split, const std::string& id) {
  const std::string where = "tile '" + id + "' in split '" + split + "'";
  return with_context(where, [&] {
    ImageTile img = read_png_image(tile_path(m, split, "images", id));
    SemanticMask mask = read_mask(m, tile_path(m, split, "masks", id), where);
    check(img.height() == mask.height() && img.width() == mask.width(), ErrorKind::data,
          "image and mask differ in shape");
    return LabeledTile{std::move(img), std::move(mask)};
  });
}

PseudoPair load_pair(const DatasetManifest& m, const std::string& split, const std::string& id) {
  const std::string where = "tile '" + id + "' in split '" + split + "'";
  check(m.mode(split) == SplitMode::bitemporal, ErrorKind::data, "split '" + split + "' is not bitemporal");
  return with_context(where, [&] {
    ImageTile a = read_png_image(tile_path(m, split, "images", id));
    ImageTile b = read_png_image(tile_path(m, split, "images_t2", id));
    SemanticMask ma = read_mask(m, tile_path(m, split, "masks", id), where);
    SemanticMask mb = read_mask(m, tile_path(m, split, "masks_t2", id), where);
    int h = 0, w = 0;
    std::vector<int> change = read_png_labels(tile_path(m, split, "change", id), h, w);
    for (int v : change)
      check(v == 0 || v == 1 || v == m.ignore_value, ErrorKind::data, "change raster holds a value other than 0/1/ignore");
    check(a.height() == h && a.width() == w, ErrorKind::data, "change raster differs in shape from the images");
    return PseudoPair(std::move(a), std::move(b), std::move(ma), std::move(mb),
                      BinaryChangeMask(h, w, std::move(change), m.ignore_value), PairProvenance::bitemporal);
  });
}

std::vector<LabeledTile> load_single_split(const DatasetManifest& m, const std::string& split) {
  std::vector<LabeledTile> out;
  for (const auto& id : m.ids(split)) out.push_back(load_single(m, split, id));
  return out;
}

std::vector<PseudoPair> load_pair_split(const DatasetManifest& m, const std::string& split) {
  std::vector<PseudoPair> out;
  for (const auto& id : m.ids(split)) out.push_back(load_pair(m, split, id));
  return out;
}

DatasetWriter::DatasetWriter(fs::path root, int num_classes, int ignore_value)
    : root_(std::move(root)), num_classes_(num_classes), ignore_value_(ignore_value) {
  fs::create_directories(root_);
}

void DatasetWriter::add(const std::string& split, const std::string& id, const LabeledTile& tile) {
  write_png(root_ / split / "images" / (id + ".png"), tile.image);
  write_png(root_ / split / "masks" / (id + ".png"), tile.mask);
  ids_[split].push_back(id);
}

void DatasetWriter::add(const std::string& split, const std::string& id, const PseudoPair& pair) {
  write_png(root_ / split / "images" / (id + ".png"), pair.image_a());
  write_png(root_ / split / "images_t2" / (id + ".png"), pair.image_b());
  write_png(root_ / split / "masks" / (id + ".png"), pair.mask_a());
  write_png(root_ / split / "masks_t2" / (id + ".png"), pair.mask_b());
  write_png(root_ / split / "change" / (id + ".png"), pair.change());
  ids_[split].push_back(id);
}

void DatasetWriter::finish() {
  {
    std::ofstream meta(root_ / "dataset.toml");
    meta << "num_classes = " << num_classes_ << "\nignore_value = " << ignore_value_ << "\n";
    check(meta.good(), ErrorKind::io, "cannot write dataset.toml");
  }
  for (const auto& [split, ids] : ids_) {
    std::ofstream list(root_ / (split + ".txt"));
    for (const auto& id : ids) list << id << "\n";
    check(list.good(), ErrorKind::io, "cannot write list file for split " + split);
  }
}

BatchSampler::BatchSampler(int n, int batch_size, std::uint64_t seed) : n_(n), batch_size_(batch_size), seed_(seed) {
  check(batch_size >= 1, ErrorKind::config, "batch_size must be positive");
  check(n >= batch_size, ErrorKind::data,
        "split has " + std::to_string(n) + " tiles, fewer than batch_size " + std::to_string(batch_size));
}

void BatchSampler::reshuffle() {
  ++epoch_;
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng = Rng(seed_).derive(static_cast<std::uint64_t>(epoch_));
  for (int i = n_ - 1; i > 0; --i) std::swap(order_[i], order_[rng.uniform_int(0, i)]);
  cursor_ = 0;
}

std::vector<int> BatchSampler::next() {
  if (epoch_ < 0 || cursor_ + batch_size_ > order_.size()) reshuffle();
  std::vector<int> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                         order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
  cursor_ += batch_size_;
  return batch;
}

}  // namespace starcd::data
