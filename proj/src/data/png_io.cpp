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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "starcd/data/data.hpp"

namespace starcd::data {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  check(f != nullptr, ErrorKind::io, "cannot open " + path.string());
  return f;
}

// libpng reports errors through longjmp; the message is kept for the throw
// that follows in C++ code.
thread_local std::string png_message;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  png_message = msg;
  png_longjmp(png, 1);
}
void png_warn(png_structp, png_const_charp) {}

struct Palette {
  std::vector<png_color> colors;
  std::vector<png_byte> alpha;
};

// rows: height rows of width * channels bytes.
void write_rows(const std::filesystem::path& path, int width, int height, int color_type,
                const std::vector<std::uint8_t>& bytes, const Palette* palette = nullptr) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  File f = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  check(png != nullptr, ErrorKind::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_write_struct(&p, &i); }
  } guard{png, info};
  if (setjmp(png_jmpbuf(png))) throw Error(ErrorKind::io, path.string() + ": " + png_message);
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (palette != nullptr) {
    png_set_PLTE(png, info, palette->colors.data(), static_cast<int>(palette->colors.size()));
    png_set_tRNS(png, info, palette->alpha.data(), static_cast<int>(palette->alpha.size()), nullptr);
  }
  png_write_info(png, info);
  const std::size_t stride = bytes.size() / static_cast<std::size_t>(height);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * stride));
  png_write_end(png, nullptr);
}

struct Decoded {
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> bytes;
};

Decoded read_rows(const std::filesystem::path& path, bool expand) {
  check(std::filesystem::exists(path), ErrorKind::data, "missing file " + path.string());
  File f = open(path, "rb");
  png_byte sig[8];
  check(std::fread(sig, 1, 8, f.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0, ErrorKind::data,
        "not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  check(png != nullptr, ErrorKind::io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_read_struct(&p, &i, nullptr); }
  } guard{png, info};
  if (setjmp(png_jmpbuf(png))) throw Error(ErrorKind::data, path.string() + ": " + png_message);
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (expand) {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  } else {
    check(bit_depth == 8 && color_type == PNG_COLOR_TYPE_GRAY, ErrorKind::data,
          "label raster must be 8-bit single channel: " + path.string());
  }
  png_read_update_info(png, info);
  Decoded d;
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  d.bytes.resize(stride * d.height);
  std::vector<png_bytep> rows(d.height);
  for (int y = 0; y < d.height; ++y) rows[y] = d.bytes.data() + static_cast<std::size_t>(y) * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return d;
}

std::uint8_t to_byte(int v) {
  check(v >= 0 && v <= 255, ErrorKind::out_of_range_label, "label " + std::to_string(v) + " does not fit 8 bits");
  return static_cast<std::uint8_t>(v);
}

}  // namespace

void write_png(const std::filesystem::path& path, const ImageTile& image) {
  check(image.channels() == 1 || image.channels() == 3, ErrorKind::invalid_argument,
        "only 1- or 3-channel images can be written as PNG");
  const int h = image.height(), w = image.width(), c = image.channels();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        const float v = std::clamp(image.at(k, y, x), 0.0f, 1.0f);
        bytes[(static_cast<std::size_t>(y) * w + x) * c + k] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  write_rows(path, w, h, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, bytes);
}

void write_png(const std::filesystem::path& path, const SemanticMask& mask) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(mask.labels().size());
  for (int v : mask.labels()) bytes.push_back(to_byte(v));
  write_rows(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, bytes);
}

void write_png(const std::filesystem::path& path, const BinaryChangeMask& mask) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(mask.values().size());
  for (int v : mask.values()) bytes.push_back(to_byte(v));
  write_rows(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, bytes);
}

void write_png(const std::filesystem::path& path, const metrics::ErrorMap& map) {
  Palette pal;
  for (const auto& e : metrics::error_palette()) {
    pal.colors.push_back(png_color{e.r, e.g, e.b});
    pal.alpha.push_back(e.a);
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(map.cells.size());
  for (auto c : map.cells) bytes.push_back(static_cast<std::uint8_t>(c));
  write_rows(path, map.width, map.height, PNG_COLOR_TYPE_PALETTE, bytes, &pal);
}

ImageTile read_png_image(const std::filesystem::path& path) {
  const Decoded d = read_rows(path, true);
  std::vector<float> data(static_cast<std::size_t>(d.channels) * d.height * d.width);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      for (int k = 0; k < d.channels; ++k)
        data[(static_cast<std::size_t>(k) * d.height + y) * d.width + x] =
            static_cast<float>(d.bytes[(static_cast<std::size_t>(y) * d.width + x) * d.channels + k]) / 255.0f;
  return ImageTile(d.channels, d.height, d.width, std::move(data));
}

std::vector<int> read_png_labels(const std::filesystem::path& path, int& height, int& width) {
  const Decoded d = read_rows(path, false);
  height = d.height;
  width = d.width;
  return std::vector<int>(d.bytes.begin(), d.bytes.end());
}

}  // namespace starcd::data
