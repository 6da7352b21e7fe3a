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

// Fixtures shared by the unit and acceptance suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "starcd/core/rng.hpp"
#include "starcd/core/tensor.hpp"
#include "starcd/core/types.hpp"

namespace starcd::testing {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Pair of tensors whose elements differ by more than min_gap everywhere.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> separated_pair(Shape s, Rng& rng, double min_gap = 1e-3) {
  Tensor<T> a = random_tensor<T>(s, rng);
  Tensor<T> b = random_tensor<T>(s, rng);
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (std::abs(static_cast<double>(a[i] - b[i])) <= min_gap) b[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
  }
  return {std::move(a), std::move(b)};
}

inline SemanticMask random_mask(int h, int w, int k, Rng& rng, double ignore_fraction = 0.0) {
  std::vector<int> labels(static_cast<std::size_t>(h) * w);
  for (auto& v : labels) v = rng.bernoulli(ignore_fraction) ? kIgnoreValue : rng.uniform_int(0, k - 1);
  return SemanticMask(h, w, k, std::move(labels));
}

inline BinaryChangeMask random_change(int h, int w, Rng& rng, double ones = 0.5, double ignore_fraction = 0.0) {
  std::vector<int> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = rng.bernoulli(ignore_fraction) ? kIgnoreValue : (rng.bernoulli(ones) ? 1 : 0);
  return BinaryChangeMask(h, w, std::move(v));
}

inline ImageTile random_tile(int c, int h, int w, Rng& rng) {
  std::vector<float> d(static_cast<std::size_t>(c) * h * w);
  for (auto& v : d) v = static_cast<float>(rng.uniform());
  return ImageTile(c, h, w, std::move(d));
}

inline LabelTensor label_tensor(const std::vector<int>& v, Shape s) { return LabelTensor(s, v); }

/// Central difference of f at every element of x; x is restored.
template <typename T>
Tensor<T> numeric_gradient(Tensor<T>& x, const std::function<double()>& f, double h = 1e-6) {
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = saved + static_cast<T>(h);
    const double up = f();
    x[i] = saved - static_cast<T>(h);
    const double down = f();
    x[i] = saved;
    g[i] = static_cast<T>((up - down) / (2 * h));
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor).
template <typename T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-8) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("starcd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  static std::size_t& counter() {
    static std::size_t n = 0;
    return n;
  }
  std::filesystem::path path_;
};

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected a starcd::Error");
}

}  // namespace starcd::testing
