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

#include "starcd/nn/layers.hpp"

#include <cmath>
#include <cstring>

namespace starcd::nn {

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, bool bias)
    : geo_{kernel, stride, kernel / 2},
      weight_(Shape{out_channels, in_channels, kernel, kernel}) {
  if (bias) bias_ = Parameter<T>(Shape{1, out_channels, 1, 1});
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  const Shape& s = weight_.value.shape();
  const double fan_in = static_cast<double>(s.c) * s.h * s.w;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& w : weight_.value.span()) w = static_cast<T>(rng.normal(0.0, stddev));
  if (bias_.defined()) bias_.value.fill(T(0));
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  return kernels::conv2d_forward(x, weight_.value,
                                 bias_.defined() ? bias_.value.span() : std::span<const T>{}, geo_);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, const Tensor<T>& x) {
  kernels::conv2d_backward_params(grad_out, x, geo_, weight_.grad,
                                  bias_.defined() ? bias_.grad.span() : std::span<T>{});
  return kernels::conv2d_backward_input(grad_out, weight_.value, x.shape(), geo_);
}

template <typename T>
void Conv2d<T>::visit(const std::string& prefix, const StateVisitor<T>& v) {
  if (v.param) {
    v.param(prefix + ".weight", weight_);
    if (bias_.defined()) v.param(prefix + ".bias", bias_);
  }
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels)
    : gamma_(Shape{1, channels, 1, 1}), beta_(Shape{1, channels, 1, 1}),
      running_mean_(Shape{1, channels, 1, 1}, T(0)), running_var_(Shape{1, channels, 1, 1}, T(1)) {
  gamma_.value.fill(T(1));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode, Cache* cache) {
  const Shape& s = x.shape();
  check(s.c == gamma_.value.c(), ErrorKind::shape_mismatch,
        "batch norm expects " + std::to_string(gamma_.value.c()) + " channels, got " + to_string(s));
  Tensor<T> y(s);
  std::vector<T> mean(s.c), inv_std(s.c);
  if (mode == Mode::train) {
    const auto st = kernels::channel_stats(x);
    const double count = static_cast<double>(s.n) * s.plane();
    for (int c = 0; c < s.c; ++c) {
      mean[c] = st.mean[c];
      inv_std[c] = T(1) / std::sqrt(st.var[c] + static_cast<T>(kEps));
      const double unbiased = count > 1 ? static_cast<double>(st.var[c]) * count / (count - 1) : 0.0;
      running_mean_[c] = static_cast<T>((1 - kMomentum) * running_mean_[c] + kMomentum * st.mean[c]);
      running_var_[c] = static_cast<T>((1 - kMomentum) * running_var_[c] + kMomentum * unbiased);
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = running_mean_[c];
      inv_std[c] = T(1) / std::sqrt(running_var_[c] + static_cast<T>(kEps));
    }
  }
  if (cache) {
    cache->xhat = Tensor<T>(s);
    cache->inv_std = inv_std;
  }
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      T* xh = cache ? cache->xhat.plane(n, c) : nullptr;
      const T g = gamma_.value[c];
      const T b = beta_.value[c];
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const T v = (src[i] - mean[c]) * inv_std[c];
        if (xh) xh[i] = v;
        dst[i] = g * v + b;
      }
    }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  const Shape& s = grad_out.shape();
  require_same_shape(s, cache.xhat.shape(), "batch norm backward");
  Tensor<T> grad_in(s);
  const T count = static_cast<T>(static_cast<std::size_t>(s.n) * s.plane());
  for (int c = 0; c < s.c; ++c) {
    T sum_g = T(0);
    T sum_gx = T(0);
    for (int n = 0; n < s.n; ++n) {
      const T* g = grad_out.plane(n, c);
      const T* xh = cache.xhat.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        sum_g += g[i];
        sum_gx += g[i] * xh[i];
      }
    }
    gamma_.grad[c] += sum_gx;
    beta_.grad[c] += sum_g;
    const T scale = gamma_.value[c] * cache.inv_std[c] / count;
    for (int n = 0; n < s.n; ++n) {
      const T* g = grad_out.plane(n, c);
      const T* xh = cache.xhat.plane(n, c);
      T* dst = grad_in.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) dst[i] = scale * (count * g[i] - sum_g - xh[i] * sum_gx);
    }
  }
  return grad_in;
}

template <typename T>
void BatchNorm2d<T>::visit(const std::string& prefix, const StateVisitor<T>& v) {
  if (v.param) {
    v.param(prefix + ".gamma", gamma_);
    v.param(prefix + ".beta", beta_);
  }
  if (v.buffer) {
    v.buffer(prefix + ".running_mean", running_mean_);
    v.buffer(prefix + ".running_var", running_var_);
  }
}

template <typename T>
ConvBnRelu<T>::ConvBnRelu(int in_channels, int out_channels, int kernel, int stride)
    : conv_(in_channels, out_channels, kernel, stride, /*bias=*/false), bn_(out_channels) {}

template <typename T>
Tensor<T> ConvBnRelu<T>::forward(const Tensor<T>& x, Mode mode, Cache* cache) {
  Tensor<T> y = bn_.forward(conv_.forward(x), mode, cache ? &cache->bn : nullptr);
  relu_inplace(y);
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

template <typename T>
Tensor<T> ConvBnRelu<T>::backward(const Tensor<T>& grad_out, const Cache& cache) {
  return conv_.backward(bn_.backward(relu_backward(grad_out, cache.output), cache.bn), cache.input);
}

template <typename T>
void ConvBnRelu<T>::visit(const std::string& prefix, const StateVisitor<T>& v) {
  conv_.visit(prefix + ".conv", v);
  bn_.visit(prefix + ".bn", v);
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.span()) v = v > T(0) ? v : T(0);
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& output) {
  require_same_shape(grad_out.shape(), output.shape(), "relu backward");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = output[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  require_same_shape(dst.shape(), src.shape(), "add");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.n() == b.n() && a.shape().same_spatial(b.shape()), ErrorKind::shape_mismatch,
        "concat " + to_string(a.shape()) + " with " + to_string(b.shape()));
  Tensor<T> out(Shape{a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::size_t pa = static_cast<std::size_t>(a.c()) * a.shape().plane();
  const std::size_t pb = static_cast<std::size_t>(b.c()) * b.shape().plane();
  for (int n = 0; n < a.n(); ++n) {
    std::memcpy(out.plane(n, 0), a.plane(n, 0), pa * sizeof(T));
    std::memcpy(out.plane(n, a.c()), b.plane(n, 0), pb * sizeof(T));
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels) {
  check(first_channels > 0 && first_channels < x.c(), ErrorKind::shape_mismatch, "split point out of range");
  Tensor<T> a(Shape{x.n(), first_channels, x.h(), x.w()});
  Tensor<T> b(Shape{x.n(), x.c() - first_channels, x.h(), x.w()});
  const std::size_t pa = static_cast<std::size_t>(a.c()) * a.shape().plane();
  const std::size_t pb = static_cast<std::size_t>(b.c()) * b.shape().plane();
  for (int n = 0; n < x.n(); ++n) {
    std::memcpy(a.plane(n, 0), x.plane(n, 0), pa * sizeof(T));
    std::memcpy(b.plane(n, 0), x.plane(n, first_channels), pb * sizeof(T));
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int begin, int count) {
  check(begin >= 0 && count > 0 && begin + count <= x.n(), ErrorKind::shape_mismatch, "batch slice out of range");
  Shape s = x.shape();
  s.n = count;
  const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
  std::vector<T> data(x.data() + begin * per, x.data() + (begin + count) * per);
  return Tensor<T>(s, std::move(data));
}

#define STARCD_INSTANTIATE(T)                                                           \
  template class Conv2d<T>;                                                             \
  template class BatchNorm2d<T>;                                                        \
  template class ConvBnRelu<T>;                                                         \
  template void relu_inplace(Tensor<T>&);                                               \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                 \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);               \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, int);       \
  template Tensor<T> slice_batch(const Tensor<T>&, int, int);

STARCD_INSTANTIATE(float)
STARCD_INSTANTIATE(double)
#undef STARCD_INSTANTIATE

}  // namespace starcd::nn
