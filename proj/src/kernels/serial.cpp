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

// Reference kernels: direct per-element formulations, no parallelism.

#include <algorithm>

#include "starcd/kernels/kernels.hpp"

namespace starcd::kernels::serial {

namespace {

Shape conv_out_shape(const Shape& in, const Shape& w, ConvGeometry geo) {
  check(in.c == w.c, ErrorKind::shape_mismatch,
        "conv input channels " + std::to_string(in.c) + " vs weight " + to_string(w));
  check(w.h == geo.kernel && w.w == geo.kernel, ErrorKind::shape_mismatch, "conv kernel extent");
  return Shape{in.n, w.n, geo.out_extent(in.h), geo.out_extent(in.w)};
}

template <typename T>
struct Tap {
  int i0, i1;
  T w0, w1;
};

template <typename T>
Tap<T> bilinear_tap(int dst, int scale, int in_extent) {
  T src = (static_cast<T>(dst) + T(0.5)) / static_cast<T>(scale) - T(0.5);
  if (src < T(0)) src = T(0);
  const int i0 = std::min(static_cast<int>(src), in_extent - 1);
  const int i1 = std::min(i0 + 1, in_extent - 1);
  const T w1 = src - static_cast<T>(i0);
  return {i0, i1, T(1) - w1, w1};
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& weight, std::span<const T> bias,
                         ConvGeometry geo) {
  const Shape os = conv_out_shape(in.shape(), weight.shape(), geo);
  Tensor<T> out(os);
  for (int n = 0; n < os.n; ++n)
    for (int co = 0; co < os.c; ++co)
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          T acc = bias.empty() ? T(0) : bias[co];
          for (int ci = 0; ci < in.c(); ++ci)
            for (int ky = 0; ky < geo.kernel; ++ky)
              for (int kx = 0; kx < geo.kernel; ++kx) {
                const int iy = oy * geo.stride - geo.pad + ky;
                const int ix = ox * geo.stride - geo.pad + kx;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += weight.at(co, ci, ky, kx) * in.at(n, ci, iy, ix);
              }
          out.at(n, co, oy, ox) = acc;
        }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight, const Shape& in_shape,
                                ConvGeometry geo) {
  require_same_shape(grad_out.shape(), conv_out_shape(in_shape, weight.shape(), geo), "conv grad_out");
  Tensor<T> grad_in(in_shape);
  const Shape& gs = grad_out.shape();
  for (int n = 0; n < in_shape.n; ++n)
    for (int ci = 0; ci < in_shape.c; ++ci)
      for (int iy = 0; iy < in_shape.h; ++iy)
        for (int ix = 0; ix < in_shape.w; ++ix) {
          T acc = T(0);
          for (int co = 0; co < gs.c; ++co)
            for (int ky = 0; ky < geo.kernel; ++ky)
              for (int kx = 0; kx < geo.kernel; ++kx) {
                const int ty = iy + geo.pad - ky;
                const int tx = ix + geo.pad - kx;
                if (ty < 0 || tx < 0 || ty % geo.stride != 0 || tx % geo.stride != 0) continue;
                const int oy = ty / geo.stride;
                const int ox = tx / geo.stride;
                if (oy >= gs.h || ox >= gs.w) continue;
                acc += weight.at(co, ci, ky, kx) * grad_out.at(n, co, oy, ox);
              }
          grad_in.at(n, ci, iy, ix) = acc;
        }
  return grad_in;
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& grad_out, const Tensor<T>& in, ConvGeometry geo,
                            Tensor<T>& grad_weight, std::span<T> grad_bias) {
  require_same_shape(grad_out.shape(), conv_out_shape(in.shape(), grad_weight.shape(), geo),
                     "conv grad_out");
  const Shape& gs = grad_out.shape();
  for (int co = 0; co < gs.c; ++co) {
    for (int ci = 0; ci < in.c(); ++ci)
      for (int ky = 0; ky < geo.kernel; ++ky)
        for (int kx = 0; kx < geo.kernel; ++kx) {
          T acc = T(0);
          for (int n = 0; n < gs.n; ++n)
            for (int oy = 0; oy < gs.h; ++oy)
              for (int ox = 0; ox < gs.w; ++ox) {
                const int iy = oy * geo.stride - geo.pad + ky;
                const int ix = ox * geo.stride - geo.pad + kx;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += grad_out.at(n, co, oy, ox) * in.at(n, ci, iy, ix);
              }
          grad_weight.at(co, ci, ky, kx) += acc;
        }
    if (!grad_bias.empty()) {
      T acc = T(0);
      for (int n = 0; n < gs.n; ++n)
        for (int oy = 0; oy < gs.h; ++oy)
          for (int ox = 0; ox < gs.w; ++ox) acc += grad_out.at(n, co, oy, ox);
      grad_bias[co] += acc;
    }
  }
}

template <typename T>
ChannelStats<T> channel_stats(const Tensor<T>& in) {
  const Shape& s = in.shape();
  const T count = static_cast<T>(static_cast<std::size_t>(s.n) * s.plane());
  ChannelStats<T> st{std::vector<T>(s.c), std::vector<T>(s.c)};
  for (int c = 0; c < s.c; ++c) {
    T sum = T(0);
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) sum += in.at(n, c, y, x);
    const T mean = sum / count;
    T sq = T(0);
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const T d = in.at(n, c, y, x) - mean;
          sq += d * d;
        }
    st.mean[c] = mean;
    st.var[c] = sq / count;
  }
  return st;
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& in, int scale) {
  check(scale >= 1, ErrorKind::invalid_argument, "upsample scale must be >= 1");
  const Shape& s = in.shape();
  Tensor<T> out(Shape{s.n, s.c, s.h * scale, s.w * scale});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < out.h(); ++oy)
        for (int ox = 0; ox < out.w(); ++ox) {
          const Tap<T> ty = bilinear_tap<T>(oy, scale, s.h);
          const Tap<T> tx = bilinear_tap<T>(ox, scale, s.w);
          const T top = tx.w0 * in.at(n, c, ty.i0, tx.i0) + tx.w1 * in.at(n, c, ty.i0, tx.i1);
          const T bottom = tx.w0 * in.at(n, c, ty.i1, tx.i0) + tx.w1 * in.at(n, c, ty.i1, tx.i1);
          out.at(n, c, oy, ox) = ty.w0 * top + ty.w1 * bottom;
        }
  return out;
}

template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& grad_out, int scale) {
  const Shape& s = grad_out.shape();
  check(scale >= 1 && s.h % scale == 0 && s.w % scale == 0, ErrorKind::shape_mismatch,
        "upsample gradient extent not divisible by scale");
  Tensor<T> grad_in(Shape{s.n, s.c, s.h / scale, s.w / scale});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < s.h; ++oy)
        for (int ox = 0; ox < s.w; ++ox) {
          const Tap<T> ty = bilinear_tap<T>(oy, scale, grad_in.h());
          const Tap<T> tx = bilinear_tap<T>(ox, scale, grad_in.w());
          const T g = grad_out.at(n, c, oy, ox);
          grad_in.at(n, c, ty.i0, tx.i0) += (ty.w0 * tx.w0) * g;
          grad_in.at(n, c, ty.i0, tx.i1) += (ty.w0 * tx.w1) * g;
          grad_in.at(n, c, ty.i1, tx.i0) += (ty.w1 * tx.w0) * g;
          grad_in.at(n, c, ty.i1, tx.i1) += (ty.w1 * tx.w1) * g;
        }
  return grad_in;
}

std::vector<std::int64_t> confusion_counts(std::span<const int> reference, std::span<const int> prediction,
                                           int k, int ignore_value) {
  check(reference.size() == prediction.size(), ErrorKind::shape_mismatch, "confusion inputs differ in length");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(k) * k, 0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const int r = reference[i];
    const int p = prediction[i];
    if (r == ignore_value || p == ignore_value) continue;
    if (r < 0 || r >= k || p < 0 || p >= k)
      throw Error(ErrorKind::out_of_range_label, "confusion label outside [0, " + std::to_string(k) + ")");
    ++counts[static_cast<std::size_t>(r) * k + p];
  }
  return counts;
}

#define STARCD_INSTANTIATE(T)                                                                         \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, ConvGeometry); \
  template Tensor<T> conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, const Shape&, ConvGeometry); \
  template void conv2d_backward_params(const Tensor<T>&, const Tensor<T>&, ConvGeometry, Tensor<T>&,      \
                                       std::span<T>);                                                     \
  template ChannelStats<T> channel_stats(const Tensor<T>&);                                               \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, int);                                            \
  template Tensor<T> upsample_bilinear_backward(const Tensor<T>&, int);

STARCD_INSTANTIATE(float)
STARCD_INSTANTIATE(double)
#undef STARCD_INSTANTIATE

}  // namespace starcd::kernels::serial
