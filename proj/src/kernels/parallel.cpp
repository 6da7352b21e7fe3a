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

// OpenMP kernels. Work is split over independent output planes only; each
// output element is accumulated in the same term order as the serial
// reference, which keeps results identical for every thread count.

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "starcd/kernels/kernels.hpp"

namespace starcd::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

namespace parallel {

namespace {

Shape conv_out_shape(const Shape& in, const Shape& w, ConvGeometry geo) {
  check(in.c == w.c, ErrorKind::shape_mismatch,
        "conv input channels " + std::to_string(in.c) + " vs weight " + to_string(w));
  check(w.h == geo.kernel && w.w == geo.kernel, ErrorKind::shape_mismatch, "conv kernel extent");
  return Shape{in.n, w.n, geo.out_extent(in.h), geo.out_extent(in.w)};
}

// Output index range [lo, hi) whose tap k lands inside [0, in_extent).
struct Span1D {
  int lo;
  int hi;
};

Span1D valid_outputs(int k, int in_extent, int out_extent, ConvGeometry geo) {
  // i = o * stride - pad + k must satisfy 0 <= i < in_extent.
  int lo = geo.pad - k;
  lo = lo <= 0 ? 0 : (lo + geo.stride - 1) / geo.stride;
  int top = in_extent - 1 + geo.pad - k;
  int hi = top < 0 ? 0 : top / geo.stride + 1;
  return {std::min(lo, out_extent), std::min(hi, out_extent)};
}

template <typename T>
struct Taps {
  std::vector<int> i0, i1;
  std::vector<T> w0, w1;
};

template <typename T>
Taps<T> bilinear_taps(int out_extent, int scale, int in_extent) {
  Taps<T> t;
  t.i0.resize(out_extent);
  t.i1.resize(out_extent);
  t.w0.resize(out_extent);
  t.w1.resize(out_extent);
  for (int d = 0; d < out_extent; ++d) {
    T src = (static_cast<T>(d) + T(0.5)) / static_cast<T>(scale) - T(0.5);
    if (src < T(0)) src = T(0);
    const int i0 = std::min(static_cast<int>(src), in_extent - 1);
    t.i0[d] = i0;
    t.i1[d] = std::min(i0 + 1, in_extent - 1);
    t.w1[d] = src - static_cast<T>(i0);
    t.w0[d] = T(1) - t.w1[d];
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& weight, std::span<const T> bias,
                         ConvGeometry geo) {
  const Shape os = conv_out_shape(in.shape(), weight.shape(), geo);
  Tensor<T> out(os);
  const int cin = in.c();
  const int k = geo.kernel;
  const int s = geo.stride;
  std::vector<Span1D> rows(k), cols(k);
  for (int t = 0; t < k; ++t) {
    rows[t] = valid_outputs(t, in.h(), os.h, geo);
    cols[t] = valid_outputs(t, in.w(), os.w, geo);
  }

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < os.n; ++n) {
    for (int co = 0; co < os.c; ++co) {
      T* dst = out.plane(n, co);
      std::fill(dst, dst + os.plane(), bias.empty() ? T(0) : bias[co]);
      for (int ci = 0; ci < cin; ++ci) {
        const T* src = in.plane(n, ci);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = weight.at(co, ci, ky, kx);
            for (int oy = rows[ky].lo; oy < rows[ky].hi; ++oy) {
              const T* srow = src + static_cast<std::size_t>(oy * s - geo.pad + ky) * in.w();
              T* drow = dst + static_cast<std::size_t>(oy) * os.w;
              const int x0 = cols[kx].lo;
              const int x1 = cols[kx].hi;
              if (s == 1) {
                const T* sp = srow - geo.pad + kx;
                for (int ox = x0; ox < x1; ++ox) drow[ox] += wv * sp[ox];
              } else {
                for (int ox = x0; ox < x1; ++ox) drow[ox] += wv * srow[ox * s - geo.pad + kx];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight, const Shape& in_shape,
                                ConvGeometry geo) {
  require_same_shape(grad_out.shape(), conv_out_shape(in_shape, weight.shape(), geo), "conv grad_out");
  Tensor<T> grad_in(in_shape);
  const Shape& gs = grad_out.shape();
  const int k = geo.kernel;
  const int s = geo.stride;
  std::vector<Span1D> rows(k), cols(k);
  for (int t = 0; t < k; ++t) {
    rows[t] = valid_outputs(t, in_shape.h, gs.h, geo);
    cols[t] = valid_outputs(t, in_shape.w, gs.w, geo);
  }

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < in_shape.n; ++n) {
    for (int ci = 0; ci < in_shape.c; ++ci) {
      T* dst = grad_in.plane(n, ci);
      for (int co = 0; co < gs.c; ++co) {
        const T* g = grad_out.plane(n, co);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = weight.at(co, ci, ky, kx);
            for (int oy = rows[ky].lo; oy < rows[ky].hi; ++oy) {
              T* drow = dst + static_cast<std::size_t>(oy * s - geo.pad + ky) * in_shape.w;
              const T* grow = g + static_cast<std::size_t>(oy) * gs.w;
              for (int ox = cols[kx].lo; ox < cols[kx].hi; ++ox) drow[ox * s - geo.pad + kx] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& grad_out, const Tensor<T>& in, ConvGeometry geo,
                            Tensor<T>& grad_weight, std::span<T> grad_bias) {
  require_same_shape(grad_out.shape(), conv_out_shape(in.shape(), grad_weight.shape(), geo),
                     "conv grad_out");
  const Shape& gs = grad_out.shape();
  const int k = geo.kernel;
  const int s = geo.stride;
  std::vector<Span1D> rows(k), cols(k);
  for (int t = 0; t < k; ++t) {
    rows[t] = valid_outputs(t, in.h(), gs.h, geo);
    cols[t] = valid_outputs(t, in.w(), gs.w, geo);
  }

#pragma omp parallel for schedule(static)
  for (int co = 0; co < gs.c; ++co) {
    for (int ci = 0; ci < in.c(); ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T acc = T(0);
          for (int n = 0; n < gs.n; ++n) {
            const T* g = grad_out.plane(n, co);
            const T* src = in.plane(n, ci);
            for (int oy = rows[ky].lo; oy < rows[ky].hi; ++oy) {
              const T* grow = g + static_cast<std::size_t>(oy) * gs.w;
              const T* srow = src + static_cast<std::size_t>(oy * s - geo.pad + ky) * in.w();
              for (int ox = cols[kx].lo; ox < cols[kx].hi; ++ox) acc += grow[ox] * srow[ox * s - geo.pad + kx];
            }
          }
          grad_weight.at(co, ci, ky, kx) += acc;
        }
      }
    }
    if (!grad_bias.empty()) {
      T acc = T(0);
      for (int n = 0; n < gs.n; ++n) {
        const T* g = grad_out.plane(n, co);
        for (std::size_t i = 0; i < gs.plane(); ++i) acc += g[i];
      }
      grad_bias[co] += acc;
    }
  }
}

template <typename T>
ChannelStats<T> channel_stats(const Tensor<T>& in) {
  const Shape& s = in.shape();
  const T count = static_cast<T>(static_cast<std::size_t>(s.n) * s.plane());
  ChannelStats<T> st{std::vector<T>(s.c), std::vector<T>(s.c)};
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.c; ++c) {
    T sum = T(0);
    for (int n = 0; n < s.n; ++n) {
      const T* p = in.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
    }
    const T mean = sum / count;
    T sq = T(0);
    for (int n = 0; n < s.n; ++n) {
      const T* p = in.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const T d = p[i] - mean;
        sq += d * d;
      }
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
  const Taps<T> ty = bilinear_taps<T>(out.h(), scale, s.h);
  const Taps<T> tx = bilinear_taps<T>(out.w(), scale, s.w);
  const int planes = s.n * s.c;

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* src = in.data() + static_cast<std::size_t>(p) * s.plane();
    T* dst = out.data() + static_cast<std::size_t>(p) * out.shape().plane();
    for (int oy = 0; oy < out.h(); ++oy) {
      const T* r0 = src + static_cast<std::size_t>(ty.i0[oy]) * s.w;
      const T* r1 = src + static_cast<std::size_t>(ty.i1[oy]) * s.w;
      T* drow = dst + static_cast<std::size_t>(oy) * out.w();
      for (int ox = 0; ox < out.w(); ++ox) {
        const T top = tx.w0[ox] * r0[tx.i0[ox]] + tx.w1[ox] * r0[tx.i1[ox]];
        const T bottom = tx.w0[ox] * r1[tx.i0[ox]] + tx.w1[ox] * r1[tx.i1[ox]];
        drow[ox] = ty.w0[oy] * top + ty.w1[oy] * bottom;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& grad_out, int scale) {
  const Shape& s = grad_out.shape();
  check(scale >= 1 && s.h % scale == 0 && s.w % scale == 0, ErrorKind::shape_mismatch,
        "upsample gradient extent not divisible by scale");
  Tensor<T> grad_in(Shape{s.n, s.c, s.h / scale, s.w / scale});
  const Taps<T> ty = bilinear_taps<T>(s.h, scale, grad_in.h());
  const Taps<T> tx = bilinear_taps<T>(s.w, scale, grad_in.w());
  const int planes = s.n * s.c;
  const int iw = grad_in.w();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* g = grad_out.data() + static_cast<std::size_t>(p) * s.plane();
    T* dst = grad_in.data() + static_cast<std::size_t>(p) * grad_in.shape().plane();
    for (int oy = 0; oy < s.h; ++oy) {
      T* r0 = dst + static_cast<std::size_t>(ty.i0[oy]) * iw;
      T* r1 = dst + static_cast<std::size_t>(ty.i1[oy]) * iw;
      const T* grow = g + static_cast<std::size_t>(oy) * s.w;
      for (int ox = 0; ox < s.w; ++ox) {
        const T v = grow[ox];
        r0[tx.i0[ox]] += (ty.w0[oy] * tx.w0[ox]) * v;
        r0[tx.i1[ox]] += (ty.w0[oy] * tx.w1[ox]) * v;
        r1[tx.i0[ox]] += (ty.w1[oy] * tx.w0[ox]) * v;
        r1[tx.i1[ox]] += (ty.w1[oy] * tx.w1[ox]) * v;
      }
    }
  }
  return grad_in;
}

std::vector<std::int64_t> confusion_counts(std::span<const int> reference, std::span<const int> prediction,
                                           int k, int ignore_value) {
  check(reference.size() == prediction.size(), ErrorKind::shape_mismatch, "confusion inputs differ in length");
  const std::size_t cells = static_cast<std::size_t>(k) * k;
  std::vector<std::int64_t> counts(cells, 0);
  const auto total = static_cast<std::ptrdiff_t>(reference.size());
  bool out_of_range = false;

#pragma omp parallel
  {
    std::vector<std::int64_t> local(cells, 0);
    bool bad = false;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < total; ++i) {
      const int r = reference[i];
      const int p = prediction[i];
      if (r == ignore_value || p == ignore_value) continue;
      if (r < 0 || r >= k || p < 0 || p >= k) {
        bad = true;
        continue;
      }
      ++local[static_cast<std::size_t>(r) * k + p];
    }
#pragma omp critical(starcd_confusion_merge)
    {
      for (std::size_t c = 0; c < cells; ++c) counts[c] += local[c];
      out_of_range = out_of_range || bad;
    }
  }
  check(!out_of_range, ErrorKind::out_of_range_label, "confusion label outside [0, " + std::to_string(k) + ")");
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

}  // namespace parallel
}  // namespace starcd::kernels
