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

#include <doctest.h>

#include "starcd/nn/layers.hpp"
#include "support.hpp"

using namespace starcd;
using starcd::testing::numeric_gradient;
using starcd::testing::random_tensor;
using starcd::testing::relative_error;

namespace {

// Scalar probe sum(out * weights) so every output element gets a distinct
// upstream gradient.
double probe(const Tensor<double>& out, const Tensor<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

}  // namespace

TEST_CASE("conv2d gradients") {
  Rng rng(1);
  for (int stride : {1, 2}) {
    for (int kernel : {1, 3}) {
      nn::Conv2d<double> conv(2, 3, kernel, stride, true);
      conv.init(rng);
      for (auto& b : conv.bias().value.vec()) b = rng.uniform(-0.5, 0.5);
      auto x = random_tensor<double>({2, 2, 4, 4}, rng);
      const auto out = conv.forward(x);
      const auto w = random_tensor<double>(out.shape(), rng);
      conv.weight().zero_grad();
      conv.bias().zero_grad();
      const auto gx = conv.backward(w, x);
      auto f = [&] { return probe(conv.forward(x), w); };
      CHECK(relative_error(gx, numeric_gradient(x, f)) < 1e-7);
      CHECK(relative_error(conv.weight().grad, numeric_gradient(conv.weight().value, f)) < 1e-7);
      CHECK(relative_error(conv.bias().grad, numeric_gradient(conv.bias().value, f)) < 1e-7);
    }
  }
}

TEST_CASE("batch norm gradients in training mode") {
  Rng rng(2);
  nn::BatchNorm2d<double> bn(3);
  for (auto& g : bn.gamma().value.vec()) g = rng.uniform(0.5, 1.5);
  for (auto& b : bn.beta().value.vec()) b = rng.uniform(-0.5, 0.5);
  auto x = random_tensor<double>({2, 3, 3, 3}, rng);
  nn::BatchNorm2d<double>::Cache cache;
  const auto out = bn.forward(x, nn::Mode::train, &cache);
  const auto w = random_tensor<double>(out.shape(), rng);
  bn.gamma().zero_grad();
  bn.beta().zero_grad();
  const auto gx = bn.backward(w, cache);
  auto f = [&] { return probe(bn.forward(x, nn::Mode::train, nullptr), w); };
  CHECK(relative_error(gx, numeric_gradient(x, f)) < 1e-6);
  CHECK(relative_error(bn.gamma().grad, numeric_gradient(bn.gamma().value, f)) < 1e-6);
  CHECK(relative_error(bn.beta().grad, numeric_gradient(bn.beta().value, f)) < 1e-6);
}

TEST_CASE("batch norm normalizes batches and tracks running statistics") {
  Rng rng(3);
  nn::BatchNorm2d<double> bn(2);
  const auto x = random_tensor<double>({4, 2, 3, 3}, rng, 2.0, 4.0);
  const auto out = bn.forward(x, nn::Mode::train, nullptr);
  for (int c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    int n = 0;
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 9; ++i, ++n) m += out.plane(b, c)[i];
    m /= n;
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 9; ++i) v += (out.plane(b, c)[i] - m) * (out.plane(b, c)[i] - m);
    CHECK(m == doctest::Approx(0.0).epsilon(1e-12).scale(1));
    CHECK(v / n == doctest::Approx(1.0).epsilon(1e-4));
  }
  std::vector<double> running_mean;
  bn.visit("bn", {[](const std::string&, nn::Parameter<double>&) {},
                  [&](const std::string& name, Tensor<double>& t) {
                    if (name == "bn.running_mean") running_mean = t.vec();
                  }});
  REQUIRE(running_mean.size() == 2);
  CHECK(running_mean[0] > 0.2);  // 0.1 * batch mean of about 3
  CHECK(running_mean[0] < 0.4);

  // Inference mode is deterministic and ignores the batch.
  const auto a = bn.forward(x, nn::Mode::infer, nullptr);
  const auto b = bn.forward(x, nn::Mode::infer, nullptr);
  CHECK(a.vec() == b.vec());
}

TEST_CASE("conv-bn-relu gradients") {
  Rng rng(4);
  nn::ConvBnRelu<double> block(3, 4, 3, 1);
  block.init(rng);
  auto x = random_tensor<double>({2, 3, 4, 4}, rng);
  nn::ConvBnRelu<double>::Cache cache;
  const auto out = block.forward(x, nn::Mode::train, &cache);
  const auto w = random_tensor<double>(out.shape(), rng);
  block.visit("b", {[](const std::string&, nn::Parameter<double>& p) { p.zero_grad(); }, {}});
  const auto gx = block.backward(w, cache);
  auto f = [&] { return probe(block.forward(x, nn::Mode::train, nullptr), w); };
  CHECK(relative_error(gx, numeric_gradient(x, f)) < 1e-5);
  CHECK(relative_error(block.conv().weight().grad, numeric_gradient(block.conv().weight().value, f)) < 1e-5);
}

TEST_CASE("channel helpers round-trip") {
  Rng rng(5);
  const auto a = random_tensor<float>({2, 3, 2, 2}, rng);
  const auto b = random_tensor<float>({2, 1, 2, 2}, rng);
  const auto cat = nn::concat_channels(a, b);
  CHECK(cat.c() == 4);
  const auto [ga, gb] = nn::split_channels(cat, 3);
  CHECK(ga.vec() == a.vec());
  CHECK(gb.vec() == b.vec());
  const auto s = nn::slice_batch(a, 1, 1);
  CHECK(s.n() == 1);
  CHECK(s.at(0, 2, 1, 1) == a.at(1, 2, 1, 1));
}

TEST_CASE("parameter names are stable") {
  nn::ConvBnRelu<float> block(2, 2, 3, 1);
  std::vector<std::string> params, buffers;
  block.visit("x", {[&](const std::string& n, nn::Parameter<float>&) { params.push_back(n); },
                    [&](const std::string& n, Tensor<float>&) { buffers.push_back(n); }});
  CHECK(params == std::vector<std::string>{"x.conv.weight", "x.bn.gamma", "x.bn.beta"});
  CHECK(buffers == std::vector<std::string>{"x.bn.running_mean", "x.bn.running_var"});
}
