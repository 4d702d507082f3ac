// Copyright 2026 The Preictal Authors.
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

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "preictal/nn/layers.hpp"
#include "preictal/rng.hpp"

using namespace preictal;
using namespace preictal::nn;
using State = LstmState<double>;

namespace {

std::vector<double> randvec(CounterRng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

Vector<double> to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector<double>>(v.data(), static_cast<Index>(v.size()));
}

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Central difference of f with respect to *x.
double numeric(double* x, const std::function<double()>& f, double eps = 1e-5) {
  const double keep = *x;
  *x = keep + eps;
  const double up = f();
  *x = keep - eps;
  const double down = f();
  *x = keep;
  return (up - down) / (2 * eps);
}

}  // namespace

TEST_CASE("conv2d matches the nested-loop oracle") {
  CounterRng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int C = 1 + static_cast<int>(rng.below(3));
    const int H = 7 + static_cast<int>(rng.below(8));
    const int W = 7 + static_cast<int>(rng.below(8));
    const int O = 1 + static_cast<int>(rng.below(3));
    const int s = 1 + static_cast<int>(rng.below(2));
    ConvLayerParams<double> layer(O, C, 7, 7, s, s);
    const auto k = randvec(rng, static_cast<std::size_t>(layer.kernels.size()));
    const auto b = randvec(rng, static_cast<std::size_t>(O));
    layer.kernels.values() = to_vec(k);
    layer.bias.values() = to_vec(b);
    const auto in = randvec(rng, static_cast<std::size_t>(C * H * W));
    const Tensor<double> x({C, H, W}, to_vec(in));
    const auto y = conv2d(x, layer.view());
    int ho = 0, wo = 0;
    const auto ref = oracle::conv2d(in, C, H, W, k, b, O, 7, 7, s, s, &ho, &wo);
    REQUIRE(y.shape() == Shape{O, ho, wo});
    for (Index i = 0; i < y.size(); ++i) CHECK(std::abs(y.data()[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("conv2d examples") {
  SUBCASE("full-size first layer shape") {
    ConvLayerParams<double> layer(20, 18, 7, 7, 2, 2);
    CHECK(conv2d(Tensor<double>({18, 59, 114}), layer.view()).shape() == Shape{20, 27, 54});
  }
  SUBCASE("centre delta kernel crops the valid region") {
    ConvLayerParams<double> layer(1, 1, 7, 7, 1, 1);
    layer.kernels(0, 0, 3, 3) = 1.0;
    CounterRng rng(3);
    const Tensor<double> x({1, 12, 10}, to_vec(randvec(rng, 120)));
    const auto y = conv2d(x, layer.view());
    REQUIRE(y.shape() == Shape{1, 6, 4});
    for (Index r = 0; r < 6; ++r) {
      for (Index c = 0; c < 4; ++c) CHECK(y(0, r, c) == x(0, r + 3, c + 3));
    }
  }
  SUBCASE("input smaller than the kernel is a shape error") {
    ConvLayerParams<double> layer(1, 1, 7, 7, 1, 1);
    CHECK_THROWS_AS(conv2d(Tensor<double>({1, 6, 10}), layer.view()), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor<double>({2, 10, 10}), layer.view()), ShapeError);
  }
}

TEST_CASE("relu examples") {
  const Tensor<double> x({3}, (Vector<double>(3) << -1, 0, 2).finished());
  CHECK(relu(x).values() == (Vector<double>(3) << 0, 0, 2).finished());
  CHECK(relu(Tensor<double>({4}, Vector<double>::Constant(4, -3))).values().isZero());
  CounterRng rng(4);
  const Tensor<double> r({50}, to_vec(randvec(rng, 50)));
  CHECK(relu(relu(r)) == relu(r));
}

TEST_CASE("dense examples") {
  CounterRng rng(5);
  const Vector<double> x = to_vec(randvec(rng, 4));
  Vector<double> eye = RowMatrix<double>::Identity(4, 4).reshaped<Eigen::RowMajor>();
  Vector<double> zero = Vector<double>::Zero(4);
  const DenseView<double> id{eye.data(), zero.data(), 4, 4};
  CHECK(dense<double>(x, id, Activation::kNone) == x);

  const auto w = randvec(rng, 12);
  const auto b = randvec(rng, 3);
  const DenseView<double> lay{w.data(), b.data(), 4, 3};
  CHECK(dense<double>(Vector<double>::Zero(4), lay, Activation::kRelu) ==
        to_vec(b).cwiseMax(0.0));
  const auto ref = oracle::dense(std::vector<double>(x.data(), x.data() + 4), w, b);
  const auto y = dense<double>(x, lay, Activation::kNone);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(y[j] - ref[static_cast<std::size_t>(j)]) < 1e-12);
  CHECK_THROWS_AS(dense<double>(Vector<double>::Zero(5), lay, Activation::kNone), ShapeError);
}

TEST_CASE("softmax and cross entropy examples") {
  const Vector<double> p = softmax(Vector<double>::Zero(2));
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  const Vector<double> big = softmax((Vector<double>(2) << 1000, 0).finished());
  CHECK(big.allFinite());
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);
  CounterRng rng(6);
  for (int i = 0; i < 100; ++i) {
    const Vector<double> z = to_vec(randvec(rng, 2, 50));
    const double c = rng.uniform(-100, 100);
    const Vector<double> a = softmax(z);
    const Vector<double> b = softmax((z.array() + c).matrix());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(a.sum() - 1.0) < 1e-12);
    CHECK((a.array() > 0).all());
  }
  CHECK(cross_entropy((Vector<double>(2) << 1, 0).finished(), 0) == 0.0);
  CHECK(cross_entropy((Vector<double>(2) << 0.5, 0.5).finished(), 1) ==
        doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(cross_entropy((Vector<double>(2) << 1, 0).finished(), 1) ==
        doctest::Approx(27.631021).epsilon(1e-6));
}

struct LstmFixture {
  Index in = 5, hid = 4;
  std::vector<std::vector<double>> wx, wh, b;
  LstmFixture(CounterRng& rng, double scale) {
    for (int g = 0; g < kNumGates; ++g) {
      wx.push_back(randvec(rng, static_cast<std::size_t>(in * hid), scale));
      wh.push_back(randvec(rng, static_cast<std::size_t>(hid * hid), scale));
      b.push_back(randvec(rng, static_cast<std::size_t>(hid), scale));
    }
  }
  LstmView<double, true> view() {
    LstmView<double, true> v;
    for (int g = 0; g < kNumGates; ++g) {
      v.w_x[g] = wx[g].data();
      v.w_h[g] = wh[g].data();
      v.b[g] = b[g].data();
    }
    v.input_dim = in;
    v.hidden = hid;
    return v;
  }
  LstmView<double> cview() {
    const auto v = view();
    LstmView<double> c;
    for (int g = 0; g < kNumGates; ++g) {
      c.w_x[g] = v.w_x[g];
      c.w_h[g] = v.w_h[g];
      c.b[g] = v.b[g];
    }
    c.input_dim = in;
    c.hidden = hid;
    return c;
  }
};

TEST_CASE("lstm_step examples") {
  CounterRng rng(7);
  LstmFixture f(rng, 0.0);
  const Vector<double> x = to_vec(randvec(rng, 5));
  State prev{to_vec(randvec(rng, 4)), to_vec(randvec(rng, 4, 3.0))};
  SUBCASE("zero weights open every gate halfway") {
    const auto s = lstm_step<double>(x, prev, f.cview());
    const Vector<double> c = 0.5 * prev.c;
    CHECK((s.c - c).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((s.h - (0.5 * c.array().tanh()).matrix()).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("saturated forget gate keeps the cell") {
    std::fill(f.b[kForgetGate].begin(), f.b[kForgetGate].end(), 40.0);
    const auto s = lstm_step<double>(x, prev, f.cview());
    CHECK((s.c - prev.c).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(lstm_step<double>(Vector<double>::Zero(3), prev, f.cview()), ShapeError);
}

TEST_CASE("lstm_step matches the scalar oracle over three steps") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(100 + seed);
    LstmFixture f(rng, 0.4);
    State s = State{Vector<double>::Zero(4), Vector<double>::Zero(4)};
    std::vector<double> h(4, 0.0), c(4, 0.0);
    for (int t = 0; t < 3; ++t) {
      const auto xs = randvec(rng, 5);
      s = lstm_step<double>(to_vec(xs), s, f.cview());
      const auto ref = oracle::lstm_step(xs, h, c, f.wx, f.wh, f.b);
      h = ref.h;
      c = ref.c;
      for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(s.h[j] - h[static_cast<std::size_t>(j)]) < 1e-12);
        CHECK(std::abs(s.c[j] - c[static_cast<std::size_t>(j)]) < 1e-12);
        CHECK(std::abs(s.h[j]) < 1.0);
      }
    }
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  CounterRng rng(11);
  ConvLayerParams<double> layer(2, 2, 7, 7, 2, 1);
  layer.kernels.values() = to_vec(randvec(rng, static_cast<std::size_t>(layer.kernels.size())));
  layer.bias.values() = to_vec(randvec(rng, 2));
  Tensor<double> x({2, 11, 9}, to_vec(randvec(rng, 198)));
  const auto y0 = conv2d(x, layer.view());
  const Vector<double> r = to_vec(randvec(rng, static_cast<std::size_t>(y0.size())));
  auto loss = [&] { return conv2d(x, layer.view()).values().dot(r); };

  ConvLayerParams<double> grads(2, 2, 7, 7, 2, 1);
  Tensor<double> dx;
  conv2d_backward(x, layer.view(), Tensor<double>(y0.shape(), r), grads.view(), &dx);
  for (Index i = 0; i < layer.kernels.size(); ++i) {
    CHECK(rel_err(grads.kernels.data()[i], numeric(layer.kernels.data() + i, loss)) < 1e-6);
  }
  for (Index i = 0; i < 2; ++i) {
    CHECK(rel_err(grads.bias.data()[i], numeric(layer.bias.data() + i, loss)) < 1e-6);
  }
  for (Index i = 0; i < x.size(); ++i) {
    CHECK(rel_err(dx.data()[i], numeric(x.data() + i, loss)) < 1e-6);
  }
}

TEST_CASE("dense gradients match finite differences") {
  CounterRng rng(12);
  auto w = randvec(rng, 15);
  auto b = randvec(rng, 3);
  auto xs = randvec(rng, 5);
  const auto r = to_vec(randvec(rng, 3));
  auto loss = [&] {
    const DenseView<double> l{w.data(), b.data(), 5, 3};
    return dense<double>(to_vec(xs), l, Activation::kNone).dot(r);
  };
  std::vector<double> gw(15, 0.0), gb(3, 0.0);
  const DenseView<double> l{w.data(), b.data(), 5, 3};
  const auto dx = dense_backward<double>(to_vec(xs), l, r, DenseView<double, true>{gw.data(), gb.data(), 5, 3});
  for (std::size_t i = 0; i < 15; ++i) CHECK(rel_err(gw[i], numeric(&w[i], loss)) < 1e-7);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rel_err(gb[i], numeric(&b[i], loss)) < 1e-7);
  for (std::size_t i = 0; i < 5; ++i) CHECK(rel_err(dx[static_cast<Index>(i)], numeric(&xs[i], loss)) < 1e-7);
}

TEST_CASE("relu and softmax cross-entropy gradients match finite differences") {
  CounterRng rng(13);
  auto z = randvec(rng, 2, 3.0);
  for (int y = 0; y < 2; ++y) {
    auto loss = [&] { return cross_entropy(softmax(to_vec(z)), y); };
    const Vector<double> p = softmax(to_vec(z));
    for (int k = 0; k < 2; ++k) {
      const double analytic = p[k] - (k == y ? 1.0 : 0.0);
      CHECK(rel_err(analytic, numeric(&z[static_cast<std::size_t>(k)], loss)) < 1e-7);
    }
  }
  auto xs = randvec(rng, 20);
  const auto r = to_vec(randvec(rng, 20));
  auto loss = [&] { return relu(Tensor<double>({20}, to_vec(xs))).values().dot(r); };
  const Vector<double> out = relu(Tensor<double>({20}, to_vec(xs))).values();
  const Vector<double> g = relu_backward(r, out);
  for (std::size_t i = 0; i < 20; ++i) {
    if (std::abs(xs[i]) < 1e-3) continue;  // kink
    CHECK(rel_err(g[static_cast<Index>(i)], numeric(&xs[i], loss)) < 1e-7);
  }
}

TEST_CASE("lstm_step gradients match finite differences") {
  CounterRng rng(14);
  LstmFixture f(rng, 0.5);
  auto xs = randvec(rng, 5);
  auto hp = randvec(rng, 4, 0.9);
  auto cp = randvec(rng, 4, 2.0);
  const auto rh = to_vec(randvec(rng, 4));
  const auto rc = to_vec(randvec(rng, 4));
  auto loss = [&] {
    const auto s = lstm_step<double>(to_vec(xs), State{to_vec(hp), to_vec(cp)}, f.cview());
    return s.h.dot(rh) + s.c.dot(rc);
  };
  LstmStepCache<double> cache;
  lstm_step<double>(to_vec(xs), State{to_vec(hp), to_vec(cp)}, f.cview(), &cache);
  CounterRng zero_rng(0);
  LstmFixture g(zero_rng, 0.0);
  const auto back = lstm_step_backward<double>(cache, f.cview(), rh, rc, g.view());
  for (int k = 0; k < kNumGates; ++k) {
    for (std::size_t i = 0; i < f.wx[k].size(); ++i) {
      CHECK(rel_err(g.wx[k][i], numeric(&f.wx[k][i], loss)) < 1e-6);
    }
    for (std::size_t i = 0; i < f.wh[k].size(); ++i) {
      CHECK(rel_err(g.wh[k][i], numeric(&f.wh[k][i], loss)) < 1e-6);
    }
    for (std::size_t i = 0; i < f.b[k].size(); ++i) {
      CHECK(rel_err(g.b[k][i], numeric(&f.b[k][i], loss)) < 1e-6);
    }
  }
  for (std::size_t i = 0; i < 5; ++i) CHECK(rel_err(back.dx[static_cast<Index>(i)], numeric(&xs[i], loss)) < 1e-6);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rel_err(back.dh_prev[static_cast<Index>(i)], numeric(&hp[i], loss)) < 1e-6);
    CHECK(rel_err(back.dc_prev[static_cast<Index>(i)], numeric(&cp[i], loss)) < 1e-6);
  }
}
