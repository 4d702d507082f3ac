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

// Layer primitives with hand-written gradients. Parameters are passed as
// non-owning views so the model can keep every weight in one flat vector.
// Backward functions accumulate (+=) into gradient views.

#ifndef PREICTAL_NN_LAYERS_HPP_
#define PREICTAL_NN_LAYERS_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include "preictal/error.hpp"
#include "preictal/tensor.hpp"

namespace preictal::nn {

template <typename Scalar, bool Mutable>
using MatrixMap = Eigen::Map<std::conditional_t<Mutable, RowMatrix<Scalar>, const RowMatrix<Scalar>>>;
template <typename Scalar, bool Mutable>
using VectorMap = Eigen::Map<std::conditional_t<Mutable, Vector<Scalar>, const Vector<Scalar>>>;
template <typename Scalar, bool Mutable>
using DataPtr = std::conditional_t<Mutable, Scalar*, const Scalar*>;

// ---------------------------------------------------------------------------
// Convolution

/// Valid-padding 2-D convolution parameters, kernels laid out
/// [out][in][kh][kw].
template <typename Scalar, bool Mutable = false>
struct ConvView {
  DataPtr<Scalar, Mutable> kernels = nullptr;
  DataPtr<Scalar, Mutable> bias = nullptr;
  Index out_channels = 0;
  Index in_channels = 0;
  Index kernel_h = 7;
  Index kernel_w = 7;
  Index stride_h = 1;
  Index stride_w = 1;

  Index patch_size() const { return in_channels * kernel_h * kernel_w; }
  MatrixMap<Scalar, Mutable> kernel_matrix() const {
    return MatrixMap<Scalar, Mutable>(kernels, out_channels, patch_size());
  }
  VectorMap<Scalar, Mutable> bias_vector() const {
    return VectorMap<Scalar, Mutable>(bias, out_channels);
  }
  Index out_height(Index h) const { return (h - kernel_h) / stride_h + 1; }
  Index out_width(Index w) const { return (w - kernel_w) / stride_w + 1; }
};

/// Owning convolution parameters.
template <typename Scalar>
struct ConvLayerParams {
  Tensor<Scalar> kernels;  // [out x in x kh x kw]
  Tensor<Scalar> bias;     // [out]
  Index stride_h = 1;
  Index stride_w = 1;

  ConvLayerParams(Index out, Index in, Index kh, Index kw, Index sh, Index sw)
      : kernels({out, in, kh, kw}), bias({out}), stride_h(sh), stride_w(sw) {}

  ConvView<Scalar> view() const {
    return {kernels.data(), bias.data(), kernels.dim(0), kernels.dim(1), kernels.dim(2),
            kernels.dim(3), stride_h, stride_w};
  }
  ConvView<Scalar, true> view() {
    return {kernels.data(), bias.data(), kernels.dim(0), kernels.dim(1), kernels.dim(2),
            kernels.dim(3), stride_h, stride_w};
  }
};

template <typename Scalar, bool M>
void check_conv_input(const Tensor<Scalar>& input, const ConvView<Scalar, M>& layer,
                      const char* name) {
  if (input.rank() != 3 || input.dim(0) != layer.in_channels || input.dim(1) < layer.kernel_h ||
      input.dim(2) < layer.kernel_w) {
    throw ShapeError(std::string(name) + ": input " + shape_string(input.shape()) +
                     " incompatible with " + std::to_string(layer.in_channels) + "-channel " +
                     std::to_string(layer.kernel_h) + "x" + std::to_string(layer.kernel_w) +
                     " kernel");
  }
}

/// Unrolls every receptive field into a column: row (c, ky, kx), column
/// (oy, ox).
template <typename Scalar, bool M>
Eigen::Map<RowMatrix<Scalar>> im2col(const Tensor<Scalar>& input,
                                     const ConvView<Scalar, M>& layer,
                                     std::vector<Scalar>& workspace) {
  const Index h = input.dim(1);
  const Index w = input.dim(2);
  const Index oh = layer.out_height(h);
  const Index ow = layer.out_width(w);
  const auto needed = static_cast<std::size_t>(layer.patch_size() * oh * ow);
  if (workspace.size() < needed) workspace.resize(needed);
  Eigen::Map<RowMatrix<Scalar>> cols(workspace.data(), layer.patch_size(), oh * ow);
  const Scalar* in = input.data();
  for (Index c = 0; c < layer.in_channels; ++c) {
    for (Index ky = 0; ky < layer.kernel_h; ++ky) {
      for (Index kx = 0; kx < layer.kernel_w; ++kx) {
        Scalar* dst = cols.data() + ((c * layer.kernel_h + ky) * layer.kernel_w + kx) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Scalar* src = in + (c * h + oy * layer.stride_h + ky) * w + kx;
          for (Index ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[ox * layer.stride_w];
        }
      }
    }
  }
  return cols;
}

// Per-thread scratch reused across calls so the large im2col buffers are
// allocated once.
template <typename Scalar>
std::vector<Scalar>& conv_workspace(int slot) {
  thread_local std::vector<Scalar> buffers[2];
  return buffers[slot];
}

/// Cross-correlation with valid padding:
///
///   out[o, y, x] = bias[o] + sum_{c, i, j} k[o, c, i, j] in[c, y*sh + i, x*sw + j]
///
/// Flipping the kernel turns this into the textbook convolution sum; the
/// two are equivalent for learned kernels.
template <typename Scalar, bool M>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const ConvView<Scalar, M>& layer,
                      const char* name = "conv2d") {
  check_conv_input(input, layer, name);
  const Index oh = layer.out_height(input.dim(1));
  const Index ow = layer.out_width(input.dim(2));
  const auto cols = im2col(input, layer, conv_workspace<Scalar>(0));
  Tensor<Scalar> out({layer.out_channels, oh, ow});
  auto out_m = out.matrix(layer.out_channels, oh * ow);
  out_m.noalias() = layer.kernel_matrix() * cols;
  out_m.colwise() += layer.bias_vector();
  return out;
}

/// Accumulates kernel and bias gradients; writes the input gradient when
/// `grad_input` is non-null.
template <typename Scalar, bool M>
void conv2d_backward(const Tensor<Scalar>& input, const ConvView<Scalar, M>& layer,
                     const Tensor<Scalar>& grad_output, const ConvView<Scalar, true>& grads,
                     Tensor<Scalar>* grad_input) {
  const Index h = input.dim(1);
  const Index w = input.dim(2);
  const Index oh = layer.out_height(h);
  const Index ow = layer.out_width(w);
  const auto cols = im2col(input, layer, conv_workspace<Scalar>(0));
  const auto dout = grad_output.matrix(layer.out_channels, oh * ow);
  grads.kernel_matrix().noalias() += dout * cols.transpose();
  grads.bias_vector() += dout.rowwise().sum();
  if (grad_input == nullptr) return;

  auto& dbuf = conv_workspace<Scalar>(1);
  const auto needed = static_cast<std::size_t>(layer.patch_size() * oh * ow);
  if (dbuf.size() < needed) dbuf.resize(needed);
  Eigen::Map<RowMatrix<Scalar>> dcols(dbuf.data(), layer.patch_size(), oh * ow);
  dcols.noalias() = layer.kernel_matrix().transpose() * dout;
  *grad_input = Tensor<Scalar>(input.shape());
  Scalar* din = grad_input->data();
  for (Index c = 0; c < layer.in_channels; ++c) {
    for (Index ky = 0; ky < layer.kernel_h; ++ky) {
      for (Index kx = 0; kx < layer.kernel_w; ++kx) {
        const Scalar* src =
            dcols.data() + ((c * layer.kernel_h + ky) * layer.kernel_w + kx) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          Scalar* dst = din + (c * h + oy * layer.stride_h + ky) * w + kx;
          for (Index ox = 0; ox < ow; ++ox) dst[ox * layer.stride_w] += src[oy * ow + ox];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Tensor<Scalar> relu(Tensor<Scalar> x) {
  x.values() = x.values().cwiseMax(Scalar(0));
  return x;
}

// Gradient through relu given its output.
template <typename Derived, typename OutDerived>
auto relu_backward(const Eigen::MatrixBase<Derived>& grad,
                   const Eigen::MatrixBase<OutDerived>& output) {
  using Scalar = typename Derived::Scalar;
  return (output.array() > Scalar(0)).select(grad, Scalar(0));
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Max-shifted softmax.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

inline constexpr double kProbabilityFloor = 1e-12;

template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& p, Index y) {
  using Scalar = typename Derived::Scalar;
  const Scalar py = std::clamp(p[y], Scalar(kProbabilityFloor), Scalar(1));
  return -std::log(py);
}

// ---------------------------------------------------------------------------
// Dense

enum class Activation { kNone, kRelu };

/// y = activation(W^T x + b) with W stored [inputs x outputs].
template <typename Scalar, bool Mutable = false>
struct DenseView {
  DataPtr<Scalar, Mutable> weights = nullptr;
  DataPtr<Scalar, Mutable> bias = nullptr;
  Index inputs = 0;
  Index outputs = 0;

  MatrixMap<Scalar, Mutable> weight_matrix() const {
    return MatrixMap<Scalar, Mutable>(weights, inputs, outputs);
  }
  VectorMap<Scalar, Mutable> bias_vector() const {
    return VectorMap<Scalar, Mutable>(bias, outputs);
  }
};

template <typename Scalar, bool M>
Vector<Scalar> dense(const Eigen::Ref<const Vector<Scalar>>& x, const DenseView<Scalar, M>& layer,
                     Activation activation, const char* name = "dense") {
  if (x.size() != layer.inputs) {
    throw ShapeError(std::string(name) + ": input has " + std::to_string(x.size()) +
                     " features, layer expects " + std::to_string(layer.inputs));
  }
  Vector<Scalar> y = layer.bias_vector();
  y.noalias() += layer.weight_matrix().transpose() * x;
  if (activation == Activation::kRelu) y = y.cwiseMax(Scalar(0));
  return y;
}

// `grad_pre` is the gradient w.r.t. the pre-activation output. Returns the
// input gradient.
template <typename Scalar, bool M>
Vector<Scalar> dense_backward(const Eigen::Ref<const Vector<Scalar>>& x,
                              const DenseView<Scalar, M>& layer,
                              const Eigen::Ref<const Vector<Scalar>>& grad_pre,
                              const DenseView<Scalar, true>& grads) {
  grads.weight_matrix().noalias() += x * grad_pre.transpose();
  grads.bias_vector() += grad_pre;
  return layer.weight_matrix() * grad_pre;
}

// ---------------------------------------------------------------------------
// LSTM

enum Gate : int { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCellGate = 3 };
inline constexpr int kNumGates = 4;
inline constexpr const char* kGateSuffix[kNumGates] = {"i", "f", "o", "c"};

/// Single-layer LSTM weights: W_x* [input_dim x hidden], W_h* [hidden x
/// hidden], b* [hidden] for gates i, f, o and the cell candidate c.
template <typename Scalar, bool Mutable = false>
struct LstmView {
  DataPtr<Scalar, Mutable> w_x[kNumGates] = {};
  DataPtr<Scalar, Mutable> w_h[kNumGates] = {};
  DataPtr<Scalar, Mutable> b[kNumGates] = {};
  Index input_dim = 0;
  Index hidden = 0;

  MatrixMap<Scalar, Mutable> wx(int g) const {
    return MatrixMap<Scalar, Mutable>(w_x[g], input_dim, hidden);
  }
  MatrixMap<Scalar, Mutable> wh(int g) const {
    return MatrixMap<Scalar, Mutable>(w_h[g], hidden, hidden);
  }
  VectorMap<Scalar, Mutable> bias(int g) const { return VectorMap<Scalar, Mutable>(b[g], hidden); }
};

template <typename Scalar>
struct LstmState {
  Vector<Scalar> h;
  Vector<Scalar> c;

  static LstmState zeros(Index hidden) {
    return {Vector<Scalar>::Zero(hidden), Vector<Scalar>::Zero(hidden)};
  }
};

template <typename Scalar>
struct LstmStepCache {
  Vector<Scalar> x, h_prev, c_prev;
  Vector<Scalar> gate[kNumGates];  // post-nonlinearity i, f, o, g
  Vector<Scalar> tanh_c;
};

/// i = s(x W_xi + h W_hi + b_i), f = s(...), o = s(...), g = tanh(...),
/// c = f . c_prev + i . g, h = o . tanh(c), with s the logistic function.
template <typename Scalar, bool M>
LstmState<Scalar> lstm_step(const Eigen::Ref<const Vector<Scalar>>& x,
                            const LstmState<Scalar>& prev, const LstmView<Scalar, M>& p,
                            LstmStepCache<Scalar>* cache = nullptr) {
  if (x.size() != p.input_dim) {
    throw ShapeError("lstm: input has " + std::to_string(x.size()) + " features, expected " +
                     std::to_string(p.input_dim));
  }
  if (prev.h.size() != p.hidden || prev.c.size() != p.hidden) {
    throw ShapeError("lstm: state size does not match " + std::to_string(p.hidden) + " cells");
  }
  Vector<Scalar> gate[kNumGates];
  for (int g = 0; g < kNumGates; ++g) {
    Vector<Scalar> a = p.bias(g);
    a.noalias() += p.wx(g).transpose() * x;
    a.noalias() += p.wh(g).transpose() * prev.h;
    if (g == kCellGate) {
      gate[g] = a.array().tanh().matrix();
    } else {
      gate[g] = a.unaryExpr([](Scalar v) { return logistic(v); });
    }
  }
  LstmState<Scalar> next;
  next.c = gate[kForgetGate].cwiseProduct(prev.c) + gate[kInputGate].cwiseProduct(gate[kCellGate]);
  Vector<Scalar> tanh_c = next.c.array().tanh().matrix();
  next.h = gate[kOutputGate].cwiseProduct(tanh_c);
  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    for (int g = 0; g < kNumGates; ++g) cache->gate[g] = std::move(gate[g]);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

template <typename Scalar>
struct LstmStepGrad {
  Vector<Scalar> dx, dh_prev, dc_prev;
};

/// Backpropagates dh (w.r.t. this step's h) and dc (w.r.t. this step's c,
/// coming from the next step) through one step.
template <typename Scalar, bool M>
LstmStepGrad<Scalar> lstm_step_backward(const LstmStepCache<Scalar>& cache,
                                        const LstmView<Scalar, M>& p,
                                        const Eigen::Ref<const Vector<Scalar>>& dh,
                                        const Eigen::Ref<const Vector<Scalar>>& dc_next,
                                        const LstmView<Scalar, true>& grads) {
  const auto& i = cache.gate[kInputGate];
  const auto& f = cache.gate[kForgetGate];
  const auto& o = cache.gate[kOutputGate];
  const auto& g = cache.gate[kCellGate];
  const Vector<Scalar> dc =
      dc_next + dh.cwiseProduct(o).cwiseProduct(
                    (Scalar(1) - cache.tanh_c.array().square()).matrix());
  Vector<Scalar> da[kNumGates];
  da[kOutputGate] = dh.cwiseProduct(cache.tanh_c).cwiseProduct(
      o.cwiseProduct((Scalar(1) - o.array()).matrix()));
  da[kInputGate] = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((Scalar(1) - i.array()).matrix()));
  da[kForgetGate] =
      dc.cwiseProduct(cache.c_prev).cwiseProduct(f.cwiseProduct((Scalar(1) - f.array()).matrix()));
  da[kCellGate] = dc.cwiseProduct(i).cwiseProduct((Scalar(1) - g.array().square()).matrix());

  LstmStepGrad<Scalar> out;
  out.dx = Vector<Scalar>::Zero(p.input_dim);
  out.dh_prev = Vector<Scalar>::Zero(p.hidden);
  for (int k = 0; k < kNumGates; ++k) {
    grads.wx(k).noalias() += cache.x * da[k].transpose();
    grads.wh(k).noalias() += cache.h_prev * da[k].transpose();
    grads.bias(k) += da[k];
    out.dx.noalias() += p.wx(k) * da[k];
    out.dh_prev.noalias() += p.wh(k) * da[k];
  }
  out.dc_prev = dc.cwiseProduct(f);
  return out;
}

}  // namespace preictal::nn

#endif  // PREICTAL_NN_LAYERS_HPP_
