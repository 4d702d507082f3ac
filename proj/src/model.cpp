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

#include "preictal/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "preictal/error.hpp"
#include "preictal/parallel.hpp"
#include "preictal/rng.hpp"

namespace preictal::nn {

namespace {

constexpr char kCkptMagic[4] = {'C', 'K', 'P', 'T'};
constexpr const char* kConvName[3] = {"conv1", "conv2", "conv3"};
constexpr const char* kDenseName[3] = {"dense1", "dense2", "head"};

std::string gate_name(const char* kind, int g) {
  return std::string("lstm.") + kind + kGateSuffix[g];
}

struct StepCache {
  const Window* input = nullptr;
  Window a1, a2, a3;
  LstmStepCache<double> lstm;
  Vector<double> h, d1, d2, probs;
};

Vector<double> encode_impl(const Window& x, const ModelParams& p, StepCache* cache) {
  Window a1 = relu(conv2d(x, p.conv(0), "conv1"));
  Window a2 = relu(conv2d(a1, p.conv(1), "conv2"));
  Window a3 = relu(conv2d(a2, p.conv(2), "conv3"));
  Vector<double> features = a3.values();
  if (cache) {
    cache->input = &x;
    cache->a1 = std::move(a1);
    cache->a2 = std::move(a2);
    cache->a3 = std::move(a3);
  }
  return features;
}

Vector<double> head_impl(const Vector<double>& h, const ModelParams& p, StepCache* cache) {
  Vector<double> d1 = dense<double>(h, p.dense(0), Activation::kRelu, "dense1");
  Vector<double> d2 = dense<double>(d1, p.dense(1), Activation::kRelu, "dense2");
  const Vector<double> logits = dense<double>(d2, p.dense(2), Activation::kNone, "head");
  Vector<double> probs = softmax(logits);
  if (cache) {
    cache->h = h;
    cache->d1 = std::move(d1);
    cache->d2 = std::move(d2);
    cache->probs = probs;
  }
  return probs;
}

void check_labels(std::span<const int> labels, std::size_t steps, Index classes) {
  if (labels.size() != steps) {
    throw ShapeError("labels (" + std::to_string(labels.size()) + ") do not match sequence (" +
                     std::to_string(steps) + ")");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw ShapeError("label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.input_channels = 2;
  c.input_height = 35;
  c.input_width = 37;
  c.conv_filters = {2, 2, 2};
  c.lstm_hidden = 8;
  c.dense1 = 6;
  c.dense2 = 4;
  return c;
}

std::vector<Shape> ModelConfig::shape_chain() const {
  std::vector<Shape> chain;
  Shape cur = {input_channels, input_height, input_width};
  for (Index d : cur) {
    if (d <= 0) throw ShapeError("input shape must be positive: " + shape_string(cur));
  }
  chain.push_back(cur);
  for (int l = 0; l < 3; ++l) {
    if (cur[1] < kernel || cur[2] < kernel) {
      throw ShapeError(std::string(kConvName[l]) + ": input " + shape_string(cur) +
                       " smaller than " + std::to_string(kernel) + "x" +
                       std::to_string(kernel) + " kernel");
    }
    if (conv_filters[l] <= 0 || conv_strides[l] <= 0) {
      throw ShapeError(std::string(kConvName[l]) + ": filters and stride must be positive");
    }
    cur = {conv_filters[l], (cur[1] - kernel) / conv_strides[l] + 1,
           (cur[2] - kernel) / conv_strides[l] + 1};
    chain.push_back(cur);
  }
  chain.push_back({shape_size(cur)});
  for (Index width : {lstm_hidden, dense1, dense2, classes}) {
    if (width <= 0) throw ShapeError("layer widths must be positive");
    chain.push_back({width});
  }
  return chain;
}

Index ModelConfig::flatten_size() const { return shape_chain()[4][0]; }

ParamLayout::ParamLayout(const ModelConfig& c) {
  const auto chain = c.shape_chain();
  for (int l = 0; l < 3; ++l) {
    add(std::string(kConvName[l]) + ".kernels",
        {c.conv_filters[l], chain[l][0], c.kernel, c.kernel});
    add(std::string(kConvName[l]) + ".bias", {c.conv_filters[l]});
  }
  const Index in = c.flatten_size();
  for (int g = 0; g < kNumGates; ++g) add(gate_name("W_x", g), {in, c.lstm_hidden});
  for (int g = 0; g < kNumGates; ++g) add(gate_name("W_h", g), {c.lstm_hidden, c.lstm_hidden});
  for (int g = 0; g < kNumGates; ++g) add(gate_name("b_", g), {c.lstm_hidden});
  const Index widths[4] = {c.lstm_hidden, c.dense1, c.dense2, c.classes};
  for (int l = 0; l < 3; ++l) {
    add(std::string(kDenseName[l]) + ".W", {widths[l], widths[l + 1]});
    add(std::string(kDenseName[l]) + ".b", {widths[l + 1]});
  }
}

void ParamLayout::add(std::string name, Shape shape) {
  const Index n = shape_size(shape);
  entries_.push_back({std::move(name), std::move(shape), total_, n});
  total_ += n;
}

const ParamEntry& ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw ShapeError("no parameter tensor named '" + name + "'");
}

const ParamEntry& ParamLayout::owner(Index i) const {
  for (const auto& e : entries_) {
    if (i >= e.offset && i < e.offset + e.size) return e;
  }
  throw ShapeError("parameter index " + std::to_string(i) + " out of range");
}

ModelParams::ModelParams(const ModelConfig& config)
    : config_(config),
      layout_(std::make_shared<const ParamLayout>(config)),
      values_(Vector<double>::Zero(layout_->total_size())) {}

ModelParams ModelParams::zeros_like() const {
  ModelParams p = *this;
  p.values_.setZero();
  return p;
}

Eigen::Map<Vector<double>> ModelParams::tensor(const std::string& name) {
  const auto& e = layout_->find(name);
  return Eigen::Map<Vector<double>>(values_.data() + e.offset, e.size);
}

Eigen::Map<const Vector<double>> ModelParams::tensor(const std::string& name) const {
  const auto& e = layout_->find(name);
  return Eigen::Map<const Vector<double>>(values_.data() + e.offset, e.size);
}

namespace {

template <bool M, typename P>
ConvView<double, M> conv_view(P& p, int l) {
  const auto& k = p.layout().find(std::string(kConvName[l]) + ".kernels");
  const auto& b = p.layout().find(std::string(kConvName[l]) + ".bias");
  const auto& c = p.config();
  return {p.values().data() + k.offset, p.values().data() + b.offset, k.shape[0], k.shape[1],
          c.kernel, c.kernel, c.conv_strides[l], c.conv_strides[l]};
}

template <bool M, typename P>
LstmView<double, M> lstm_view(P& p) {
  LstmView<double, M> v;
  for (int g = 0; g < kNumGates; ++g) {
    v.w_x[g] = p.values().data() + p.layout().find(gate_name("W_x", g)).offset;
    v.w_h[g] = p.values().data() + p.layout().find(gate_name("W_h", g)).offset;
    v.b[g] = p.values().data() + p.layout().find(gate_name("b_", g)).offset;
  }
  v.input_dim = p.layout().find(gate_name("W_x", 0)).shape[0];
  v.hidden = p.config().lstm_hidden;
  return v;
}

template <bool M, typename P>
DenseView<double, M> dense_view(P& p, int l) {
  const auto& w = p.layout().find(std::string(kDenseName[l]) + ".W");
  const auto& b = p.layout().find(std::string(kDenseName[l]) + ".b");
  return {p.values().data() + w.offset, p.values().data() + b.offset, w.shape[0], w.shape[1]};
}

}  // namespace

ConvView<double> ModelParams::conv(int l) const { return conv_view<false>(*this, l); }
ConvView<double, true> ModelParams::conv(int l) { return conv_view<true>(*this, l); }
LstmView<double> ModelParams::lstm() const { return lstm_view<false>(*this); }
LstmView<double, true> ModelParams::lstm() { return lstm_view<true>(*this); }
DenseView<double> ModelParams::dense(int l) const { return dense_view<false>(*this, l); }
DenseView<double, true> ModelParams::dense(int l) { return dense_view<true>(*this, l); }

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  const auto& entries = p.layout().entries();
  for (std::size_t t = 0; t < entries.size(); ++t) {
    const auto& e = entries[t];
    auto v = p.tensor(e.name);
    const bool is_bias = e.shape.size() == 1;
    if (is_bias) {
      v.setConstant(e.name == gate_name("b_", kForgetGate) ? 1.0 : 0.0);
      continue;
    }
    double fan_in = 0;
    double fan_out = 0;
    if (e.shape.size() == 4) {
      const double area = static_cast<double>(e.shape[2] * e.shape[3]);
      fan_in = static_cast<double>(e.shape[1]) * area;
      fan_out = static_cast<double>(e.shape[0]) * area;
    } else {
      fan_in = static_cast<double>(e.shape[0]);
      fan_out = static_cast<double>(e.shape[1]);
    }
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    CounterRng rng(seed, t);
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-a, a);
  }
  return p;
}

State zero_state(const ModelConfig& config) { return State::zeros(config.lstm_hidden); }

ForwardResult forward(WindowSeq seq, const ModelParams& params, const State& state) {
  ForwardResult out;
  std::vector<Vector<double>> features;
  features.reserve(seq.size());
  for (const Window* w : seq) features.push_back(encode(*w, params));
  out.probs = classify_features(features, params, state, &out.state);
  return out;
}

ForwardResult forward(const std::vector<Window>& seq, const ModelParams& params,
                      const State& state) {
  std::vector<const Window*> ptrs;
  for (const auto& w : seq) ptrs.push_back(&w);
  return forward(WindowSeq(ptrs), params, state);
}

Vector<double> encode(const Window& window, const ModelParams& params) {
  const auto& c = params.config();
  if (window.shape() != Shape{c.input_channels, c.input_height, c.input_width}) {
    throw ShapeError("input: window " + shape_string(window.shape()) + " does not match " +
                     shape_string({c.input_channels, c.input_height, c.input_width}));
  }
  return encode_impl(window, params, nullptr);
}

RowMatrix<double> classify_features(std::span<const Vector<double>> features,
                                    const ModelParams& params, const State& state,
                                    State* final_state) {
  RowMatrix<double> probs(static_cast<Index>(features.size()), params.config().classes);
  State s = state;
  const auto lstm = params.lstm();
  for (std::size_t t = 0; t < features.size(); ++t) {
    s = lstm_step<double>(features[t], s, lstm);
    probs.row(static_cast<Index>(t)) = head_impl(s.h, params, nullptr).transpose();
  }
  if (final_state) *final_state = std::move(s);
  return probs;
}

double sequence_loss(WindowSeq seq, std::span<const int> labels, const ModelParams& params,
                     const State& state) {
  check_labels(labels, seq.size(), params.config().classes);
  const auto r = forward(seq, params, state);
  double loss = 0.0;
  for (Index t = 0; t < r.probs.rows(); ++t) {
    loss += cross_entropy(r.probs.row(t).transpose(), labels[static_cast<std::size_t>(t)]);
  }
  return loss / static_cast<double>(seq.size());
}

BackwardResult backward(WindowSeq seq, std::span<const int> labels, const ModelParams& params,
                        const State& state) {
  const auto& cfg = params.config();
  check_labels(labels, seq.size(), cfg.classes);
  if (seq.empty()) throw ShapeError("backward: empty sequence");
  const std::size_t steps = seq.size();
  const double inv_t = 1.0 / static_cast<double>(steps);

  std::vector<StepCache> caches(steps);
  BackwardResult out{0.0, params.zeros_like(), RowMatrix<double>(static_cast<Index>(steps), cfg.classes)};
  const auto lstm = params.lstm();
  State s = state;
  for (std::size_t t = 0; t < steps; ++t) {
    encode(*seq[t], params);  // shape check
    const Vector<double> features = encode_impl(*seq[t], params, &caches[t]);
    s = lstm_step<double>(features, s, lstm, &caches[t].lstm);
    const Vector<double> p = head_impl(s.h, params, &caches[t]);
    out.probs.row(static_cast<Index>(t)) = p.transpose();
    out.loss += cross_entropy(p, labels[t]) * inv_t;
  }

  auto& g = out.grads;
  const auto g_lstm = g.lstm();
  std::vector<Vector<double>> dh_out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& c = caches[t];
    Vector<double> dlogits = c.probs;
    dlogits[labels[t]] -= 1.0;
    dlogits *= inv_t;
    Vector<double> dd2 = dense_backward<double>(c.d2, params.dense(2), dlogits, g.dense(2));
    dd2 = relu_backward(dd2, c.d2);
    Vector<double> dd1 = dense_backward<double>(c.d1, params.dense(1), dd2, g.dense(1));
    dd1 = relu_backward(dd1, c.d1);
    dh_out[t] = dense_backward<double>(c.h, params.dense(0), dd1, g.dense(0));
  }

  std::vector<Vector<double>> dfeatures(steps);
  Vector<double> dh_next = Vector<double>::Zero(cfg.lstm_hidden);
  Vector<double> dc_next = Vector<double>::Zero(cfg.lstm_hidden);
  for (std::size_t t = steps; t-- > 0;) {
    const Vector<double> dh = dh_out[t] + dh_next;
    auto step = lstm_step_backward<double>(caches[t].lstm, lstm, dh, dc_next, g_lstm);
    dh_next = std::move(step.dh_prev);
    dc_next = std::move(step.dc_prev);
    dfeatures[t] = std::move(step.dx);
  }

  for (std::size_t t = 0; t < steps; ++t) {
    const auto& c = caches[t];
    Window da3(c.a3.shape(), relu_backward(dfeatures[t], c.a3.values()));
    Window da2;
    conv2d_backward(c.a2, params.conv(2), da3, g.conv(2), &da2);
    da2.values() = relu_backward(da2.values(), c.a2.values());
    Window da1;
    conv2d_backward(c.a1, params.conv(1), da2, g.conv(1), &da1);
    da1.values() = relu_backward(da1.values(), c.a1.values());
    conv2d_backward<double>(*c.input, params.conv(0), da1, g.conv(0), nullptr);
  }
  return out;
}

BatchResult batch_backward(std::span<const Sample> batch, const ModelParams& params,
                           int threads) {
  if (batch.empty()) throw ShapeError("batch_backward: empty batch");
  BatchResult out{0.0, {}, params.zeros_like()};
  const State init = zero_state(params.config());
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, batch.size() - begin);
    auto results = parallel_map(n, threads, [&](std::size_t i) {
      const auto& s = batch[begin + i];
      return backward(WindowSeq(s.windows), s.labels, params, init);
    });
    for (auto& r : results) {
      out.sample_losses.push_back(r.loss);
      out.grads.values() += r.grads.values();
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (double l : out.sample_losses) out.loss += l;
  out.loss *= inv_b;
  out.grads.values() *= inv_b;
  return out;
}

void write_tensor_table(const std::filesystem::path& path,
                        const std::vector<NamedTensor>& tensors) {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kCkptMagic, 4));
  w.put<std::uint16_t>(kCheckpointFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (shape_size(t.shape) != t.values.size()) {
      throw ShapeError("checkpoint tensor '" + t.name + "' size does not match its shape");
    }
    w.put_string16(t.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    for (Index d : t.shape) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.put_array(std::span<const double>(t.values.data(), static_cast<std::size_t>(t.values.size())));
  }
  w.save(path);
}

std::vector<NamedTensor> read_tensor_table(const std::filesystem::path& path) {
  auto r = detail::ByteReader::load(path);
  if (r.get_bytes(4, "magic") != std::string_view(kCkptMagic, 4)) {
    throw FormatError(path.string() + ": bad magic, expected CKPT", 0);
  }
  const auto version_at = r.position();
  if (r.get<std::uint16_t>("version") != kCheckpointFormatVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version", version_at);
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string16("tensor name");
    const auto rank = r.get<std::uint8_t>("rank");
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto at = r.position();
      const auto dim = r.get<std::uint64_t>("dims");
      if (dim == 0 || dim > (1ULL << 40)) throw FormatError("bad tensor dimension", at);
      t.shape.push_back(static_cast<Index>(dim));
    }
    t.values.resize(shape_size(t.shape));
    r.get_array(std::span<double>(t.values.data(), static_cast<std::size_t>(t.values.size())),
                "tensor values");
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes", r.position());
  return out;
}

std::vector<NamedTensor> params_to_table(const ModelParams& params) {
  const auto& c = params.config();
  Vector<double> meta(14);
  meta << c.input_channels, c.input_height, c.input_width, c.conv_filters[0], c.conv_filters[1],
      c.conv_filters[2], c.conv_strides[0], c.conv_strides[1], c.conv_strides[2], c.kernel,
      c.lstm_hidden, c.dense1, c.dense2, c.classes;
  std::vector<NamedTensor> table;
  table.push_back({"model.config", {14}, meta});
  for (const auto& e : params.layout().entries()) {
    table.push_back({e.name, e.shape, params.tensor(e.name)});
  }
  return table;
}

ModelParams params_from_table(const std::vector<NamedTensor>& table) {
  const NamedTensor* meta = nullptr;
  for (const auto& t : table) {
    if (t.name == "model.config") meta = &t;
  }
  if (meta == nullptr || meta->values.size() != 14) {
    throw IntegrityError("checkpoint lacks a valid model.config entry");
  }
  const auto& m = meta->values;
  auto at = [&](int i) { return static_cast<Index>(m[i]); };
  ModelConfig c;
  c.input_channels = at(0);
  c.input_height = at(1);
  c.input_width = at(2);
  c.conv_filters = {at(3), at(4), at(5)};
  c.conv_strides = {at(6), at(7), at(8)};
  c.kernel = at(9);
  c.lstm_hidden = at(10);
  c.dense1 = at(11);
  c.dense2 = at(12);
  c.classes = at(13);
  ModelParams p(c);
  for (const auto& e : p.layout().entries()) {
    const NamedTensor* found = nullptr;
    for (const auto& t : table) {
      if (t.name == e.name) found = &t;
    }
    if (found == nullptr) throw IntegrityError("checkpoint lacks tensor '" + e.name + "'");
    if (found->shape != e.shape) {
      throw IntegrityError("checkpoint tensor '" + e.name + "' has shape " +
                           shape_string(found->shape) + ", expected " + shape_string(e.shape));
    }
    p.tensor(e.name) = found->values;
  }
  return p;
}

}  // namespace preictal::nn
