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

// CNN -> LSTM -> dense classifier over sequences of spectrogram windows.
//
// Per window: conv1 -> relu -> conv2 -> relu -> conv3 -> relu -> flatten ->
// lstm_step -> dense1 (relu) -> dense2 (relu) -> head -> softmax. The LSTM
// state carries across consecutive windows.

#ifndef PREICTAL_NN_MODEL_HPP_
#define PREICTAL_NN_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "preictal/nn/layers.hpp"
#include "preictal/tensor.hpp"

namespace preictal::nn {

struct ModelConfig {
  Index input_channels = 18;
  Index input_height = 59;
  Index input_width = 114;
  std::array<Index, 3> conv_filters = {20, 40, 60};
  std::array<Index, 3> conv_strides = {2, 1, 2};
  Index kernel = 7;
  Index lstm_hidden = 512;
  Index dense1 = 1024;
  Index dense2 = 512;
  Index classes = 2;

  // Shapes after input, conv1, conv2, conv3, flatten, lstm, dense1, dense2,
  // head. Throws ShapeError naming the first layer that cannot be applied.
  std::vector<Shape> shape_chain() const;
  Index flatten_size() const;

  // Full-size network.
  static ModelConfig standard() { return {}; }
  // 2/2/2 filters and 8 LSTM cells on a 2 x 35 x 37 input, for gradient
  // checks.
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

struct ParamEntry {
  std::string name;
  Shape shape;
  Index offset = 0;
  Index size = 0;
};

/// Named tensors packed into one flat vector.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& find(const std::string& name) const;
  // Name of the tensor that owns flat index i.
  const ParamEntry& owner(Index i) const;
  Index total_size() const { return total_; }

 private:
  void add(std::string name, Shape shape);
  std::vector<ParamEntry> entries_;
  Index total_ = 0;
};

/// All learnable weights. Gradients use the same type.
class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return *layout_; }

  Vector<double>& values() { return values_; }
  const Vector<double>& values() const { return values_; }

  Eigen::Map<Vector<double>> tensor(const std::string& name);
  Eigen::Map<const Vector<double>> tensor(const std::string& name) const;

  ConvView<double> conv(int layer) const;
  ConvView<double, true> conv(int layer);
  LstmView<double> lstm() const;
  LstmView<double, true> lstm();
  // 0: dense1, 1: dense2, 2: head.
  DenseView<double> dense(int layer) const;
  DenseView<double, true> dense(int layer);

  ModelParams zeros_like() const;
  bool operator==(const ModelParams& other) const {
    return config_ == other.config_ && values_ == other.values_;
  }

 private:
  ModelConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  Vector<double> values_;
};

/// Xavier-uniform weights, a = sqrt(6 / (fan_in + fan_out)) per matrix
/// (conv fans include the kernel area); forget-gate bias 1, other biases 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

using Window = Tensor<double>;
using WindowSeq = std::span<const Window* const>;
using State = LstmState<double>;

State zero_state(const ModelConfig& config);

struct ForwardResult {
  RowMatrix<double> probs;  // [T x classes]
  State state;
};

ForwardResult forward(WindowSeq seq, const ModelParams& params, const State& state);
ForwardResult forward(const std::vector<Window>& seq, const ModelParams& params,
                      const State& state);

// Mean cross-entropy over the sequence.
double sequence_loss(WindowSeq seq, std::span<const int> labels, const ModelParams& params,
                     const State& state);

struct BackwardResult {
  double loss = 0.0;
  ModelParams grads;
  RowMatrix<double> probs;
};

/// Exact gradients of the mean cross-entropy over all steps, by
/// backpropagation through time.
BackwardResult backward(WindowSeq seq, std::span<const int> labels, const ModelParams& params,
                        const State& state);

// Convolutional features of one window (flattened conv3 output).
Vector<double> encode(const Window& window, const ModelParams& params);

// Recurrent head over precomputed features; returns [T x classes].
RowMatrix<double> classify_features(std::span<const Vector<double>> features,
                                    const ModelParams& params, const State& state,
                                    State* final_state = nullptr);

struct Sample {
  std::vector<const Window*> windows;
  std::vector<int> labels;
};

struct BatchResult {
  double loss = 0.0;               // mean over samples (each a mean over steps)
  std::vector<double> sample_losses;
  ModelParams grads;               // mean over samples
};

/// Gradients for a batch, every sample from a zero LSTM state. Samples may
/// run on several threads; per-sample gradients are summed in sample order.
BatchResult batch_backward(std::span<const Sample> batch, const ModelParams& params,
                           int threads = 1);

// Checkpoint file: "CKPT" | version u16 | count u32 | count x (name
// u16-prefixed UTF-8 | rank u8 | rank x u64 dims | f64 values).
struct NamedTensor {
  std::string name;
  Shape shape;
  Vector<double> values;
};

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

void write_tensor_table(const std::filesystem::path& path,
                        const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_table(const std::filesystem::path& path);

// "model.config" followed by one entry per parameter tensor.
std::vector<NamedTensor> params_to_table(const ModelParams& params);
ModelParams params_from_table(const std::vector<NamedTensor>& table);

}  // namespace preictal::nn

#endif  // PREICTAL_NN_MODEL_HPP_
