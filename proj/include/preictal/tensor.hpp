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

#ifndef PREICTAL_TENSOR_HPP_
#define PREICTAL_TENSOR_HPP_

#include <Eigen/Core>

#include <array>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "preictal/error.hpp"

namespace preictal {

using Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Dense row-major tensor: a shape plus a flat Eigen vector of values.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), values_(Vector<Scalar>::Zero(shape_size(shape_))) {
    check_shape();
  }

  Tensor(Shape shape, Vector<Scalar> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (values_.size() != shape_size(shape_)) {
      throw ShapeError("tensor values (" + std::to_string(values_.size()) +
                       ") do not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return values_.size(); }

  const Vector<Scalar>& values() const { return values_; }
  Vector<Scalar>& values() { return values_; }
  const Scalar* data() const { return values_.data(); }
  Scalar* data() { return values_.data(); }

  template <typename... Ix>
  Scalar& operator()(Ix... ix) {
    return values_[offset(ix...)];
  }
  template <typename... Ix>
  const Scalar& operator()(Ix... ix) const {
    return values_[offset(ix...)];
  }

  // View of the values as a row-major rows x cols matrix.
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    return Eigen::Map<const RowMatrix<Scalar>>(values_.data(), rows, cols);
  }
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    return Eigen::Map<RowMatrix<Scalar>>(values_.data(), rows, cols);
  }

  bool all_finite() const { return values_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>());
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  void check_shape() const {
    for (Index d : shape_) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape_));
    }
  }

  template <typename... Ix>
  Index offset(Ix... ix) const {
    const std::array<Index, sizeof...(Ix)> idx{static_cast<Index>(ix)...};
    Index off = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) off = off * shape_[i] + idx[i];
    return off;
  }

  Shape shape_;
  Vector<Scalar> values_;
};

}  // namespace preictal

#endif  // PREICTAL_TENSOR_HPP_
