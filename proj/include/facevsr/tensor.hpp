// Copyright 2026 The FaceVSR Authors
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

#ifndef FACEVSR_TENSOR_HPP_
#define FACEVSR_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "facevsr/errors.hpp"

namespace facevsr {

using Scalar = double;

/// Dense row-major N-d array of doubles. Deliberately small: shape queries,
/// element access, and a few whole-tensor helpers. Hot paths (convolutions,
/// GEMM) work on raw pointers with explicit strides.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape, Scalar fill = 0.0);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, Scalar v) { return Tensor(std::move(shape), v); }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  Scalar operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  int64_t offset(std::initializer_list<int64_t> idx) const;
  Scalar at(std::initializer_list<int64_t> idx) const { return data_[static_cast<size_t>(offset(idx))]; }
  Scalar& at(std::initializer_list<int64_t> idx) { return data_[static_cast<size_t>(offset(idx))]; }

  /// Returns a copy with a new shape; numel must match.
  Tensor reshaped(std::vector<int64_t> shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  void fill(Scalar v);
  Scalar min() const;
  Scalar max() const;
  Scalar sum() const;
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(Scalar s);

 private:
  std::vector<int64_t> shape_;
  std::vector<Scalar> data_;
};

/// Throws ShapeMismatch unless `t` has exactly the given shape.
void check_shape(const Tensor& t, const std::vector<int64_t>& shape,
                 const std::string& what);

}  // namespace facevsr

#endif  // FACEVSR_TENSOR_HPP_
