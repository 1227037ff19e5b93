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

#include "facevsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace facevsr {

namespace {
int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw InvalidArgument("negative tensor dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape, Scalar fill) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
}

int64_t Tensor::offset(std::initializer_list<int64_t> idx) const {
  if (static_cast<int>(idx.size()) != rank())
    throw InvalidArgument("index rank " + std::to_string(idx.size()) +
                          " does not match tensor rank " + std::to_string(rank()));
  int64_t off = 0;
  int i = 0;
  for (int64_t v : idx) {
    off = off * shape_[static_cast<size_t>(i)] + v;
    ++i;
  }
  return off;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  if (shape_numel(shape) != numel())
    throw ShapeMismatch("reshape from " + shape_str() + " changes element count");
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

Scalar Tensor::min() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

Scalar Tensor::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

Scalar Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (Scalar v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other))
    throw ShapeMismatch("elementwise add " + shape_str() + " vs " + other.shape_str());
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(Scalar s) {
  for (auto& v : data_) v *= s;
  return *this;
}

void check_shape(const Tensor& t, const std::vector<int64_t>& shape,
                 const std::string& what) {
  if (t.shape() != shape) {
    Tensor probe(shape);
    throw ShapeMismatch(what + ": expected " + probe.shape_str() + ", got " +
                        t.shape_str());
  }
}

}  // namespace facevsr
