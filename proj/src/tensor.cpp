// Copyright 2026 The resunet Authors. All Rights Reserved.
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

#include "resunet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace resunet {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (numel(shape_) != data_.size())
    throw ShapeError("shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(data_.size()));
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t i) const {
  if (i >= shape_.size())
    throw ShapeError("axis " + std::to_string(i) + " out of range for " + to_string(shape_));
  return shape_[i];
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<T> out;
  out.reserve(numel(shape));
  for (const auto& t : items) {
    if (t.shape() != inner)
      throw ShapeError("stack: shape " + to_string(t.shape()) + " differs from " + to_string(inner));
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return Tensor<T>(std::move(shape), std::move(out));
}

template <typename T>
Tensor<T> take(const Tensor<T>& batch, std::size_t index) {
  if (batch.rank() < 2 || index >= batch.dim(0))
    throw ShapeError("take: index " + std::to_string(index) + " invalid for " + to_string(batch.shape()));
  Shape inner(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = numel(inner);
  std::vector<T> out(batch.data() + index * n, batch.data() + (index + 1) * n);
  return Tensor<T>(std::move(inner), std::move(out));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> stack(std::span<const Tensor<float>>);
template Tensor<double> stack(std::span<const Tensor<double>>);
template Tensor<float> take(const Tensor<float>&, std::size_t);
template Tensor<double> take(const Tensor<double>&, std::size_t);

}  // namespace resunet
