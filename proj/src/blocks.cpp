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

#include "resunet/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace resunet {

template <typename T>
void ParameterStore<T>::check_unique(const std::string& name) const {
  const bool taken = std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; }) ||
                     std::any_of(stats_.begin(), stats_.end(), [&](const auto& s) { return s.name == name; });
  if (taken) throw ShapeError("duplicate parameter name '" + name + "'");
}

template <typename T>
Var<T> ParameterStore<T>::conv_weight(const std::string& name, std::size_t cout, std::size_t cin, std::size_t k) {
  check_unique(name);
  Tensor<T> w(Shape{cout, cin, k, k});
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(cin * k * k)));
  for (auto& v : w.values()) v = static_cast<T>(dist(rng_));
  params_.push_back({name, parameter(std::move(w))});
  return params_.back().var;
}

template <typename T>
Var<T> ParameterStore<T>::filled(const std::string& name, Shape shape, T value) {
  check_unique(name);
  params_.push_back({name, parameter(Tensor<T>(std::move(shape), value))});
  return params_.back().var;
}

template <typename T>
std::shared_ptr<BatchNormStats<T>> ParameterStore<T>::stats(const std::string& name, std::size_t channels) {
  check_unique(name);
  stats_.push_back({name, std::make_shared<BatchNormStats<T>>(channels)});
  return stats_.back().stats;
}

template <typename T>
std::vector<Var<T>> ParameterStore<T>::vars() const {
  std::vector<Var<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var);
  return out;
}

template <typename T>
std::size_t ParameterStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

template <typename T>
Var<T> ParameterStore<T>::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.var;
  throw ShapeError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
void ParameterStore<T>::remove_prefix(std::string_view prefix) {
  std::erase_if(params_, [&](const auto& p) { return p.name.starts_with(prefix); });
  std::erase_if(stats_, [&](const auto& s) { return s.name.starts_with(prefix); });
}

template <typename T>
Conv2d<T>::Conv2d(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
                  std::size_t out_channels, std::size_t kernel, int stride, int dilation, bool bias)
    : stride_(stride), dilation_(dilation) {
  weight_ = store.conv_weight(name + ".weight", out_channels, in_channels, kernel);
  if (bias) bias_ = store.filled(name + ".bias", Shape{out_channels}, T{0});
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParameterStore<T>& store, const std::string& name, std::size_t channels) {
  gamma_ = store.filled(name + ".gamma", Shape{channels}, T{1});
  beta_ = store.filled(name + ".beta", Shape{channels}, T{0});
  stats_ = store.stats(name + ".stats", channels);
}

template <typename T>
Conv2dN<T>::Conv2dN(ParameterStore<T>& store, const std::string& name, std::size_t in_channels, std::size_t filters,
                    std::size_t kernel, int dilation, int stride)
    : conv_(store, name + ".conv", in_channels, filters, kernel, stride, dilation, /*bias=*/false),
      bn_(store, name + ".bn", filters) {}

void BlockConfig::validate() const {
  if (filters < 1) throw ShapeError("BlockConfig: filters must be >= 1");
  if (kernel < 1) throw ShapeError("BlockConfig: kernel must be >= 1");
  if (stride != 1) throw ShapeError("BlockConfig: residual blocks need stride 1, got " + std::to_string(stride));
  if (dilations.empty() || dilations.front() != 1)
    throw ShapeError("BlockConfig: dilations must be non-empty and start at 1");
  for (std::size_t i = 1; i < dilations.size(); ++i)
    if (dilations[i] <= dilations[i - 1]) throw ShapeError("BlockConfig: dilations must be strictly increasing");
}

template <typename T>
ResBlockA<T>::ResBlockA(ParameterStore<T>& store, const std::string& name, BlockConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::size_t f = cfg_.filters;
  for (int d : cfg_.dilations) {
    const std::string prefix = name + ".d" + std::to_string(d);
    Branch b;
    b.bn1 = BatchNorm2d<T>(store, prefix + ".bn1", f);
    b.conv1 = Conv2d<T>(store, prefix + ".conv1", f, f, cfg_.kernel, 1, d, /*bias=*/false);
    b.bn2 = BatchNorm2d<T>(store, prefix + ".bn2", f);
    b.conv2 = Conv2d<T>(store, prefix + ".conv2", f, f, cfg_.kernel, 1, d, /*bias=*/false);
    branches_.push_back(std::move(b));
  }
}

template <typename T>
Var<T> ResBlockA<T>::operator()(const Var<T>& x, Mode mode) const {
  if (x.shape().size() != 4 || x.shape()[1] != cfg_.filters)
    throw ShapeError("ResBlockA: input " + to_string(x.shape()) + " must have " + std::to_string(cfg_.filters) +
                     " channels; insert a 1x1 convolution to match channels first");
  Var<T> out = x;
  for (const auto& b : branches_) {
    Var<T> h = b.conv1(relu(b.bn1(x, mode)));
    h = b.conv2(relu(b.bn2(h, mode)));
    out = add(out, h);
  }
  return out;
}

template <typename T>
PspPooling<T>::PspPooling(ParameterStore<T>& store, const std::string& name, std::size_t channels,
                          std::vector<std::size_t> scales, bool clamp_to_extent)
    : channels_(channels), scales_(std::move(scales)), clamp_(clamp_to_extent) {
  if (scales_.empty()) throw ShapeError("PspPooling: needs at least one scale");
  if (channels_ < scales_.size())
    throw ShapeError("PspPooling: " + std::to_string(channels_) + " channels cannot form " +
                     std::to_string(scales_.size()) + " groups");
  fuse_ = Conv2dN<T>(store, name + ".fuse", 2 * channels_, channels_, 1);
}

template <typename T>
Var<T> PspPooling<T>::operator()(const Var<T>& x, Mode mode) const {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] != channels_)
    throw ShapeError("PspPooling: input " + to_string(xs) + " must have " + std::to_string(channels_) + " channels");
  const std::size_t extent = std::gcd(xs[2], xs[3]);
  const std::size_t groups = scales_.size();
  const std::size_t base = channels_ / groups, extra = channels_ % groups;
  std::vector<Var<T>> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i < groups; ++i) {
    std::size_t cells = scales_[i];
    if (clamp_) {
      cells = std::min(cells, extent);
      while (extent % cells != 0) --cells;
    } else if (xs[2] % cells != 0 || xs[3] % cells != 0) {
      throw ShapeError("PspPooling: spatial extents of " + to_string(xs) + " must be divisible by scale " +
                       std::to_string(cells));
    }
    const std::size_t count = base + (i < extra ? 1 : 0);
    parts.push_back(max_pool_grid(slice_channels(x, start, count), cells));
    start += count;
  }
  parts.push_back(x);
  return fuse_(concat_channels(parts), mode);
}

template <typename T>
Combine<T>::Combine(ParameterStore<T>& store, const std::string& name, std::size_t a_channels,
                    std::size_t b_channels, std::size_t filters)
    : fuse_(store, name + ".fuse", a_channels + b_channels, filters, 1) {}

template <typename T>
Var<T> Combine<T>::operator()(const Var<T>& a, const Var<T>& b, Mode mode) const {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 4 || bs.size() != 4 || as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
    throw ShapeError("Combine: inputs " + to_string(as) + " and " + to_string(bs) +
                     " must share N, H and W; upsample first");
  return fuse_(concat_channels<T>({relu(a), b}), mode);
}

template <typename T>
UpSampleBlock<T>::UpSampleBlock(ParameterStore<T>& store, const std::string& name, std::size_t in_channels,
                                std::size_t filters)
    : conv_(store, name + ".conv", in_channels, filters, 1) {}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Conv2dN<float>;
template class Conv2dN<double>;
template class ResBlockA<float>;
template class ResBlockA<double>;
template class PspPooling<float>;
template class PspPooling<double>;
template class Combine<float>;
template class Combine<double>;
template class UpSampleBlock<float>;
template class UpSampleBlock<double>;

}  // namespace resunet
