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

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "resunet/ops.hpp"

namespace resunet {

template <typename T>
struct NamedParameter {
  std::string name;
  Var<T> var;
};

template <typename T>
struct NamedStats {
  std::string name;
  std::shared_ptr<BatchNormStats<T>> stats;
};

/// Owns every trainable tensor and batch-norm buffer of a network, keyed by
/// hierarchical name in registration order. Initialisation draws from one
/// seeded generator so construction is reproducible.
template <typename T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// He-normal initialised convolution kernel [cout, cin, k, k].
  Var<T> conv_weight(const std::string& name, std::size_t cout, std::size_t cin, std::size_t k);
  Var<T> filled(const std::string& name, Shape shape, T value);
  std::shared_ptr<BatchNormStats<T>> stats(const std::string& name, std::size_t channels);

  const std::vector<NamedParameter<T>>& parameters() const noexcept { return params_; }
  const std::vector<NamedStats<T>>& batch_stats() const noexcept { return stats_; }
  std::vector<Var<T>> vars() const;
  std::size_t parameter_count() const;
  Var<T> find(std::string_view name) const;
  void remove_prefix(std::string_view prefix);
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  void check_unique(const std::string& name) const;

  std::mt19937_64 rng_;
  std::vector<NamedParameter<T>> params_;
  std::vector<NamedStats<T>> stats_;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel, int stride = 1, int dilation = 1, bool bias = true);

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight_, bias_, stride_, dilation_); }
  const Var<T>& weight() const noexcept { return weight_; }
  const Var<T>& bias() const noexcept { return bias_; }
  std::size_t out_channels() const { return weight_.shape()[0]; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  int stride_ = 1;
  int dilation_ = 1;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParameterStore<T>& store, const std::string& name, std::size_t channels);

  Var<T> operator()(const Var<T>& x, Mode mode) const { return batch_norm(x, gamma_, beta_, *stats_, mode); }
  const Var<T>& gamma() const noexcept { return gamma_; }
  const Var<T>& beta() const noexcept { return beta_; }
  BatchNormStats<T>& stats() const { return *stats_; }

 private:
  Var<T> gamma_;
  Var<T> beta_;
  std::shared_ptr<BatchNormStats<T>> stats_;
};

/// Bias-free convolution followed by batch normalisation.
template <typename T>
class Conv2dN {
 public:
  Conv2dN() = default;
  Conv2dN(ParameterStore<T>& store, const std::string& name, std::size_t in_channels, std::size_t filters,
          std::size_t kernel = 1, int dilation = 1, int stride = 1);

  Var<T> operator()(const Var<T>& x, Mode mode) const { return bn_(conv_(x), mode); }
  const Conv2d<T>& conv() const noexcept { return conv_; }
  const BatchNorm2d<T>& norm() const noexcept { return bn_; }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
};

struct BlockConfig {
  std::size_t filters = 0;
  std::size_t kernel = 3;
  std::vector<int> dilations{1};
  int stride = 1;

  /// Throws ShapeError unless filters >= 1, kernel >= 1, stride == 1 and the
  /// dilations are non-empty, strictly increasing and start at 1.
  void validate() const;
};

/// Residual unit with one pre-activation branch (BN, ReLU, Conv, BN, ReLU,
/// Conv) per dilation rate. Branch outputs are summed with the raw input in
/// ascending-dilation order.
template <typename T>
class ResBlockA {
 public:
  ResBlockA() = default;
  ResBlockA(ParameterStore<T>& store, const std::string& name, BlockConfig cfg);

  Var<T> operator()(const Var<T>& x, Mode mode) const;
  const BlockConfig& config() const noexcept { return cfg_; }

 private:
  struct Branch {
    BatchNorm2d<T> bn1;
    Conv2d<T> conv1;
    BatchNorm2d<T> bn2;
    Conv2d<T> conv2;
  };
  BlockConfig cfg_;
  std::vector<Branch> branches_;
};

/// Pyramid pooling: the channels are split into one group per scale (leading
/// groups take any remainder), group i is grid max-pooled with scales[i] cells
/// and broadcast back, and the pooled groups are concatenated with the input
/// before a 1x1 normed convolution restores the channel count.
///
/// With `clamp_to_extent`, a scale that does not divide the plane is reduced
/// to the largest divisor below it, so the layer also runs on planes smaller
/// than the largest scale.
template <typename T>
class PspPooling {
 public:
  PspPooling() = default;
  PspPooling(ParameterStore<T>& store, const std::string& name, std::size_t channels, std::vector<std::size_t> scales,
             bool clamp_to_extent = false);

  Var<T> operator()(const Var<T>& x, Mode mode) const;
  const std::vector<std::size_t>& scales() const noexcept { return scales_; }

 private:
  std::size_t channels_ = 0;
  std::vector<std::size_t> scales_;
  bool clamp_ = false;
  Conv2dN<T> fuse_;
};

inline const std::vector<std::size_t> kPspFullScales{1, 2, 4, 8};
inline const std::vector<std::size_t> kPspReducedScales{1, 2, 4};

/// ReLU(a), concatenated with b, then a 1x1 normed convolution to `filters`.
template <typename T>
class Combine {
 public:
  Combine() = default;
  Combine(ParameterStore<T>& store, const std::string& name, std::size_t a_channels, std::size_t b_channels,
          std::size_t filters);

  Var<T> operator()(const Var<T>& a, const Var<T>& b, Mode mode) const;

 private:
  Conv2dN<T> fuse_;
};

/// Nearest-neighbour x2 upsampling followed by a 1x1 normed convolution.
template <typename T>
class UpSampleBlock {
 public:
  UpSampleBlock() = default;
  UpSampleBlock(ParameterStore<T>& store, const std::string& name, std::size_t in_channels, std::size_t filters);

  Var<T> operator()(const Var<T>& x, Mode mode) const { return conv_(nearest_upsample(x, 2), mode); }

 private:
  Conv2dN<T> conv_;
};

}  // namespace resunet
