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

#include <vector>

#include "resunet/autograd.hpp"

namespace resunet {

enum class Mode { Train, Eval };

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  explicit BatchNormStats(std::size_t channels)
      : running_mean(Shape{channels}, T{0}), running_var(Shape{channels}, T{1}) {}
};

/// Output extent of a "same"-padded convolution along one axis.
std::size_t same_output_extent(std::size_t extent, int stride);

/// Cross-correlation with dilated taps and "same" zero padding: output extent
/// is ceil(extent / stride); the odd padding pixel goes on the trailing side.
/// `bias` may be undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int dilation);

/// Per-channel normalisation over the N*H*W population. Train mode uses batch
/// statistics and updates `stats` as running = momentum*running + (1-momentum)*batch.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>& stats, Mode mode,
                  double momentum = kBatchNormMomentum, double epsilon = kBatchNormEpsilon);

template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
/// Softmax over axis 1 of an NCHW tensor.
template <typename T>
Var<T> softmax_channel(const Var<T>& x);

/// Splits each plane into cells x cells equal rectangles and broadcasts each
/// rectangle's maximum over it. Gradient goes to the first maximum in
/// row-major order.
template <typename T>
Var<T> max_pool_grid(const Var<T>& x, std::size_t cells);

template <typename T>
Var<T> nearest_upsample(const Var<T>& x, std::size_t factor);

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs);

/// Channels [start, start + count) of an NCHW tensor.
template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t start, std::size_t count);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b);
/// scale * x + shift, element-wise.
template <typename T>
Var<T> affine(const Var<T>& x, double scale, double shift);
template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);
/// [N,C,H,W] -> [N,C], summing each plane.
template <typename T>
Var<T> spatial_sum(const Var<T>& x);
/// [N,C] -> [N], sum_c weights[n,c] * x[n,c] with constant weights.
template <typename T>
Var<T> weighted_row_sum(const Var<T>& x, const Tensor<T>& weights);

}  // namespace resunet
