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

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resunet/models.hpp"

namespace resunet {

/// Smoothing added to the numerator and denominator of every overlap ratio.
inline constexpr double kOverlapEpsilon = 1e-5;

enum class Family { d1, d2, d3 };

struct LossKind {
  Family family = Family::d3;
  bool complement = true;

  bool operator==(const LossKind&) const = default;
};

/// Accepts d1, d2, tanimoto (d3) and tanimoto-complement, plus d1-complement
/// and d2-complement.
LossKind parse_loss(std::string_view s);
std::string to_string(LossKind k);

/// Overlap coefficients over all elements of two equally shaped tensors.
template <typename T>
double dice_d1(const Tensor<T>& p, const Tensor<T>& l);
template <typename T>
double dice_d2(const Tensor<T>& p, const Tensor<T>& l);
template <typename T>
double tanimoto_d3(const Tensor<T>& p, const Tensor<T>& l);
template <typename T>
double overlap(Family f, const Tensor<T>& p, const Tensor<T>& l);
/// Mean of the coefficient on (p, l) and on (1 - p, 1 - l).
template <typename T>
double with_complement(Family f, const Tensor<T>& p, const Tensor<T>& l);

/// Class-weighted Tanimoto over [N,K,H,W] (or [K,H,W]) tensors, pooling every
/// pixel: sum_J w_J sum_i p l / sum_J w_J sum_i (p^2 + l^2 - p l).
template <typename T>
double tanimoto_multiclass(const Tensor<T>& p, const Tensor<T>& l, std::span<const double> weights);

/// Inverse squared class volumes of a one-hot [K,H,W] or [N,K,H,W] label,
/// summed over everything given. Absent classes get 0; the rest are scaled
/// to sum to 1 (this keeps the ratios and keeps the smoothing term negligible).
template <typename T>
std::vector<double> volume_weights(const Tensor<T>& onehot);

enum class Weighting { uniform, volume };

/// Differentiable per-sample coefficient for p, l of shape [N,C,H,W]; sums run
/// over each sample's pixels and the class weights come from that sample's
/// labels. Returns shape [N].
template <typename T>
Var<T> overlap_coefficient(const Var<T>& p, const Tensor<T>& l, LossKind kind, Weighting weighting);

/// Mean over the batch of 1 - coefficient.
template <typename T>
Var<T> overlap_loss(const Var<T>& p, const Tensor<T>& l, LossKind kind, Weighting weighting);

template <typename T>
struct LossTargets {
  Tensor<T> onehot;    // [N,K,H,W]
  Tensor<T> boundary;  // [N,K,H,W]
  Tensor<T> distance;  // [N,K,H,W]
  Tensor<T> hsv;       // [N,3,H,W]
};

template <typename T>
struct TaskLosses {
  Var<T> total;
  Var<T> segmentation, boundary, distance, color;  // undefined when the head is absent
};

/// Unweighted sum of the per-task losses of every head present in `out`.
/// Segmentation and boundary use volume weights, distance and color uniform.
template <typename T>
TaskLosses<T> multitask_loss(const MultiHeadOutput<T>& out, const LossTargets<T>& targets, LossKind kind);

/// The six two-component losses of the gradient-field study.
struct FieldPoint {
  double px, py, value, gx, gy, laplacian;
};

/// Value and analytic gradient of a coefficient at a 2-vector p.
double field_value(LossKind kind, std::array<double, 2> p, std::array<double, 2> l);
std::array<double, 2> field_gradient(LossKind kind, std::array<double, 2> p, std::array<double, 2> l);

/// Samples the interior grid p = ((i+1)/(n+1), (j+1)/(n+1)), i, j < n, row
/// by row with px varying fastest. The Laplacian is the 5-point stencil at
/// grid spacing 1/(n+1).
std::vector<FieldPoint> field_sample(LossKind kind, std::array<double, 2> l, std::size_t grid_n);
void write_field_csv(std::ostream& os, std::span<const FieldPoint> points);

}  // namespace resunet
