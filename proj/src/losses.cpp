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

#include "resunet/losses.hpp"

#include <cmath>
#include <ostream>

#include "resunet/errors.hpp"

namespace resunet {

LossKind parse_loss(std::string_view s) {
  if (s == "d1") return {Family::d1, false};
  if (s == "d2") return {Family::d2, false};
  if (s == "tanimoto") return {Family::d3, false};
  if (s == "tanimoto-complement") return {Family::d3, true};
  if (s == "d1-complement") return {Family::d1, true};
  if (s == "d2-complement") return {Family::d2, true};
  throw ConfigError("unknown loss '" + std::string(s) + "' (expected d1, d2, tanimoto or tanimoto-complement)");
}

std::string to_string(LossKind k) {
  switch (k.family) {
    case Family::d1: return k.complement ? "d1-complement" : "d1";
    case Family::d2: return k.complement ? "d2-complement" : "d2";
    case Family::d3: return k.complement ? "tanimoto-complement" : "tanimoto";
  }
  return "?";
}

namespace {

// Raw sums from which every coefficient is formed.
struct Sums {
  double pl = 0, p = 0, l = 0, pp = 0, ll = 0;
};

double ratio(Family f, const Sums& s) {
  const double eps = kOverlapEpsilon;
  switch (f) {
    case Family::d1: return (2 * s.pl + eps) / (s.p + s.l + eps);
    case Family::d2: return (2 * s.pl + eps) / (s.pp + s.ll + eps);
    case Family::d3: return (s.pl + eps) / (s.pp + s.ll - s.pl + eps);
  }
  return 0;
}

template <typename T>
Sums sums_of(const Tensor<T>& p, const Tensor<T>& l, bool complement) {
  if (p.shape() != l.shape())
    throw ShapeError("overlap: shape mismatch " + to_string(p.shape()) + " vs " + to_string(l.shape()));
  Sums s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = complement ? 1.0 - p[i] : p[i];
    const double b = complement ? 1.0 - l[i] : l[i];
    s.pl += a * b;
    s.p += a;
    s.l += b;
    s.pp += a * a;
    s.ll += b * b;
  }
  return s;
}

void require_nchw(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + ": expected [N,C,H,W], got " + to_string(s));
}

// Per-sample, per-class weights [N,C] from labels [N,C,H,W].
template <typename T>
Tensor<T> sample_weights(const Tensor<T>& l, Weighting weighting) {
  const std::size_t n = l.dim(0), c = l.dim(1), plane = l.dim(2) * l.dim(3);
  Tensor<T> w(Shape{n, c}, T{1});
  if (weighting == Weighting::uniform) return w;
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<double> inv(c, 0.0);
    double total = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const T* src = l.data() + (b * c + k) * plane;
      double v = 0;
      for (std::size_t i = 0; i < plane; ++i) v += src[i];
      if (v > 0) inv[k] = 1.0 / (v * v);
      total += inv[k];
    }
    for (std::size_t k = 0; k < c; ++k) w[b * c + k] = static_cast<T>(total > 0 ? inv[k] / total : 0.0);
  }
  return w;
}

template <typename T>
Tensor<T> complement_of(const Tensor<T>& t) {
  Tensor<T> out = t;
  for (auto& v : out.values()) v = T{1} - v;
  return out;
}

template <typename T>
Var<T> plain_coefficient(const Var<T>& p, const Tensor<T>& l, Family family, Weighting weighting) {
  const double eps = kOverlapEpsilon;
  const Tensor<T> w = sample_weights(l, weighting);
  const Var<T> lc = constant(l);
  const Var<T> pl = weighted_row_sum(spatial_sum(mul(p, lc)), w);
  Var<T> num, den;
  switch (family) {
    case Family::d1:
      num = affine(pl, 2.0, eps);
      den = affine(weighted_row_sum(spatial_sum(add(p, lc)), w), 1.0, eps);
      break;
    case Family::d2:
      num = affine(pl, 2.0, eps);
      den = affine(weighted_row_sum(spatial_sum(add(mul(p, p), mul(lc, lc))), w), 1.0, eps);
      break;
    case Family::d3:
      num = affine(pl, 1.0, eps);
      den = affine(sub(weighted_row_sum(spatial_sum(add(mul(p, p), mul(lc, lc))), w), pl), 1.0, eps);
      break;
  }
  return div(num, den);
}

}  // namespace

template <typename T>
double dice_d1(const Tensor<T>& p, const Tensor<T>& l) {
  return ratio(Family::d1, sums_of(p, l, false));
}
template <typename T>
double dice_d2(const Tensor<T>& p, const Tensor<T>& l) {
  return ratio(Family::d2, sums_of(p, l, false));
}
template <typename T>
double tanimoto_d3(const Tensor<T>& p, const Tensor<T>& l) {
  return ratio(Family::d3, sums_of(p, l, false));
}
template <typename T>
double overlap(Family f, const Tensor<T>& p, const Tensor<T>& l) {
  return ratio(f, sums_of(p, l, false));
}
template <typename T>
double with_complement(Family f, const Tensor<T>& p, const Tensor<T>& l) {
  return 0.5 * (ratio(f, sums_of(p, l, false)) + ratio(f, sums_of(p, l, true)));
}

template <typename T>
double tanimoto_multiclass(const Tensor<T>& p, const Tensor<T>& l, std::span<const double> weights) {
  if (p.shape() != l.shape())
    throw ShapeError("tanimoto_multiclass: shape mismatch " + to_string(p.shape()) + " vs " + to_string(l.shape()));
  if (p.rank() != 3 && p.rank() != 4)
    throw ShapeError("tanimoto_multiclass: expected [K,H,W] or [N,K,H,W], got " + to_string(p.shape()));
  const std::size_t axis = p.rank() - 3;
  const std::size_t k = p.dim(axis);
  if (weights.size() != k)
    throw ShapeError("tanimoto_multiclass: " + std::to_string(weights.size()) + " weights for " + std::to_string(k) +
                     " classes");
  const std::size_t plane = p.dim(axis + 1) * p.dim(axis + 2);
  const std::size_t batch = axis == 1 ? p.dim(0) : 1;
  double num = 0, den = 0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < k; ++c) {
      if (weights[c] == 0) continue;
      double pl = 0, sq = 0;
      const std::size_t base = (b * k + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double a = p[base + i], t = l[base + i];
        pl += a * t;
        sq += a * a + t * t;
      }
      num += weights[c] * pl;
      den += weights[c] * (sq - pl);
    }
  return (num + kOverlapEpsilon) / (den + kOverlapEpsilon);
}

template <typename T>
std::vector<double> volume_weights(const Tensor<T>& onehot) {
  if (onehot.rank() != 3 && onehot.rank() != 4)
    throw ShapeError("volume_weights: expected [K,H,W] or [N,K,H,W], got " + to_string(onehot.shape()));
  const std::size_t axis = onehot.rank() - 3;
  const std::size_t k = onehot.dim(axis);
  const std::size_t plane = onehot.dim(axis + 1) * onehot.dim(axis + 2);
  const std::size_t batch = axis == 1 ? onehot.dim(0) : 1;
  std::vector<double> volume(k, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < plane; ++i) volume[c] += onehot[(b * k + c) * plane + i];
  std::vector<double> w(k, 0.0);
  double total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (volume[c] > 0) w[c] = 1.0 / (volume[c] * volume[c]);
    total += w[c];
  }
  if (total > 0)
    for (auto& v : w) v /= total;
  return w;
}

template <typename T>
Var<T> overlap_coefficient(const Var<T>& p, const Tensor<T>& l, LossKind kind, Weighting weighting) {
  require_nchw(p.shape(), "overlap_coefficient");
  if (p.shape() != l.shape())
    throw ShapeError("overlap_coefficient: prediction " + to_string(p.shape()) + " vs target " +
                     to_string(l.shape()));
  const Var<T> direct = plain_coefficient(p, l, kind.family, weighting);
  if (!kind.complement) return direct;
  const Var<T> flipped = plain_coefficient(affine(p, -1.0, 1.0), complement_of(l), kind.family, weighting);
  return affine(add(direct, flipped), 0.5, 0.0);
}

template <typename T>
Var<T> overlap_loss(const Var<T>& p, const Tensor<T>& l, LossKind kind, Weighting weighting) {
  return affine(mean(overlap_coefficient(p, l, kind, weighting)), -1.0, 1.0);
}

template <typename T>
TaskLosses<T> multitask_loss(const MultiHeadOutput<T>& out, const LossTargets<T>& targets, LossKind kind) {
  TaskLosses<T> r;
  auto term = [&](const Var<T>& pred, const Tensor<T>& target, Weighting w, const char* task) {
    if (!pred.defined()) return Var<T>{};
    if (target.empty()) throw DataError(std::string("multitask_loss: missing ") + task + " target");
    Var<T> loss = overlap_loss(pred, target, kind, w);
    r.total = r.total.defined() ? add(r.total, loss) : loss;
    return loss;
  };
  r.segmentation = term(out.segmentation, targets.onehot, Weighting::volume, "segmentation");
  r.boundary = term(out.boundary, targets.boundary, Weighting::volume, "boundary");
  r.distance = term(out.distance, targets.distance, Weighting::uniform, "distance");
  r.color = term(out.color, targets.hsv, Weighting::uniform, "color");
  if (!r.total.defined()) throw ShapeError("multitask_loss: model produced no outputs");
  return r;
}

namespace {

Sums pair_sums(std::array<double, 2> p, std::array<double, 2> l) {
  Sums s;
  for (int i = 0; i < 2; ++i) {
    s.pl += p[i] * l[i];
    s.p += p[i];
    s.l += l[i];
    s.pp += p[i] * p[i];
    s.ll += l[i] * l[i];
  }
  return s;
}

std::array<double, 2> plain_gradient(Family f, std::array<double, 2> p, std::array<double, 2> l) {
  const Sums s = pair_sums(p, l);
  const double eps = kOverlapEpsilon;
  std::array<double, 2> g{};
  for (int i = 0; i < 2; ++i) {
    switch (f) {
      case Family::d1: {
        const double num = 2 * s.pl + eps, den = s.p + s.l + eps;
        g[i] = 2 * l[i] / den - num / (den * den);
        break;
      }
      case Family::d2: {
        const double num = 2 * s.pl + eps, den = s.pp + s.ll + eps;
        g[i] = 2 * l[i] / den - num / (den * den) * 2 * p[i];
        break;
      }
      case Family::d3: {
        const double num = s.pl + eps, den = s.pp + s.ll - s.pl + eps;
        g[i] = l[i] / den - num / (den * den) * (2 * p[i] - l[i]);
        break;
      }
    }
  }
  return g;
}

std::array<double, 2> flip(std::array<double, 2> v) { return {1 - v[0], 1 - v[1]}; }

}  // namespace

double field_value(LossKind kind, std::array<double, 2> p, std::array<double, 2> l) {
  const double direct = ratio(kind.family, pair_sums(p, l));
  if (!kind.complement) return direct;
  return 0.5 * (direct + ratio(kind.family, pair_sums(flip(p), flip(l))));
}

std::array<double, 2> field_gradient(LossKind kind, std::array<double, 2> p, std::array<double, 2> l) {
  const auto g = plain_gradient(kind.family, p, l);
  if (!kind.complement) return g;
  const auto gc = plain_gradient(kind.family, flip(p), flip(l));
  return {0.5 * (g[0] - gc[0]), 0.5 * (g[1] - gc[1])};
}

std::vector<FieldPoint> field_sample(LossKind kind, std::array<double, 2> l, std::size_t grid_n) {
  if (grid_n < 1) throw ConfigError("field_sample: grid size must be >= 1");
  const double h = 1.0 / static_cast<double>(grid_n + 1);
  std::vector<FieldPoint> points;
  points.reserve(grid_n * grid_n);
  for (std::size_t j = 0; j < grid_n; ++j)
    for (std::size_t i = 0; i < grid_n; ++i) {
      const double x = static_cast<double>(i + 1) * h, y = static_cast<double>(j + 1) * h;
      const double v = field_value(kind, {x, y}, l);
      const auto g = field_gradient(kind, {x, y}, l);
      const double lap = (field_value(kind, {x + h, y}, l) + field_value(kind, {x - h, y}, l) +
                          field_value(kind, {x, y + h}, l) + field_value(kind, {x, y - h}, l) - 4 * v) /
                         (h * h);
      points.push_back({x, y, v, g[0], g[1], lap});
    }
  return points;
}

void write_field_csv(std::ostream& os, std::span<const FieldPoint> points) {
  os << "px,py,value,gx,gy,laplacian\n";
  os.precision(17);
  for (const auto& q : points)
    os << q.px << ',' << q.py << ',' << q.value << ',' << q.gx << ',' << q.gy << ',' << q.laplacian << '\n';
}

#define RESUNET_INSTANTIATE_LOSSES(T)                                                                  \
  template double dice_d1(const Tensor<T>&, const Tensor<T>&);                                         \
  template double dice_d2(const Tensor<T>&, const Tensor<T>&);                                         \
  template double tanimoto_d3(const Tensor<T>&, const Tensor<T>&);                                     \
  template double overlap(Family, const Tensor<T>&, const Tensor<T>&);                                 \
  template double with_complement(Family, const Tensor<T>&, const Tensor<T>&);                         \
  template double tanimoto_multiclass(const Tensor<T>&, const Tensor<T>&, std::span<const double>);    \
  template std::vector<double> volume_weights(const Tensor<T>&);                                       \
  template Var<T> overlap_coefficient(const Var<T>&, const Tensor<T>&, LossKind, Weighting);           \
  template Var<T> overlap_loss(const Var<T>&, const Tensor<T>&, LossKind, Weighting);                  \
  template TaskLosses<T> multitask_loss(const MultiHeadOutput<T>&, const LossTargets<T>&, LossKind);

RESUNET_INSTANTIATE_LOSSES(float)
RESUNET_INSTANTIATE_LOSSES(double)

}  // namespace resunet
