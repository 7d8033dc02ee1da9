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

#include "resunet/labels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resunet/errors.hpp"

namespace resunet {

Tensor<float> one_hot(const LabelPlane& mask, std::size_t k) {
  const std::size_t plane = mask.size();
  Tensor<float> out(Shape{k, mask.height, mask.width});
  for (std::size_t i = 0; i < plane; ++i) {
    const std::size_t c = mask.data[i];
    if (c >= k)
      throw DataError("mask class id " + std::to_string(c) + " out of range for " + std::to_string(k) + " classes");
    out[c * plane + i] = 1.0f;
  }
  return out;
}

LabelPlane argmax_channels(const Tensor<float>& scores) {
  if (scores.rank() != 3) throw ShapeError("argmax_channels: expected [K,H,W], got " + to_string(scores.shape()));
  const std::size_t k = scores.dim(0), h = scores.dim(1), w = scores.dim(2), plane = h * w;
  LabelPlane out(h, w);
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (scores[c * plane + i] > scores[best * plane + i]) best = c;
    out.data[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelPlane class_plane(const LabelPlane& mask, std::uint8_t cls) {
  LabelPlane out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] = mask.data[i] == cls ? 1 : 0;
  return out;
}

LabelPlane get_boundary(const LabelPlane& binary) {
  const std::size_t h = binary.height, w = binary.width;
  auto on = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return false;
    return binary(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) != 0;
  };
  LabelPlane edge(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto sy = static_cast<std::ptrdiff_t>(y), sx = static_cast<std::ptrdiff_t>(x);
      if (on(sy, sx) && !(on(sy - 1, sx) && on(sy + 1, sx) && on(sy, sx - 1) && on(sy, sx + 1))) edge(y, x) = 1;
    }
  LabelPlane out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const bool hit = edge(y, x) || (y > 0 && edge(y - 1, x)) || (y + 1 < h && edge(y + 1, x)) ||
                       (x > 0 && edge(y, x - 1)) || (x + 1 < w && edge(y, x + 1));
      out(y, x) = hit ? 1 : 0;
    }
  return out;
}

namespace {

// Lower envelope of parabolas: out[q] = min_p (q - p)^2 + f[p].
void squared_edt_1d(const std::vector<double>& f, std::vector<double>& out) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> v(n);
  std::vector<double> z(n + 1);
  std::size_t k = 0;
  // Sites with infinite cost never contribute.
  std::size_t first = 0;
  while (first < n && f[first] == inf) ++first;
  if (first == n) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  v[0] = first;
  z[0] = -inf;
  z[1] = inf;
  for (std::size_t q = first + 1; q < n; ++q) {
    if (f[q] == inf) continue;
    const auto fq = static_cast<double>(q);
    auto meet = [&](std::size_t site) {
      const auto vs = static_cast<double>(site);
      return ((f[q] + fq * fq) - (f[site] + vs * vs)) / (2 * fq - 2 * vs);
    };
    double s = meet(v[k]);
    while (s <= z[k]) s = meet(v[--k]);  // z[0] = -inf stops the walk
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double d = static_cast<double>(q) - static_cast<double>(v[k]);
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace

Tensor<double> distance_transform(const LabelPlane& binary) {
  const std::size_t h = binary.height, w = binary.width;
  const std::size_t ph = h + 2, pw = w + 2;  // one ring of off pixels
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(ph * pw, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (binary(y, x)) grid[(y + 1) * pw + x + 1] = inf;

  std::vector<double> f(ph), d(ph);
  for (std::size_t x = 0; x < pw; ++x) {
    for (std::size_t y = 0; y < ph; ++y) f[y] = grid[y * pw + x];
    squared_edt_1d(f, d);
    for (std::size_t y = 0; y < ph; ++y) grid[y * pw + x] = d[y];
  }
  f.resize(pw);
  d.resize(pw);
  for (std::size_t y = 0; y < ph; ++y) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(y * pw), pw, f.begin());
    squared_edt_1d(f, d);
    std::copy_n(d.begin(), pw, grid.begin() + static_cast<std::ptrdiff_t>(y * pw));
  }

  Tensor<double> out(Shape{h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out(y, x) = std::sqrt(grid[(y + 1) * pw + x + 1]);
  return out;
}

Tensor<double> get_distance(const LabelPlane& binary) {
  Tensor<double> d = distance_transform(binary);
  double hi = 0;
  for (double v : d.values()) hi = std::max(hi, v);
  if (hi > 0)
    for (double& v : d.values()) v /= hi;
  return d;
}

Tensor<float> rgb_to_hsv(const Tensor<float>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) < 3) throw ShapeError("rgb_to_hsv: expected [3,H,W], got " + to_string(rgb.shape()));
  const std::size_t plane = rgb.dim(1) * rgb.dim(2);
  Tensor<float> out(Shape{3, rgb.dim(1), rgb.dim(2)});
  for (std::size_t i = 0; i < plane; ++i) {
    const double r = rgb[i], g = rgb[plane + i], b = rgb[2 * plane + i];
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), c = mx - mn;
    double hue = 0;
    if (c > 0) {
      if (mx == r)
        hue = std::fmod((g - b) / c, 6.0);
      else if (mx == g)
        hue = (b - r) / c + 2.0;
      else
        hue = (r - g) / c + 4.0;
      hue /= 6.0;
      if (hue < 0) hue += 1.0;
    }
    out[i] = static_cast<float>(hue);
    out[plane + i] = static_cast<float>(mx > 0 ? c / mx : 0.0);
    out[2 * plane + i] = static_cast<float>(mx);
  }
  return out;
}

Tensor<float> hsv_to_rgb(const Tensor<float>& hsv) {
  if (hsv.rank() != 3 || hsv.dim(0) != 3) throw ShapeError("hsv_to_rgb: expected [3,H,W], got " + to_string(hsv.shape()));
  const std::size_t plane = hsv.dim(1) * hsv.dim(2);
  Tensor<float> out(hsv.shape());
  for (std::size_t i = 0; i < plane; ++i) {
    const double h6 = std::fmod(static_cast<double>(hsv[i]), 1.0) * 6.0;
    const double s = hsv[plane + i], v = hsv[2 * plane + i];
    const double c = v * s;
    const double x = c * (1 - std::abs(std::fmod(h6, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h6)) {
      case 0: r = c, g = x; break;
      case 1: r = x, g = c; break;
      case 2: g = c, b = x; break;
      case 3: g = x, b = c; break;
      case 4: r = x, b = c; break;
      default: r = c, b = x; break;
    }
    const double m = v - c;
    out[i] = static_cast<float>(r + m);
    out[plane + i] = static_cast<float>(g + m);
    out[2 * plane + i] = static_cast<float>(b + m);
  }
  return out;
}

SampleRecord derive_record(Tensor<float> image, LabelPlane mask, std::size_t k) {
  if (image.rank() != 3 || image.dim(0) < 3)
    throw DataError("derive_record: image must be [C>=3,H,W], got " + to_string(image.shape()));
  if (image.dim(1) != mask.height || image.dim(2) != mask.width)
    throw DataError("derive_record: image " + to_string(image.shape()) + " and mask " + std::to_string(mask.height) +
                    "x" + std::to_string(mask.width) + " differ in size");
  SampleRecord r;
  r.onehot = one_hot(mask, k);
  const std::size_t plane = mask.size();
  r.boundary = Tensor<float>(r.onehot.shape());
  r.distance = Tensor<float>(r.onehot.shape());
  for (std::size_t c = 0; c < k; ++c) {
    const LabelPlane bin = class_plane(mask, static_cast<std::uint8_t>(c));
    const LabelPlane edge = get_boundary(bin);
    const Tensor<double> dist = get_distance(bin);
    for (std::size_t i = 0; i < plane; ++i) {
      r.boundary[c * plane + i] = edge.data[i];
      r.distance[c * plane + i] = static_cast<float>(dist[i]);
    }
  }
  Tensor<float> rgb(Shape{3, mask.height, mask.width},
                    std::vector<float>(image.data(), image.data() + 3 * plane));
  r.hsv = rgb_to_hsv(rgb);
  r.image = std::move(image);
  r.mask = std::move(mask);
  return r;
}

}  // namespace resunet
