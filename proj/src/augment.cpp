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

#include "resunet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "resunet/errors.hpp"

namespace resunet {

void AugmentConfig::validate() const {
  if (!(scale_lo > 0 && scale_lo <= scale_hi)) throw ConfigError("augment scale range must satisfy 0 < lo <= hi");
  if (!(flip_prob >= 0 && flip_prob <= 1)) throw ConfigError("augment flip_prob must lie in [0, 1]");
}

std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n - 2;
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

SampleRecord apply_affine(const SampleRecord& record, const AffineParams& params) {
  const Tensor<float>& src = record.image;
  const std::size_t channels = src.dim(0), h = src.dim(1), w = src.dim(2), plane = h * w;
  const auto sh = static_cast<std::ptrdiff_t>(h), sw = static_cast<std::ptrdiff_t>(w);
  const double theta = params.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta) / params.scale, s = std::sin(theta) / params.scale;

  Tensor<float> image(src.shape());
  LabelPlane mask(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      // Inverse map: rotate by -theta and shrink by 1/scale about the centre.
      const double dx = static_cast<double>(x) - params.cx, dy = static_cast<double>(y) - params.cy;
      const double sx = params.cx + c * dx + s * dy;
      const double sy = params.cy - s * dx + c * dy;

      const auto nx = reflect101(static_cast<std::ptrdiff_t>(std::lround(sx)), sw);
      const auto ny = reflect101(static_cast<std::ptrdiff_t>(std::lround(sy)), sh);
      mask(y, x) = record.mask(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx));

      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const auto x0 = static_cast<std::size_t>(reflect101(static_cast<std::ptrdiff_t>(fx), sw));
      const auto x1 = static_cast<std::size_t>(reflect101(static_cast<std::ptrdiff_t>(fx) + 1, sw));
      const auto y0 = static_cast<std::size_t>(reflect101(static_cast<std::ptrdiff_t>(fy), sh));
      const auto y1 = static_cast<std::size_t>(reflect101(static_cast<std::ptrdiff_t>(fy) + 1, sh));
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const float* p = src.data() + ch * plane;
        const double top = (1 - ax) * p[y0 * w + x0] + ax * p[y0 * w + x1];
        const double bottom = (1 - ax) * p[y1 * w + x0] + ax * p[y1 * w + x1];
        image[ch * plane + y * w + x] = static_cast<float>((1 - ay) * top + ay * bottom);
      }
    }
  return derive_record(std::move(image), std::move(mask), record.classes());
}

SampleRecord random_affine(const SampleRecord& record, const AugmentConfig& cfg, std::mt19937_64& rng) {
  const double h = static_cast<double>(record.mask.height), w = static_cast<double>(record.mask.width);
  AffineParams params;
  params.angle_deg = std::uniform_real_distribution<double>(0.0, 360.0)(rng);
  params.cx = std::uniform_real_distribution<double>(0.0, w - 1)(rng);
  params.cy = std::uniform_real_distribution<double>(0.0, h - 1)(rng);
  params.scale = std::uniform_real_distribution<double>(cfg.scale_lo, cfg.scale_hi)(rng);
  return apply_affine(record, params);
}

namespace {

Tensor<float> flip_planes(const Tensor<float>& t, bool horizontal, bool vertical) {
  const std::size_t channels = t.dim(0), h = t.dim(1), w = t.dim(2);
  Tensor<float> out(t.shape());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out(c, y, x) = t(c, vertical ? h - 1 - y : y, horizontal ? w - 1 - x : x);
  return out;
}

}  // namespace

SampleRecord flip_record(const SampleRecord& record, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return record;
  SampleRecord r;
  r.image = flip_planes(record.image, horizontal, vertical);
  r.onehot = flip_planes(record.onehot, horizontal, vertical);
  r.boundary = flip_planes(record.boundary, horizontal, vertical);
  r.distance = flip_planes(record.distance, horizontal, vertical);
  r.hsv = flip_planes(record.hsv, horizontal, vertical);
  const std::size_t h = record.mask.height, w = record.mask.width;
  r.mask = LabelPlane(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      r.mask(y, x) = record.mask(vertical ? h - 1 - y : y, horizontal ? w - 1 - x : x);
  return r;
}

SampleRecord random_flip(const SampleRecord& record, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution coin(p);
  const bool horizontal = coin(rng);
  const bool vertical = coin(rng);
  return flip_record(record, horizontal, vertical);
}

std::vector<PatchWindow> patch_windows(std::size_t h, std::size_t w, std::size_t size, std::size_t stride) {
  if (size == 0 || stride == 0) throw ConfigError("patch size and stride must be positive");
  if (h < size || w < size)
    throw DataError("tile " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than patch size " +
                    std::to_string(size));
  std::vector<PatchWindow> out;
  for (std::size_t y = 0; y + size <= h; y += stride)
    for (std::size_t x = 0; x + size <= w; x += stride) out.push_back({y, x, size});
  return out;
}

std::vector<Patch> extract_patches(const Tensor<float>& image, const LabelPlane& mask, std::size_t size,
                                   std::size_t stride) {
  const std::size_t channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (mask.height != h || mask.width != w) throw DataError("extract_patches: image and mask sizes differ");
  std::vector<Patch> out;
  for (const auto& win : patch_windows(h, w, size, stride)) {
    Patch p{win, Tensor<float>(Shape{channels, size, size}), LabelPlane(size, size)};
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        for (std::size_t c = 0; c < channels; ++c) p.image(c, y, x) = image(c, win.y + y, win.x + x);
        p.mask(y, x) = mask(win.y + y, win.x + x);
      }
    out.push_back(std::move(p));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<std::size_t>& group_of_item, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return r < 0; }) || std::abs(total - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  const std::set<std::size_t> distinct(group_of_item.begin(), group_of_item.end());
  std::vector<std::size_t> groups(distinct.begin(), distinct.end());
  const std::size_t g = groups.size();
  const auto n_train = static_cast<std::size_t>(std::lround(static_cast<double>(g) * ratios[0]));
  const auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(g) * ratios[1]));
  if (n_train + n_val > g || (ratios[0] > 0 && n_train == 0) || (ratios[1] > 0 && n_val == 0) ||
      (ratios[2] > 0 && n_train + n_val == g))
    throw DataError("split_dataset: " + std::to_string(g) + " region groups cannot honour every split");

  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  std::vector<int> subset_of(groups.empty() ? 0 : *distinct.rbegin() + 1, 2);
  for (std::size_t i = 0; i < g; ++i) subset_of[groups[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

  DatasetSplit split;
  for (std::size_t item = 0; item < group_of_item.size(); ++item) {
    switch (subset_of[group_of_item[item]]) {
      case 0: split.train.push_back(item); break;
      case 1: split.val.push_back(item); break;
      default: split.test.push_back(item); break;
    }
  }
  return split;
}

}  // namespace resunet
