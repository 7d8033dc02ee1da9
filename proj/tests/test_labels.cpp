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

#include <doctest.h>

#include <random>

#include "record_checks.hpp"
#include "resunet/labels.hpp"

using namespace resunet;

namespace {

LabelPlane random_mask(std::size_t h, std::size_t w, std::size_t k, std::mt19937_64& rng) {
  LabelPlane m(h, w);
  std::uniform_int_distribution<int> cls(0, static_cast<int>(k) - 1);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(cls(rng));
  return m;
}

// Blobby binary mask: a few random rectangles.
LabelPlane random_blobs(std::size_t n, std::mt19937_64& rng) {
  LabelPlane m(n, n);
  std::uniform_int_distribution<std::size_t> pos(0, n - 1);
  for (int r = 0; r < 4; ++r) {
    const std::size_t y0 = pos(rng), x0 = pos(rng), y1 = pos(rng), x1 = pos(rng);
    for (std::size_t y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (std::size_t x = std::min(x0, x1); x <= std::max(x0, x1); ++x) m(y, x) = 1;
  }
  return m;
}

// Distance from each on-pixel to the nearest off-pixel of the plane padded by one off ring.
Tensor<double> brute_force_distance(const LabelPlane& m) {
  const auto h = static_cast<long>(m.height), w = static_cast<long>(m.width);
  Tensor<double> out(Shape{m.height, m.width});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!m(y, x)) continue;
      long best = std::numeric_limits<long>::max();
      for (long v = -1; v <= h; ++v)
        for (long u = -1; u <= w; ++u) {
          const bool off = v < 0 || u < 0 || v >= h || u >= w || !m(v, u);
          if (off) best = std::min(best, (v - y) * (v - y) + (u - x) * (u - x));
        }
      out(y, x) = std::sqrt(static_cast<double>(best));
    }
  return out;
}

Tensor<float> rgb(std::initializer_list<float> v) { return Tensor<float>(Shape{3, 1, 1}, std::vector<float>(v)); }

}  // namespace

TEST_SUITE("labels") {
  TEST_CASE("one-hot encoding") {
    const Tensor<float> zero = one_hot(LabelPlane(3, 3), 4);
    for (std::size_t i = 0; i < 9; ++i) CHECK(zero[i] == 1.0f);
    for (std::size_t i = 9; i < zero.size(); ++i) CHECK(zero[i] == 0.0f);

    std::mt19937_64 rng(1);
    const LabelPlane m = random_mask(4, 4, 3, rng);
    const Tensor<float> oh = one_hot(m, 3);
    CHECK(argmax_channels(oh) == m);
    for (std::size_t c = 0; c < 3; ++c) {
      float total = 0;
      for (std::size_t i = 0; i < 16; ++i) total += oh[c * 16 + i];
      CHECK(total == static_cast<float>(std::count(m.data.begin(), m.data.end(), c)));
    }
    LabelPlane bad(2, 2);
    bad(1, 1) = 3;
    CHECK_THROWS_AS(one_hot(bad, 3), DataError);
  }

  TEST_CASE("boundary hand cases") {
    CHECK(get_boundary(LabelPlane(5, 5)) == LabelPlane(5, 5));

    const LabelPlane full = get_boundary(LabelPlane(6, 6, 1));
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const bool inner = y >= 2 && y <= 3 && x >= 2 && x <= 3;
        CHECK(full(y, x) == (inner ? 0 : 1));
      }

    LabelPlane dot(7, 7);
    dot(3, 3) = 1;
    const LabelPlane cross = get_boundary(dot);
    for (std::size_t y = 0; y < 7; ++y)
      for (std::size_t x = 0; x < 7; ++x) {
        const bool on = (y == 3 && x >= 2 && x <= 4) || (x == 3 && y >= 2 && y <= 4);
        CHECK(cross(y, x) == (on ? 1 : 0));
      }
  }

  TEST_CASE("boundary detection only marks pixels next to the mask") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const LabelPlane m = random_blobs(16, rng);
      const LabelPlane b = get_boundary(m);
      CHECK(get_boundary(m) == b);
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          if (!b(y, x)) continue;
          bool near = m(y, x);
          if (y > 0) near |= m(y - 1, x) != 0;
          if (y < 15) near |= m(y + 1, x) != 0;
          if (x > 0) near |= m(y, x - 1) != 0;
          if (x < 15) near |= m(y, x + 1) != 0;
          CHECK(near);
        }
    }
  }

  TEST_CASE("distance transform") {
    CHECK(get_distance(LabelPlane(4, 4)) == Tensor<double>(Shape{4, 4}));

    LabelPlane block(5, 5);
    for (std::size_t y = 1; y <= 3; ++y)
      for (std::size_t x = 1; x <= 3; ++x) block(y, x) = 1;
    const Tensor<double> raw = distance_transform(block);
    CHECK(raw(2, 2) == 2.0);
    CHECK(raw(1, 2) == 1.0);
    CHECK(raw(1, 1) == 1.0);
    const Tensor<double> norm = get_distance(block);
    CHECK(norm(2, 2) == 1.0);
    for (auto [y, x] : {std::pair{1, 2}, {2, 1}, {3, 2}, {2, 3}}) CHECK(norm(y, x) == 0.5);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const LabelPlane m = trial % 2 ? random_blobs(16, rng) : random_mask(16, 16, 2, rng);
      const Tensor<double> fast = distance_transform(m);
      CHECK(fast == brute_force_distance(m));
      for (std::size_t i = 0; i < m.size(); ++i) CHECK((fast[i] > 0) == (m.data[i] != 0));
    }
  }

  TEST_CASE("all-on plane peaks on its innermost pixels") {
    const LabelPlane m(8, 8, 1);
    const Tensor<double> d = get_distance(m), oracle = brute_force_distance(m);
    const double peak = *std::max_element(oracle.values().begin(), oracle.values().end());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK((d[i] == 1.0) == (oracle[i] == peak));
    CHECK(std::count(d.values().begin(), d.values().end(), 1.0) == 4);
  }

  TEST_CASE("hsv conversion") {
    CHECK(rgb_to_hsv(rgb({1, 0, 0})).values()[0] == 0.0f);
    CHECK(rgb_to_hsv(rgb({1, 0, 0})) == rgb({0, 1, 1}));
    CHECK(rgb_to_hsv(rgb({0.4f, 0.4f, 0.4f})) == rgb({0, 0, 0.4f}));
    const Tensor<float> green = rgb_to_hsv(rgb({0, 1, 0}));
    CHECK(green[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
    CHECK(green[1] == 1.0f);
    CHECK(green[2] == 1.0f);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> u(0, 1);
    Tensor<float> img(Shape{3, 8, 8});
    for (auto& v : img.values()) v = u(rng);
    const Tensor<float> back = hsv_to_rgb(rgb_to_hsv(img));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) < 1e-6);
  }

  TEST_CASE("vertical split gives mirrored boundaries") {
    LabelPlane m(8, 8);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 4; x < 8; ++x) m(y, x) = 1;
    const SampleRecord r = derive_record(Tensor<float>(Shape{3, 8, 8}, 0.5f), m, 2);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) CHECK(r.boundary(0, y, x) == r.boundary(1, y, 7 - x));
  }

  TEST_CASE("derived records satisfy their invariants") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t k = 2 + trial % 4;
      Tensor<float> img(Shape{4, 12, 12});
      for (auto& v : img.values()) v = u(rng);
      const SampleRecord r = derive_record(img, random_mask(12, 12, k, rng), k);
      resunet::testing::check_record(r);
    }
    CHECK_THROWS_AS(derive_record(Tensor<float>(Shape{2, 4, 4}), LabelPlane(4, 4), 2), DataError);
    CHECK_THROWS_AS(derive_record(Tensor<float>(Shape{3, 4, 4}), LabelPlane(4, 5), 2), DataError);
  }
}
