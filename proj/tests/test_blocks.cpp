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

#include "gradcheck.hpp"
#include "resunet/blocks.hpp"

using namespace resunet;
using resunet::testing::random_tensor;

namespace {

void zero_conv_weights(const ParameterStore<double>& store) {
  for (const auto& p : store.parameters())
    if (p.name.ends_with(".weight")) Var<double>(p.var).mutable_value().fill(0.0);
}

bool constant_per_channel(const Tensor<double>& t, double tol) {
  const std::size_t plane = t.dim(2) * t.dim(3);
  for (std::size_t c = 0; c < t.size() / plane; ++c)
    for (std::size_t i = 1; i < plane; ++i)
      if (std::abs(t[c * plane + i] - t[c * plane]) > tol) return false;
  return true;
}

}  // namespace

TEST_SUITE("blocks") {
  TEST_CASE("parameter store rejects duplicate names and counts elements") {
    ParameterStore<double> store(1);
    Conv2d<double> conv(store, "c", 2, 3, 1);
    CHECK(store.parameter_count() == 9);
    CHECK_THROWS_AS(Conv2d<double>(store, "c", 2, 3, 1), ShapeError);
    CHECK(store.find("c.bias").shape() == Shape{3});
    CHECK_THROWS_AS(store.find("nope"), ShapeError);
  }

  TEST_CASE("block config validation") {
    CHECK_NOTHROW((BlockConfig{4, 3, {1, 3, 15, 31}, 1}.validate()));
    CHECK_THROWS_AS((BlockConfig{0, 3, {1}, 1}.validate()), ShapeError);
    CHECK_THROWS_AS((BlockConfig{4, 3, {}, 1}.validate()), ShapeError);
    CHECK_THROWS_AS((BlockConfig{4, 3, {3, 1}, 1}.validate()), ShapeError);
    CHECK_THROWS_AS((BlockConfig{4, 3, {2, 3}, 1}.validate()), ShapeError);
  }

  TEST_CASE("normed convolution") {
    std::mt19937_64 rng(1);
    ParameterStore<double> store(2);
    Conv2dN<double> pointwise(store, "p", 3, 5, 1);
    Conv2dN<double> strided(store, "s", 3, 5, 1, 1, 2);
    const Var<double> x = constant(random_tensor({2, 3, 8, 8}, rng));
    // Eval before any training pass uses the initial running statistics.
    const Var<double> fresh = pointwise(x, Mode::Eval);
    CHECK(pointwise(x, Mode::Train).shape() == Shape{2, 5, 8, 8});
    CHECK(strided(x, Mode::Train).shape() == Shape{2, 5, 4, 4});

    const Var<double> raw = conv2d(x, pointwise.conv().weight(), Var<double>{}, 1, 1);
    for (std::size_t i = 0; i < raw.value().size(); ++i)
      CHECK(fresh.value()[i] == doctest::Approx(raw.value()[i] / std::sqrt(1.0 + kBatchNormEpsilon)).epsilon(1e-12));
  }

  TEST_CASE("residual block is the identity with zero weights") {
    std::mt19937_64 rng(3);
    ParameterStore<double> store(4);
    ResBlockA<double> block(store, "r", BlockConfig{3, 3, {1, 3, 15}, 1});
    zero_conv_weights(store);
    const Tensor<double> x = random_tensor({2, 3, 8, 8}, rng);
    CHECK(block(constant(x), Mode::Train).value() == x);
    CHECK(block(constant(x), Mode::Eval).value() == x);
  }

  TEST_CASE("single-dilation block is a pre-activation residual unit") {
    std::mt19937_64 rng(5);
    ParameterStore<double> store(6);
    ResBlockA<double> block(store, "r", BlockConfig{2, 3, {1}, 1});
    const Var<double> x = constant(random_tensor({1, 2, 6, 6}, rng));
    const Var<double> w1 = store.find("r.d1.conv1.weight"), w2 = store.find("r.d1.conv2.weight");
    BatchNormStats<double> s1(2), s2(2);
    const Var<double> one = constant(Tensor<double>(Shape{2}, 1.0)), zero = constant(Tensor<double>(Shape{2}, 0.0));
    Var<double> h = conv2d(relu(batch_norm(x, one, zero, s1, Mode::Train)), w1, Var<double>{}, 1, 1);
    h = conv2d(relu(batch_norm(h, one, zero, s2, Mode::Train)), w2, Var<double>{}, 1, 1);
    const Var<double> expected = add(x, h);
    const Var<double> got = block(x, Mode::Train);
    for (std::size_t i = 0; i < got.value().size(); ++i) CHECK(got.value()[i] == expected.value()[i]);
  }

  TEST_CASE("residual block preserves shape at 256x256 and rejects channel mismatch") {
    std::mt19937_64 rng(7);
    ParameterStore<float> store(8);
    ResBlockA<float> block(store, "r", BlockConfig{2, 3, {1, 3, 15, 31}, 1});
    const Var<float> x = constant(random_tensor({1, 2, 256, 256}, rng).cast<float>());
    CHECK(block(x, Mode::Train).shape() == Shape{1, 2, 256, 256});
    try {
      block(constant(Tensor<float>(Shape{1, 3, 8, 8})), Mode::Train);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("1x1 convolution") != std::string::npos);
    }
  }

  TEST_CASE("pyramid pooling") {
    std::mt19937_64 rng(9);
    ParameterStore<double> store(10);
    PspPooling<double> full(store, "full", 8, kPspFullScales);
    PspPooling<double> reduced(store, "reduced", 6, kPspReducedScales);
    PspPooling<double> single(store, "single", 3, {1});

    CHECK(full(constant(random_tensor({2, 8, 16, 16}, rng)), Mode::Train).shape() == Shape{2, 8, 16, 16});
    CHECK(reduced(constant(random_tensor({2, 6, 8, 8}, rng)), Mode::Train).shape() == Shape{2, 6, 8, 8});

    SUBCASE("constant input gives constant channels") {
      const Var<double> y = full(constant(Tensor<double>(Shape{1, 8, 8, 8}, 0.7)), Mode::Eval);
      CHECK(constant_per_channel(y.value(), 1e-12));
    }
    SUBCASE("manual composition with one scale") {
      const Var<double> x = constant(random_tensor({2, 3, 4, 4}, rng));
      const Var<double> cat = concat_channels<double>({max_pool_grid(x, 1), x});
      BatchNormStats<double> stats(3);
      const Var<double> expected = batch_norm(conv2d(cat, store.find("single.fuse.conv.weight"), Var<double>{}, 1, 1),
                                              store.find("single.fuse.bn.gamma"),
                                              store.find("single.fuse.bn.beta"), stats, Mode::Train);
      CHECK(single(x, Mode::Train).value() == expected.value());
    }
    SUBCASE("indivisible extent is rejected unless clamped") {
      CHECK_THROWS_AS(full(constant(Tensor<double>(Shape{1, 8, 12, 12})), Mode::Eval), ShapeError);
      PspPooling<double> clamped(store, "clamped", 8, kPspFullScales, true);
      CHECK(clamped(constant(random_tensor({1, 8, 2, 2}, rng)), Mode::Eval).shape() == Shape{1, 8, 2, 2});
    }
  }

  TEST_CASE("combine") {
    std::mt19937_64 rng(11);
    ParameterStore<double> store(12);
    Combine<double> combine(store, "c", 2, 3, 5);
    const Tensor<double> b = random_tensor({1, 3, 4, 4}, rng);
    const Var<double> neg1 = constant(random_tensor({1, 2, 4, 4}, rng, -2, -0.1));
    const Var<double> neg2 = constant(random_tensor({1, 2, 4, 4}, rng, -2, -0.1));
    const Var<double> y1 = combine(neg1, constant(b), Mode::Train);
    CHECK(y1.shape() == Shape{1, 5, 4, 4});
    CHECK(y1.value() == combine(neg2, constant(b), Mode::Train).value());

    const Var<double> a = parameter(random_tensor({1, 2, 4, 4}, rng, 0.1, 1));
    const Var<double> bv = parameter(b);
    backward(resunet::testing::project(combine(a, bv, Mode::Train)));
    double ga = 0, gb = 0;
    for (double g : a.grad().values()) ga += std::abs(g);
    for (double g : bv.grad().values()) gb += std::abs(g);
    CHECK(ga > 0);
    CHECK(gb > 0);
    CHECK_THROWS_AS(combine(constant(Tensor<double>(Shape{1, 2, 2, 2})), constant(b), Mode::Train), ShapeError);
  }

  TEST_CASE("upsample block") {
    std::mt19937_64 rng(13);
    ParameterStore<double> store(14);
    UpSampleBlock<double> up(store, "u", 3, 4);
    Conv2d<double> down(store, "d", 3, 3, 1, 2);
    const Var<double> x = constant(random_tensor({1, 3, 8, 8}, rng));
    CHECK(up(x, Mode::Train).shape() == Shape{1, 4, 16, 16});
    CHECK(up(down(x), Mode::Train).shape() == Shape{1, 4, 8, 8});
    CHECK(constant_per_channel(up(constant(Tensor<double>(Shape{1, 3, 4, 4}, -0.3)), Mode::Eval).value(), 1e-12));
  }

  TEST_CASE("nearest upsample then average downsample recovers the input") {
    std::mt19937_64 rng(15);
    const Tensor<double> x = random_tensor({1, 2, 3, 3}, rng);
    const Tensor<double> up = nearest_upsample(constant(x), 2).value();
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t xx = 0; xx < 3; ++xx) {
          const double avg = (up(0, c, 2 * y, 2 * xx) + up(0, c, 2 * y + 1, 2 * xx) + up(0, c, 2 * y, 2 * xx + 1) +
                              up(0, c, 2 * y + 1, 2 * xx + 1)) / 4;
          CHECK(avg == doctest::Approx(x(0, c, y, xx)));
        }
  }
}
