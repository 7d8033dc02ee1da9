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

#include <filesystem>
#include <set>

#include "record_checks.hpp"
#include "resunet/config.hpp"
#include "resunet/synth.hpp"

using namespace resunet;

TEST_SUITE("synth") {
  TEST_CASE("generation is deterministic under a seed") {
    SceneSpec spec;
    spec.count = 3;
    spec.seed = 42;
    const auto a = generate(spec), b = generate(spec);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image == b[i].image);
      CHECK(a[i].mask == b[i].mask);
    }
    spec.seed = 43;
    CHECK_FALSE(generate(spec)[0].mask == a[0].mask);
  }

  TEST_CASE("class histogram matches the painted shapes") {
    SceneSpec spec;
    spec.n_classes = 6;
    spec.count = 6;
    spec.seed = 1;
    for (const auto& scene : generate(spec)) {
      LabelPlane painted(spec.size, spec.size);
      for (std::size_t y = 0; y < spec.size; ++y)
        for (std::size_t x = 0; x < spec.size; ++x)
          for (const auto& sh : scene.shapes)
            if (sh.covers(y, x)) painted(y, x) = sh.cls;
      CHECK(painted == scene.mask);
      std::vector<std::size_t> hist(spec.n_classes, 0);
      for (auto v : scene.mask.data) ++hist[v];
      CHECK(hist == scene.class_pixels);
      CHECK(std::set<std::uint8_t>(scene.mask.data.begin(), scene.mask.data.end()).size() >= 2);
      resunet::testing::check_record(derive_record(scene.image, scene.mask, spec.n_classes));
    }
  }

  TEST_CASE("imbalanced scenes carry a rare class") {
    SceneSpec spec;
    spec.imbalanced = true;
    spec.count = 10;
    spec.seed = 11;
    std::size_t rare = 0, total = 0;
    for (const auto& scene : generate(spec)) {
      rare += scene.class_pixels.back();
      total += scene.mask.size();
    }
    CHECK(rare > 0);
    CHECK(static_cast<double>(rare) / static_cast<double>(total) < 0.02);
  }

  TEST_CASE("height channel tracks the tall class") {
    SceneSpec spec;
    spec.count = 2;
    spec.seed = 3;
    for (const auto& scene : generate(spec)) {
      REQUIRE(scene.image.dim(0) == 4);
      double tall = 0, rest = 0;
      std::size_t nt = 0, nr = 0;
      for (std::size_t i = 0; i < scene.mask.size(); ++i) {
        const double hgt = scene.image[3 * scene.mask.size() + i];
        if (scene.mask.data[i] == 1) {
          tall += hgt;
          ++nt;
        } else {
          rest += hgt;
          ++nr;
        }
      }
      if (nt) CHECK(tall / nt > rest / nr + 0.3);
    }
    spec.height_channel = false;
    CHECK(generate(spec)[0].image.dim(0) == 3);
  }

  TEST_CASE("scenes round-trip through files") {
    const auto dir = std::filesystem::temp_directory_path() / "resunet_synth_io";
    std::filesystem::remove_all(dir);
    SceneSpec spec;
    spec.count = 2;
    spec.seed = 5;
    const auto scenes = generate(spec);
    write_scenes(dir, spec, scenes);
    const Dataset ds = read_dataset(dir / "manifest.json");
    CHECK(ds.n_classes == spec.n_classes);
    REQUIRE(ds.items.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(ds.items[i].mask == scenes[i].mask);
      CHECK(ds.items[i].group == i);
      REQUIRE(ds.items[i].image.shape() == scenes[i].image.shape());
      for (std::size_t j = 0; j < scenes[i].image.size(); ++j)
        CHECK(std::abs(ds.items[i].image[j] - scenes[i].image[j]) <= 0.5f / 255.0f + 1e-6f);
    }
    CHECK_THROWS_AS(read_dataset(dir / "nothing.json"), DataError);
  }

  TEST_CASE("scene spec validation") {
    CHECK_THROWS_AS((SceneSpec{32}.validate()), ConfigError);
    CHECK_THROWS_AS((SceneSpec{64, 2}.validate()), ConfigError);
  }
}

TEST_SUITE("config") {
  TEST_CASE("defaults and overrides") {
    const RunConfig cfg = RunConfig::parse(R"({"model": {"depth": "d7v2", "n_classes": 4},
                                               "train": {"lr": 0.01, "betas": [0.8, 0.99]},
                                               "loss": "d1"})");
    CHECK(cfg.model.depth == Depth::d7v2);
    CHECK(cfg.model.n_classes == 4);
    CHECK(cfg.model.initial_filters == 32);
    CHECK(cfg.train.lr == 0.01);
    CHECK(cfg.train.beta1 == 0.8);
    CHECK(cfg.train.beta2 == 0.99);
    CHECK(cfg.train.micro_batch == 4);
    CHECK(cfg.loss == LossKind{Family::d1, false});
    CHECK_FALSE(cfg.data.synth.has_value());
  }

  TEST_CASE("dump and parse round trip") {
    RunConfig cfg;
    cfg.model = ModelSpec{Depth::d6, 4, 4, Head::cmtsk, 4};
    cfg.train.seed = 9;
    cfg.data.synth = SceneSpec{64, 4, 20, 11, true, true, 0.08};
    const RunConfig back = RunConfig::parse(cfg.dump());
    CHECK(back.dump() == cfg.dump());
    CHECK_NOTHROW(back.validate());
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(RunConfig::parse(R"({"modle": {}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse(R"({"train": {"learning_rate": 1}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse(R"({"data": {"synth": {"colour": 1}}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse(R"({"model": {"head": "quad"}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse(R"({"train": {"lr": "fast"}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("{not json"), ConfigError);

    RunConfig cfg;
    cfg.model.n_classes = 3;
    cfg.data.synth = SceneSpec{};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.data.synth.reset();
    cfg.data.manifest = "/nonexistent/manifest.json";
    CHECK_THROWS_AS(cfg.validate(), DataError);
  }
}
