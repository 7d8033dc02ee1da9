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

#include "resunet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>

#include "resunet/errors.hpp"

namespace resunet {

void SceneSpec::validate() const {
  if (size < 64) throw ConfigError("synthetic scene size must be >= 64");
  if (n_classes < 3 || n_classes > 255) throw ConfigError("synthetic scenes need 3 to 255 classes");
  if (count < 1) throw ConfigError("synthetic scene count must be >= 1");
}

bool SceneShape::covers(std::size_t y, std::size_t x) const {
  const double py = static_cast<double>(y), px = static_cast<double>(x);
  switch (kind) {
    case ShapeKind::rectangle: return py >= y0 && py < y1 && px >= x0 && px < x1;
    case ShapeKind::disk: return (py - cy) * (py - cy) + (px - cx) * (px - cx) <= radius * radius;
    case ShapeKind::stripe: return std::abs(nx * (px - cx) + ny * (py - cy)) <= half_width;
  }
  return false;
}

namespace {

ShapeKind kind_of(std::size_t cls) {
  static constexpr std::array kinds{ShapeKind::rectangle, ShapeKind::stripe, ShapeKind::disk};
  return kinds[(cls - 1) % 3];
}

std::array<float, 3> base_colour(std::size_t cls, std::size_t n_classes) {
  if (cls == 0) return {0.45f, 0.55f, 0.30f};
  // Hues spread around the wheel, alternating brightness.
  const double hue = static_cast<double>(cls - 1) / static_cast<double>(n_classes - 1);
  const double v = cls % 2 ? 0.9 : 0.6;
  std::array<float, 3> rgb{};
  for (int i = 0; i < 3; ++i) {
    const double phase = 2 * std::numbers::pi * (hue + i / 3.0);
    rgb[static_cast<std::size_t>(i)] = static_cast<float>(v * (0.5 + 0.45 * std::cos(phase)));
  }
  return rgb;
}

}  // namespace

std::vector<SyntheticScene> generate(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double n = static_cast<double>(spec.size);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const std::size_t small_cls = spec.imbalanced ? spec.n_classes - 1 : 0;
  // The rectangle class carries the height signal.
  const std::uint8_t tall_cls = 1;

  std::vector<SyntheticScene> scenes;
  for (std::size_t s = 0; s < spec.count; ++s) {
    SyntheticScene scene;
    std::vector<SceneShape> stripes, others, small;
    for (std::size_t cls = 1; cls < spec.n_classes; ++cls) {
      if (cls == small_cls) continue;
      const ShapeKind kind = kind_of(cls);
      const int copies = kind == ShapeKind::stripe ? 1 : static_cast<int>(std::uniform_int_distribution<>(1, 2)(rng));
      for (int c = 0; c < copies; ++c) {
        SceneShape sh;
        sh.kind = kind;
        sh.cls = static_cast<std::uint8_t>(cls);
        if (kind == ShapeKind::rectangle) {
          const double h = uniform(0.15, 0.35) * n, w = uniform(0.15, 0.35) * n;
          sh.y0 = std::floor(uniform(0, n - h));
          sh.x0 = std::floor(uniform(0, n - w));
          sh.y1 = sh.y0 + std::floor(h);
          sh.x1 = sh.x0 + std::floor(w);
          others.push_back(sh);
        } else if (kind == ShapeKind::disk) {
          sh.radius = uniform(0.07, 0.14) * n;
          sh.cy = uniform(sh.radius, n - sh.radius);
          sh.cx = uniform(sh.radius, n - sh.radius);
          others.push_back(sh);
        } else {
          const double angle = uniform(0, std::numbers::pi);
          sh.ny = std::cos(angle);
          sh.nx = std::sin(angle);
          sh.cy = uniform(0.3, 0.7) * n;
          sh.cx = uniform(0.3, 0.7) * n;
          sh.half_width = uniform(0.05, 0.09) * n;
          stripes.push_back(sh);
        }
      }
    }
    if (small_cls != 0) {
      // Small objects sit on the first stripe, like cars on a road.
      const int copies = std::uniform_int_distribution<>(1, 2)(rng);
      for (int c = 0; c < copies; ++c) {
        SceneShape sh;
        sh.kind = ShapeKind::rectangle;
        sh.cls = static_cast<std::uint8_t>(small_cls);
        const double side = std::max(2.0, std::floor(0.04 * n));
        double cy = uniform(0.3, 0.7) * n, cx = uniform(0.3, 0.7) * n;
        if (!stripes.empty()) {
          const SceneShape& road = stripes.front();
          const double t = uniform(-0.3, 0.3) * n;
          cy = road.cy + t * road.nx;
          cx = road.cx - t * road.ny;
        }
        sh.y0 = std::clamp(std::floor(cy - side / 2), 0.0, n - side);
        sh.x0 = std::clamp(std::floor(cx - side / 2), 0.0, n - side);
        sh.y1 = sh.y0 + side;
        sh.x1 = sh.x0 + side;
        small.push_back(sh);
      }
    }
    scene.shapes = stripes;
    scene.shapes.insert(scene.shapes.end(), others.begin(), others.end());
    scene.shapes.insert(scene.shapes.end(), small.begin(), small.end());

    scene.mask = LabelPlane(spec.size, spec.size);
    for (std::size_t y = 0; y < spec.size; ++y)
      for (std::size_t x = 0; x < spec.size; ++x)
        for (const auto& sh : scene.shapes)
          if (sh.covers(y, x)) scene.mask(y, x) = sh.cls;

    // Guarantee a second class even if every shape was overpainted.
    if (std::all_of(scene.mask.data.begin(), scene.mask.data.end(), [](std::uint8_t v) { return v == 0; })) {
      SceneShape sh;
      sh.kind = ShapeKind::rectangle;
      sh.cls = tall_cls;
      sh.y0 = sh.x0 = std::floor(n / 4);
      sh.y1 = sh.x1 = std::floor(n / 2);
      scene.shapes.push_back(sh);
      for (std::size_t y = 0; y < spec.size; ++y)
        for (std::size_t x = 0; x < spec.size; ++x)
          if (sh.covers(y, x)) scene.mask(y, x) = sh.cls;
    }

    const std::size_t plane = spec.size * spec.size;
    scene.image = Tensor<float>(Shape{spec.channels(), spec.size, spec.size});
    std::normal_distribution<double> noise(0.0, spec.noise);
    scene.class_pixels.assign(spec.n_classes, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      const std::uint8_t cls = scene.mask.data[i];
      ++scene.class_pixels[cls];
      const auto colour = base_colour(cls, spec.n_classes);
      for (std::size_t c = 0; c < 3; ++c)
        scene.image[c * plane + i] = static_cast<float>(std::clamp(colour[c] + noise(rng), 0.0, 1.0));
      if (spec.height_channel) {
        const double base = cls == tall_cls ? 0.8 : 0.15;
        scene.image[3 * plane + i] = static_cast<float>(std::clamp(base + noise(rng), 0.0, 1.0));
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

namespace {

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, i, ext);
  return buf;
}

}  // namespace

void write_scenes(const std::filesystem::path& dir, const SceneSpec& spec, const std::vector<SyntheticScene>& scenes) {
  std::filesystem::create_directories(dir);
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& sc = scenes[i];
    const std::size_t plane = sc.mask.size();
    Tensor<float> rgb(Shape{3, sc.mask.height, sc.mask.width},
                      std::vector<float>(sc.image.data(), sc.image.data() + 3 * plane));
    nlohmann::json entry = {{"image", numbered("image", i, "ppm")}, {"mask", numbered("mask", i, "pgm")},
                            {"group", i}};
    write_ppm(dir / entry["image"].get<std::string>(), rgb);
    write_pgm(dir / entry["mask"].get<std::string>(), sc.mask);
    if (spec.height_channel) {
      LabelPlane height(sc.mask.height, sc.mask.width);
      for (std::size_t j = 0; j < plane; ++j)
        height.data[j] = static_cast<std::uint8_t>(std::lround(sc.image[3 * plane + j] * 255.0f));
      entry["height"] = numbered("height", i, "pgm");
      write_pgm(dir / entry["height"].get<std::string>(), height);
    }
    items.push_back(entry);
  }
  const nlohmann::json manifest = {{"n_classes", spec.n_classes},
                                   {"size", spec.size},
                                   {"seed", spec.seed},
                                   {"channels", spec.channels()},
                                   {"items", items}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open dataset manifest " + manifest_path.string());
  const std::filesystem::path dir = manifest_path.parent_path();
  Dataset ds;
  try {
    nlohmann::json manifest;
    in >> manifest;
    ds.n_classes = manifest.at("n_classes").get<std::size_t>();
    for (const auto& entry : manifest.at("items")) {
      LabeledImage item;
      const Tensor<float> rgb = read_ppm(dir / entry.at("image").get<std::string>());
      item.mask = read_pgm(dir / entry.at("mask").get<std::string>());
      item.group = entry.value("group", ds.items.size());
      const std::size_t h = rgb.dim(1), w = rgb.dim(2), plane = h * w;
      if (item.mask.height != h || item.mask.width != w)
        throw DataError("mask " + entry.at("mask").get<std::string>() + " does not match its image size");
      const bool has_height = entry.contains("height");
      std::vector<float> values(rgb.data(), rgb.data() + 3 * plane);
      if (has_height) {
        const LabelPlane height = read_pgm(dir / entry.at("height").get<std::string>());
        if (height.height != h || height.width != w)
          throw DataError("height " + entry.at("height").get<std::string>() + " does not match its image size");
        for (auto v : height.data) values.push_back(static_cast<float>(v) / 255.0f);
      }
      item.image = Tensor<float>(Shape{has_height ? 4u : 3u, h, w}, std::move(values));
      ds.items.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest " + manifest_path.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace resunet
