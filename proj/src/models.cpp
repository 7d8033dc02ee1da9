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

#include "resunet/models.hpp"

#include <fstream>
#include <json.hpp>

#include "resunet/errors.hpp"
#include "resunet/nct.hpp"

namespace resunet {

using nlohmann::json;

Depth parse_depth(std::string_view s) {
  if (s == "d6") return Depth::d6;
  if (s == "d7v1") return Depth::d7v1;
  if (s == "d7v2") return Depth::d7v2;
  throw ConfigError("unknown model depth '" + std::string(s) + "' (expected d6, d7v1 or d7v2)");
}

Head parse_head(std::string_view s) {
  if (s == "single") return Head::single;
  if (s == "mtsk") return Head::mtsk;
  if (s == "cmtsk") return Head::cmtsk;
  throw ConfigError("unknown head '" + std::string(s) + "' (expected single, mtsk or cmtsk)");
}

std::string to_string(Depth d) {
  switch (d) {
    case Depth::d6: return "d6";
    case Depth::d7v1: return "d7v1";
    case Depth::d7v2: return "d7v2";
  }
  return "?";
}

std::string to_string(Head h) {
  switch (h) {
    case Head::single: return "single";
    case Head::mtsk: return "mtsk";
    case Head::cmtsk: return "cmtsk";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (initial_filters < 1) throw ConfigError("initial_filters must be >= 1");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
}

void check_model_input(const ModelSpec& spec, const Shape& x) {
  if (x.size() != 4 || x[1] != spec.input_channels)
    throw ShapeError("model input " + to_string(x) + " must be [N, " + std::to_string(spec.input_channels) +
                     ", H, W]");
  const std::size_t div = spec.size_divisor();
  if (x[2] % div != 0 || x[3] % div != 0)
    throw ShapeError("model input " + to_string(x) + ": height and width must be multiples of " +
                     std::to_string(div) + " for " + to_string(spec.depth));
}

std::vector<int> level_dilations(std::size_t level) {
  switch (level) {
    case 0:
    case 1: return {1, 3, 15, 31};
    case 2:
    case 3: return {1, 3, 15};
    default: return {1};
  }
}

template <typename T>
Var<T> Model<T>::ConvStack::operator()(const Var<T>& x, Mode mode) const {
  return logits(relu(second(relu(first(x, mode)), mode)));
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed) : spec_(spec), store_(seed) {
  spec_.validate();
  build_trunk();
  attach_head(spec_.head);
}

template <typename T>
void Model<T>::build_trunk() {
  const std::size_t f0 = spec_.initial_filters;
  const std::size_t levels = spec_.levels();
  auto filters = [&](std::size_t level) { return f0 << level; };

  entry_ = Conv2d<T>(store_, "entry", spec_.input_channels, f0, 1);
  for (std::size_t i = 0; i < levels; ++i) {
    const std::string name = "enc" + std::to_string(i);
    EncoderLevel lvl;
    if (i > 0) lvl.down = Conv2d<T>(store_, name + ".down", filters(i - 1), filters(i), 1, 2);
    lvl.block = ResBlockA<T>(store_, name + ".block", BlockConfig{filters(i), 3, level_dilations(i), 1});
    encoder_.push_back(std::move(lvl));
  }

  const std::size_t deepest = filters(levels - 1);
  switch (spec_.depth) {
    case Depth::d6:
      middle_psp_ = PspPooling<T>(store_, "middle.psp", deepest, kPspFullScales, /*clamp_to_extent=*/true);
      break;
    case Depth::d7v1:
      middle_fuse_ = Conv2d<T>(store_, "middle.fuse", 2 * deepest, deepest, 1);
      break;
    case Depth::d7v2:
      middle_psp_ = PspPooling<T>(store_, "middle.psp", deepest, kPspReducedScales, /*clamp_to_extent=*/true);
      break;
  }

  for (std::size_t i = levels - 1; i-- > 0;) {
    const std::string name = "dec" + std::to_string(i);
    DecoderLevel lvl;
    lvl.up = UpSampleBlock<T>(store_, name + ".up", filters(i + 1), filters(i));
    lvl.combine = Combine<T>(store_, name + ".combine", filters(i), filters(i), filters(i));
    lvl.block = ResBlockA<T>(store_, name + ".block", BlockConfig{filters(i), 3, level_dilations(i), 1});
    decoder_.push_back(std::move(lvl));
  }
  final_combine_ = Combine<T>(store_, "final.combine", f0, f0, f0);
}

template <typename T>
void Model<T>::attach_head(Head head) {
  store_.remove_prefix("head.");
  spec_.head = head;
  const std::size_t f0 = spec_.initial_filters;
  const std::size_t k = spec_.n_classes;

  head_psp_ = PspPooling<T>(store_, "head.psp", f0, kPspFullScales);
  bound_logits_ = {};
  distance_ = {};
  color_ = {};
  if (head == Head::single) {
    seg_logits_ = Conv2d<T>(store_, "head.segmentation", f0, k, 1);
    return;
  }
  auto stack = [&](const std::string& name, std::size_t out) {
    ConvStack s;
    s.first = Conv2dN<T>(store_, name + ".conv1", f0, f0, 3);
    s.second = Conv2dN<T>(store_, name + ".conv2", f0, f0, 3);
    s.logits = Conv2d<T>(store_, name + ".logits", f0, out, 1);
    return s;
  };
  distance_ = stack("head.distance", k);
  color_ = stack("head.color", 3);
  if (head == Head::mtsk) {
    bound_logits_ = Conv2d<T>(store_, "head.boundary", f0, k, 1);
    seg_logits_ = Conv2d<T>(store_, "head.segmentation", f0, k, 1);
  } else {
    bound_logits_ = Conv2d<T>(store_, "head.boundary", f0 + k, k, 1);
    seg_logits_ = Conv2d<T>(store_, "head.segmentation", f0 + 2 * k, k, 1);
  }
}

template <typename T>
Var<T> Model<T>::middle(const Var<T>& x, Mode mode) const {
  if (spec_.depth != Depth::d7v1) return middle_psp_(x, mode);
  // 2x2 max pool, upsampled back, alongside the unpooled features.
  const std::size_t h = x.shape()[2], w = x.shape()[3];
  if (h != w) throw ShapeError("d7v1 middle layer needs square feature maps, got " + to_string(x.shape()));
  const Var<T> pooled = max_pool_grid(x, h >= 2 ? h / 2 : 1);
  return middle_fuse_(concat_channels<T>({pooled, x}));
}

template <typename T>
MultiHeadOutput<T> Model<T>::forward(const Var<T>& x, Mode mode) const {
  check_model_input(spec_, x.shape());
  const Var<T> first = entry_(x);
  std::vector<Var<T>> skips;
  Var<T> h = first;
  for (const auto& lvl : encoder_) {
    if (lvl.down.weight().defined()) h = lvl.down(h);
    h = lvl.block(h, mode);
    skips.push_back(h);
  }
  h = middle(h, mode);
  std::size_t level = encoder_.size() - 1;
  for (const auto& lvl : decoder_) {
    --level;
    h = lvl.block(lvl.combine(lvl.up(h, mode), skips[level], mode), mode);
  }
  const Var<T> features = final_combine_(h, first, mode);

  MultiHeadOutput<T> out;
  const Var<T> pooled = head_psp_(features, mode);
  switch (spec_.head) {
    case Head::single:
      out.segmentation = softmax_channel(seg_logits_(pooled));
      break;
    case Head::mtsk:
      out.distance = sigmoid(distance_(features, mode));
      out.color = sigmoid(color_(features, mode));
      out.boundary = sigmoid(bound_logits_(pooled));
      out.segmentation = softmax_channel(seg_logits_(pooled));
      break;
    case Head::cmtsk:
      out.distance = sigmoid(distance_(features, mode));
      out.color = sigmoid(color_(features, mode));
      out.boundary = sigmoid(bound_logits_(concat_channels<T>({pooled, out.distance})));
      out.segmentation = softmax_channel(seg_logits_(concat_channels<T>({pooled, out.distance, out.boundary})));
      break;
  }
  return out;
}

template <typename T>
void Model<T>::zero_parameters(std::string_view prefix) {
  for (const auto& p : store_.parameters())
    if (p.name.starts_with(prefix)) p.var.node()->value.fill(T{0});
}

namespace {

std::string file_for(const std::string& name) { return name + ".nct"; }

}  // namespace

template <typename T>
void Model<T>::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json tensors = json::object();
  for (const auto& p : store_.parameters()) {
    save_nct(dir / file_for(p.name), p.var.value().template cast<float>());
    tensors[p.name] = file_for(p.name);
  }
  for (const auto& s : store_.batch_stats()) {
    for (const auto& [suffix, t] : {std::pair{".mean", &s.stats->running_mean}, {".var", &s.stats->running_var}}) {
      const std::string name = s.name + suffix;
      save_nct(dir / file_for(name), t->template cast<float>());
      tensors[name] = file_for(name);
    }
  }
  json manifest = {{"spec",
                    {{"depth", to_string(spec_.depth)},
                     {"initial_filters", spec_.initial_filters},
                     {"n_classes", spec_.n_classes},
                     {"head", to_string(spec_.head)},
                     {"input_channels", spec_.input_channels}}},
                   {"tensors", tensors}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

template <typename T>
Model<T> Model<T>::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing checkpoint manifest in " + dir.string());
  json manifest;
  try {
    in >> manifest;
    ModelSpec spec;
    const json& js = manifest.at("spec");
    spec.depth = parse_depth(js.at("depth").get<std::string>());
    spec.head = parse_head(js.at("head").get<std::string>());
    spec.initial_filters = js.at("initial_filters").get<std::size_t>();
    spec.n_classes = js.at("n_classes").get<std::size_t>();
    spec.input_channels = js.at("input_channels").get<std::size_t>();
    Model model(spec);
    const json& tensors = manifest.at("tensors");
    auto restore = [&](const std::string& name, Tensor<T>& dst) {
      const Tensor<T> src = load_nct(dir / tensors.at(name).get<std::string>()).template cast<T>();
      if (src.shape() != dst.shape())
        throw DataError("checkpoint tensor '" + name + "' has shape " + to_string(src.shape()) + ", expected " +
                        to_string(dst.shape()));
      dst = src;
    };
    for (const auto& p : model.store_.parameters()) restore(p.name, p.var.node()->value);
    for (const auto& s : model.store_.batch_stats()) {
      restore(s.name + ".mean", s.stats->running_mean);
      restore(s.name + ".var", s.stats->running_var);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
}

template <typename T>
Model<T> build_d6(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.depth != Depth::d6) throw ConfigError("build_d6 called with depth " + to_string(spec.depth));
  return Model<T>(spec, seed);
}

template <typename T>
Model<T> build_d7(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.depth == Depth::d6) throw ConfigError("build_d7 called with depth d6");
  return Model<T>(spec, seed);
}

template class Model<float>;
template class Model<double>;
template Model<float> build_d6(const ModelSpec&, std::uint64_t);
template Model<double> build_d6(const ModelSpec&, std::uint64_t);
template Model<float> build_d7(const ModelSpec&, std::uint64_t);
template Model<double> build_d7(const ModelSpec&, std::uint64_t);

}  // namespace resunet
