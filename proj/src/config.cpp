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

#include "resunet/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "resunet/errors.hpp"

namespace resunet {

using nlohmann::json;

namespace {

void allow_only(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

}  // namespace

RunConfig RunConfig::parse(const std::string& json_text) {
  RunConfig cfg;
  try {
    const json root = json::parse(json_text);
    allow_only(root, "config", {"model", "train", "augment", "loss", "data", "output_dir", "workers"});
    if (root.contains("model")) {
      const json& m = root["model"];
      allow_only(m, "model", {"depth", "initial_filters", "n_classes", "head", "input_channels"});
      if (m.contains("depth")) cfg.model.depth = parse_depth(m["depth"].get<std::string>());
      if (m.contains("head")) cfg.model.head = parse_head(m["head"].get<std::string>());
      read(m, "initial_filters", cfg.model.initial_filters);
      read(m, "n_classes", cfg.model.n_classes);
      read(m, "input_channels", cfg.model.input_channels);
    }
    if (root.contains("train")) {
      const json& t = root["train"];
      allow_only(t, "train",
                 {"lr", "betas", "adam_epsilon", "micro_batch", "aggregate_steps", "max_epochs", "plateau_patience",
                  "plateau_factor", "max_reductions", "seed", "augment"});
      read(t, "lr", cfg.train.lr);
      if (t.contains("betas")) {
        const auto b = t["betas"].get<std::array<double, 2>>();
        cfg.train.beta1 = b[0];
        cfg.train.beta2 = b[1];
      }
      read(t, "adam_epsilon", cfg.train.adam_epsilon);
      read(t, "micro_batch", cfg.train.micro_batch);
      read(t, "aggregate_steps", cfg.train.aggregate_steps);
      read(t, "max_epochs", cfg.train.max_epochs);
      read(t, "plateau_patience", cfg.train.plateau_patience);
      read(t, "plateau_factor", cfg.train.plateau_factor);
      read(t, "max_reductions", cfg.train.max_reductions);
      read(t, "seed", cfg.train.seed);
      read(t, "augment", cfg.train.augment);
    }
    if (root.contains("augment")) {
      const json& a = root["augment"];
      allow_only(a, "augment", {"scale_range", "flip_prob", "seed"});
      if (a.contains("scale_range")) {
        const auto r = a["scale_range"].get<std::array<double, 2>>();
        cfg.augment.scale_lo = r[0];
        cfg.augment.scale_hi = r[1];
      }
      read(a, "flip_prob", cfg.augment.flip_prob);
      read(a, "seed", cfg.augment.seed);
    }
    if (root.contains("loss")) cfg.loss = parse_loss(root["loss"].get<std::string>());
    if (root.contains("data")) {
      const json& d = root["data"];
      allow_only(d, "data", {"manifest", "synth", "split", "split_seed"});
      read(d, "manifest", cfg.data.manifest);
      read(d, "split", cfg.data.split);
      read(d, "split_seed", cfg.data.split_seed);
      if (d.contains("synth")) {
        const json& s = d["synth"];
        allow_only(s, "data.synth", {"size", "n_classes", "count", "seed", "height_channel", "imbalanced", "noise"});
        SceneSpec spec;
        read(s, "size", spec.size);
        read(s, "n_classes", spec.n_classes);
        read(s, "count", spec.count);
        read(s, "seed", spec.seed);
        read(s, "height_channel", spec.height_channel);
        read(s, "imbalanced", spec.imbalanced);
        read(s, "noise", spec.noise);
        cfg.data.synth = spec;
      }
    }
    read(root, "output_dir", cfg.output_dir);
    read(root, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::dump() const {
  json root = {
      {"model",
       {{"depth", to_string(model.depth)},
        {"initial_filters", model.initial_filters},
        {"n_classes", model.n_classes},
        {"head", to_string(model.head)},
        {"input_channels", model.input_channels}}},
      {"train",
       {{"lr", train.lr},
        {"betas", {train.beta1, train.beta2}},
        {"adam_epsilon", train.adam_epsilon},
        {"micro_batch", train.micro_batch},
        {"aggregate_steps", train.aggregate_steps},
        {"max_epochs", train.max_epochs},
        {"plateau_patience", train.plateau_patience},
        {"plateau_factor", train.plateau_factor},
        {"max_reductions", train.max_reductions},
        {"seed", train.seed},
        {"augment", train.augment}}},
      {"augment",
       {{"scale_range", {augment.scale_lo, augment.scale_hi}},
        {"flip_prob", augment.flip_prob},
        {"seed", augment.seed}}},
      {"loss", to_string(loss)},
      {"data", {{"manifest", data.manifest}, {"split", data.split}, {"split_seed", data.split_seed}}},
      {"output_dir", output_dir},
      {"workers", workers}};
  if (data.synth) {
    const SceneSpec& s = *data.synth;
    root["data"]["synth"] = {{"size", s.size},       {"n_classes", s.n_classes},
                             {"count", s.count},     {"seed", s.seed},
                             {"height_channel", s.height_channel},
                             {"imbalanced", s.imbalanced},
                             {"noise", s.noise}};
  }
  return root.dump(2);
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  augment.validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (data.synth) {
    data.synth->validate();
    if (data.synth->n_classes != model.n_classes)
      throw ConfigError("data.synth.n_classes differs from model.n_classes");
    if (data.synth->channels() != model.input_channels)
      throw ConfigError("synthetic images have " + std::to_string(data.synth->channels()) +
                        " channels but model.input_channels is " + std::to_string(model.input_channels));
  }
  if (!data.manifest.empty() && !std::filesystem::is_regular_file(data.manifest))
    throw DataError("dataset manifest not found: " + data.manifest);
}

}  // namespace resunet
