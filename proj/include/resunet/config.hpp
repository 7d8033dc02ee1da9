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
#include <filesystem>
#include <optional>
#include <string>

#include "resunet/losses.hpp"
#include "resunet/synth.hpp"
#include "resunet/trainer.hpp"

namespace resunet {

struct DataConfig {
  std::string manifest;             // dataset manifest; empty means use `synth`
  std::optional<SceneSpec> synth;   // generated in memory when no manifest is given
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 0;
};

/// Everything a run needs. Parsing rejects unknown keys at every level.
struct RunConfig {
  ModelSpec model;
  TrainConfig train;
  AugmentConfig augment;
  LossKind loss;
  DataConfig data;
  std::string output_dir = "out";
  std::size_t workers = 1;

  static RunConfig parse(const std::string& json_text);
  static RunConfig load(const std::filesystem::path& path);
  std::string dump() const;
  /// Throws ConfigError on inconsistent values and DataError when a referenced
  /// input file does not exist.
  void validate() const;
};

}  // namespace resunet
