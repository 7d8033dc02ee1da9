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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "resunet/blocks.hpp"

namespace resunet {

enum class Depth { d6, d7v1, d7v2 };
enum class Head { single, mtsk, cmtsk };

Depth parse_depth(std::string_view s);
Head parse_head(std::string_view s);
std::string to_string(Depth d);
std::string to_string(Head h);

struct ModelSpec {
  Depth depth = Depth::d6;
  std::size_t initial_filters = 32;
  std::size_t n_classes = 6;
  Head head = Head::single;
  std::size_t input_channels = 3;

  void validate() const;
  std::size_t levels() const { return depth == Depth::d6 ? 6 : 7; }
  /// Input height and width must be multiples of this.
  std::size_t size_divisor() const { return std::size_t{1} << (levels() - 1); }
};

/// Probabilities of every enabled head. Heads that the model does not carry
/// are left undefined.
template <typename T>
struct MultiHeadOutput {
  Var<T> segmentation;  // softmax over classes
  Var<T> boundary;      // per-class sigmoid
  Var<T> distance;      // per-class sigmoid
  Var<T> color;         // HSV, sigmoid
};

/// Encoder-decoder network built from residual atrous blocks. Parameters are
/// named hierarchically ("enc2.block...", "head.distance...") so that whole
/// sub-networks can be addressed by prefix.
template <typename T>
class Model {
 public:
  explicit Model(ModelSpec spec, std::uint64_t seed = 0);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  MultiHeadOutput<T> forward(const Var<T>& x, Mode mode) const;

  /// Replaces the output head; the trunk keeps its weights.
  void attach_head(Head head);

  const ModelSpec& spec() const noexcept { return spec_; }
  ParameterStore<T>& store() noexcept { return store_; }
  const ParameterStore<T>& store() const noexcept { return store_; }
  std::vector<Var<T>> parameters() const { return store_.vars(); }
  std::size_t param_count() const { return store_.parameter_count(); }

  /// Sets every parameter whose name starts with `prefix` to zero.
  void zero_parameters(std::string_view prefix);

  /// Directory of NCT1 tensors (parameters and batch-norm buffers) plus
  /// manifest.json describing the spec and the name-to-file map.
  void save(const std::filesystem::path& dir) const;
  static Model load(const std::filesystem::path& dir);

 private:
  struct EncoderLevel {
    ResBlockA<T> block;
    Conv2d<T> down;  // into the next level; absent on the deepest level
  };
  struct DecoderLevel {
    UpSampleBlock<T> up;
    Combine<T> combine;
    ResBlockA<T> block;
  };
  struct ConvStack {
    Conv2dN<T> first;
    Conv2dN<T> second;
    Conv2d<T> logits;
    Var<T> operator()(const Var<T>& x, Mode mode) const;
  };

  void build_trunk();
  Var<T> middle(const Var<T>& x, Mode mode) const;

  ModelSpec spec_;
  ParameterStore<T> store_;
  Conv2d<T> entry_;
  std::vector<EncoderLevel> encoder_;
  PspPooling<T> middle_psp_;     // d6, d7v2
  Conv2d<T> middle_fuse_;        // d7v1
  std::vector<DecoderLevel> decoder_;
  Combine<T> final_combine_;
  PspPooling<T> head_psp_;
  Conv2d<T> seg_logits_;
  Conv2d<T> bound_logits_;
  ConvStack distance_;
  ConvStack color_;
};

/// Dilation rates of the encoder block at `level` (0 = full resolution).
std::vector<int> level_dilations(std::size_t level);

template <typename T>
Model<T> build_d6(const ModelSpec& spec, std::uint64_t seed = 0);
template <typename T>
Model<T> build_d7(const ModelSpec& spec, std::uint64_t seed = 0);
template <typename T>
std::size_t param_count(const Model<T>& model) {
  return model.param_count();
}

/// Throws ShapeError unless x is [N, input_channels, H, W] with H and W
/// multiples of the spec's size divisor.
void check_model_input(const ModelSpec& spec, const Shape& x);

}  // namespace resunet
