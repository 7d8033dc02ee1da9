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
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "resunet/image_io.hpp"
#include "resunet/models.hpp"

namespace resunet {

/// Maps a batch of windows [B,C,w,w] to class probabilities [B,K,w,w].
using WindowPredictor = std::function<Tensor<float>(const Tensor<float>&)>;

/// Eval-mode segmentation output of `model`; safe to call from several threads.
WindowPredictor model_predictor(const Model<float>& model);

struct TilingOptions {
  std::size_t window = 256;
  std::size_t batch = 1;    // windows per predictor call
  std::size_t workers = 1;  // threads calling the predictor
};

/// Start offsets (per axis) of every window on the lattice -window/2 + m *
/// window/4 that overlaps [0, extent). Each pixel lies in exactly four.
std::vector<std::ptrdiff_t> window_offsets(std::size_t extent, std::size_t window);

/// Per-pixel coverage counts of the window lattice over an h x w tile.
std::vector<std::uint32_t> coverage_counts(std::size_t h, std::size_t w, std::size_t window);

/// Averages the predictions of every overlapping window (stride window/4,
/// content outside the tile by reflect padding) into a [K,H,W] map.
/// Accumulation follows the row-major window order whatever `workers` is.
Tensor<float> sliding_window_inference(const Tensor<float>& tile, const WindowPredictor& predict,
                                       const TilingOptions& options = {});

struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;  // counts[pred * classes + ref]

  explicit ConfusionMatrix(std::size_t k = 0) : classes(k), counts(k * k, 0) {}
  std::uint64_t operator()(std::size_t pred, std::size_t ref) const { return counts[pred * classes + ref]; }
  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Pixels whose reference equals `ignore` are skipped.
ConfusionMatrix confusion(const LabelPlane& pred, const LabelPlane& ref, std::size_t k,
                          std::optional<std::uint8_t> ignore = std::nullopt);

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0;
  bool undefined = false;  // some ratio had a zero denominator and was set to 0
};

struct Metrics {
  std::vector<ClassScores> per_class;
  double overall_accuracy = 0;
  double mcc = 0;
  double average_f1 = 0;
  bool undefined = false;
};

double f1_score(double precision, double recall);

/// Per-class one-vs-rest scores, OA = trace / total, and MCC on the one-vs-rest
/// counts summed over classes. `exclude` drops classes from the F1 average.
Metrics metrics(const ConfusionMatrix& cm, const std::set<std::size_t>& exclude = {});

enum class PixelOutcome : std::uint8_t { correct = 0, incorrect = 1, ignored = 2 };

LabelPlane error_map(const LabelPlane& pred, const LabelPlane& ref, std::optional<std::uint8_t> ignore = std::nullopt);
/// Green for correct, red for incorrect, white for ignored.
void write_error_map(const std::filesystem::path& path, const LabelPlane& outcomes);

/// {"per_class": [...], "overall": {...}} as pretty-printed JSON.
std::string metrics_json(const Metrics& m, const ConfusionMatrix& cm);

}  // namespace resunet
