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

#include "resunet/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <thread>

#include "resunet/augment.hpp"
#include "resunet/errors.hpp"

namespace resunet {

WindowPredictor model_predictor(const Model<float>& model) {
  return [&model](const Tensor<float>& batch) {
    NoGradGuard no_grad;
    return model.forward(constant(batch), Mode::Eval).segmentation.value();
  };
}

std::vector<std::ptrdiff_t> window_offsets(std::size_t extent, std::size_t window) {
  if (window < 4 || window % 4 != 0) throw ConfigError("window size must be a positive multiple of 4");
  const auto win = static_cast<std::ptrdiff_t>(window), stride = win / 4;
  std::ptrdiff_t start = -win / 2;
  while (start - stride > -win) start -= stride;
  std::vector<std::ptrdiff_t> out;
  for (; start < static_cast<std::ptrdiff_t>(extent); start += stride) out.push_back(start);
  return out;
}

std::vector<std::uint32_t> coverage_counts(std::size_t h, std::size_t w, std::size_t window) {
  std::vector<std::uint32_t> counts(h * w, 0);
  const auto win = static_cast<std::ptrdiff_t>(window);
  for (auto oy : window_offsets(h, window))
    for (auto ox : window_offsets(w, window))
      for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(oy, 0); y < std::min<std::ptrdiff_t>(oy + win, h); ++y)
        for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(ox, 0); x < std::min<std::ptrdiff_t>(ox + win, w); ++x)
          ++counts[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  return counts;
}

Tensor<float> sliding_window_inference(const Tensor<float>& tile, const WindowPredictor& predict,
                                       const TilingOptions& options) {
  if (tile.rank() != 3) throw ShapeError("sliding_window_inference: expected [C,H,W], got " + to_string(tile.shape()));
  const std::size_t channels = tile.dim(0), h = tile.dim(1), w = tile.dim(2);
  const std::size_t win = options.window;
  const std::size_t batch = std::max<std::size_t>(options.batch, 1);
  const std::size_t workers = std::max<std::size_t>(options.workers, 1);

  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> origins;
  for (auto oy : window_offsets(h, win))
    for (auto ox : window_offsets(w, win)) origins.emplace_back(oy, ox);

  auto cut = [&](std::size_t first, std::size_t count) {
    Tensor<float> out(Shape{count, channels, win, win});
    float* dst = out.data();
    for (std::size_t b = 0; b < count; ++b) {
      const auto [oy, ox] = origins[first + b];
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < win; ++y) {
          const auto sy = static_cast<std::size_t>(reflect101(oy + static_cast<std::ptrdiff_t>(y), h));
          for (std::size_t x = 0; x < win; ++x) {
            const auto sx = static_cast<std::size_t>(reflect101(ox + static_cast<std::ptrdiff_t>(x), w));
            *dst++ = tile(c, sy, sx);
          }
        }
    }
    return out;
  };

  std::size_t classes = 0;
  std::vector<double> acc;
  std::vector<std::uint32_t> count(h * w, 0);
  auto accumulate = [&](std::size_t first, const Tensor<float>& probs) {
    if (probs.rank() != 4 || probs.dim(2) != win || probs.dim(3) != win)
      throw ShapeError("window predictor returned " + to_string(probs.shape()));
    if (classes == 0) {
      classes = probs.dim(1);
      acc.assign(classes * h * w, 0.0);
    }
    for (std::size_t b = 0; b < probs.dim(0); ++b) {
      const auto [oy, ox] = origins[first + b];
      for (std::size_t y = 0; y < win; ++y) {
        const std::ptrdiff_t ty = oy + static_cast<std::ptrdiff_t>(y);
        if (ty < 0 || ty >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t x = 0; x < win; ++x) {
          const std::ptrdiff_t tx = ox + static_cast<std::ptrdiff_t>(x);
          if (tx < 0 || tx >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t pix = static_cast<std::size_t>(ty) * w + static_cast<std::size_t>(tx);
          ++count[pix];
          for (std::size_t c = 0; c < classes; ++c) acc[c * h * w + pix] += probs(b, c, y, x);
        }
      }
    }
  };

  // Rounds of `workers` batches run concurrently; results merge in window order.
  const std::size_t round = batch * workers;
  for (std::size_t first = 0; first < origins.size(); first += round) {
    std::vector<Tensor<float>> results(workers);
    auto run = [&](std::size_t slot) {
      const std::size_t start = first + slot * batch;
      if (start >= origins.size()) return;
      results[slot] = predict(cut(start, std::min(batch, origins.size() - start)));
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> threads;
      for (std::size_t slot = 0; slot < workers; ++slot) threads.emplace_back(run, slot);
    }
    for (std::size_t slot = 0; slot < workers; ++slot)
      if (!results[slot].empty()) accumulate(first + slot * batch, results[slot]);
  }

  Tensor<float> out(Shape{classes, h, w});
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t pix = 0; pix < h * w; ++pix)
      out[c * h * w + pix] = static_cast<float>(acc[c * h * w + pix] / count[pix]);
  return out;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts) t += v;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes != classes) throw ShapeError("confusion matrices of different class counts");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

ConfusionMatrix confusion(const LabelPlane& pred, const LabelPlane& ref, std::size_t k,
                          std::optional<std::uint8_t> ignore) {
  if (pred.height != ref.height || pred.width != ref.width)
    throw DataError("confusion: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                    " vs reference " + std::to_string(ref.height) + "x" + std::to_string(ref.width));
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t r = ref.data[i], p = pred.data[i];
    if (ignore && r == *ignore) continue;
    if (p >= k || r >= k)
      throw DataError("confusion: class id " + std::to_string(std::max(p, r)) + " out of range for " +
                      std::to_string(k) + " classes");
    ++cm.counts[p * k + r];
  }
  return cm;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0 ? 2 * precision * recall / s : 0.0;
}

Metrics metrics(const ConfusionMatrix& cm, const std::set<std::size_t>& exclude) {
  const std::size_t k = cm.classes;
  const double total = static_cast<double>(cm.total());
  if (total == 0) throw DataError("metrics: confusion matrix is empty");
  Metrics m;
  auto safe = [&m](double num, double den, bool& flag) {
    if (den > 0) return num / den;
    flag = true;
    m.undefined = true;
    return 0.0;
  };
  double trace = 0, f1_sum = 0;
  std::size_t f1_count = 0;
  for (std::size_t j = 0; j < k; ++j) {
    double row = 0, col = 0;
    for (std::size_t i = 0; i < k; ++i) {
      row += static_cast<double>(cm(j, i));
      col += static_cast<double>(cm(i, j));
    }
    const double tp = static_cast<double>(cm(j, j));
    trace += tp;
    ClassScores s;
    s.precision = safe(tp, row, s.undefined);
    s.recall = safe(tp, col, s.undefined);
    s.f1 = f1_score(s.precision, s.recall);
    if (!exclude.contains(j)) {
      f1_sum += s.f1;
      ++f1_count;
    }
    m.per_class.push_back(s);
  }
  m.overall_accuracy = trace / total;
  m.average_f1 = f1_count ? f1_sum / static_cast<double>(f1_count) : 0.0;

  // Summed one-vs-rest counts.
  const double tp = trace, fp = total - trace, fn = total - trace;
  const double tn = static_cast<double>(k) * total - tp - fp - fn;
  const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  bool mcc_flag = false;
  m.mcc = safe(tp * tn - fp * fn, den, mcc_flag);
  return m;
}

LabelPlane error_map(const LabelPlane& pred, const LabelPlane& ref, std::optional<std::uint8_t> ignore) {
  if (pred.height != ref.height || pred.width != ref.width) throw DataError("error_map: mask sizes differ");
  LabelPlane out(pred.height, pred.width);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    PixelOutcome o = pred.data[i] == ref.data[i] ? PixelOutcome::correct : PixelOutcome::incorrect;
    if (ignore && ref.data[i] == *ignore) o = PixelOutcome::ignored;
    out.data[i] = static_cast<std::uint8_t>(o);
  }
  return out;
}

void write_error_map(const std::filesystem::path& path, const LabelPlane& outcomes) {
  const std::size_t plane = outcomes.size();
  Tensor<float> rgb(Shape{3, outcomes.height, outcomes.width});
  for (std::size_t i = 0; i < plane; ++i) {
    const auto o = static_cast<PixelOutcome>(outcomes.data[i]);
    rgb[i] = o == PixelOutcome::correct ? 0.f : 1.f;
    rgb[plane + i] = o == PixelOutcome::incorrect ? 0.f : 1.f;
    rgb[2 * plane + i] = o == PixelOutcome::ignored ? 1.f : 0.f;
  }
  write_ppm(path, rgb);
}

std::string metrics_json(const Metrics& m, const ConfusionMatrix& cm) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t j = 0; j < m.per_class.size(); ++j) {
    const auto& s = m.per_class[j];
    per_class.push_back({{"class", j},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"f1", s.f1},
                         {"undefined", s.undefined}});
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t p = 0; p < cm.classes; ++p) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t r = 0; r < cm.classes; ++r) row.push_back(cm(p, r));
    matrix.push_back(row);
  }
  nlohmann::json doc = {{"per_class", per_class},
                        {"overall",
                         {{"OA", m.overall_accuracy},
                          {"MCC", m.mcc},
                          {"avg_F1", m.average_f1},
                          {"pixels", cm.total()},
                          {"undefined", m.undefined}}},
                        {"confusion", matrix}};
  return doc.dump(2);
}

}  // namespace resunet
