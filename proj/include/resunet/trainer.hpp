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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "resunet/augment.hpp"
#include "resunet/evaluate.hpp"
#include "resunet/losses.hpp"

namespace resunet {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t micro_batch = 4;
  std::size_t aggregate_steps = 1;
  std::size_t max_epochs = 100;
  std::size_t plateau_patience = 10;
  double plateau_factor = 0.1;
  std::size_t max_reductions = 3;
  std::uint64_t seed = 0;
  bool augment = true;

  void validate() const;
  std::size_t effective_batch() const { return micro_batch * aggregate_steps; }
};

/// Bias-corrected first and second moments, one buffer pair per parameter.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::size_t step = 0;
};

/// One Adam update of `params` from their accumulated gradients.
template <typename T>
void adam_step(std::span<const Var<T>> params, AdamState<T>& state, double lr, double beta1, double beta2,
               double epsilon);

/// Backpropagates the mean loss over the union of `micro_batches`: each
/// micro-batch's mean loss is weighted by its share of the samples, so the
/// accumulated gradients equal those of one combined batch. Gradients are
/// zeroed first. Returns the union's mean loss.
template <typename T>
double aggregate_gradients(std::span<const Var<T>> params, const std::vector<std::vector<std::size_t>>& micro_batches,
                           const std::function<Var<T>(std::span<const std::size_t>)>& mean_loss);

template <typename T>
struct Batch {
  Tensor<T> input;
  LossTargets<T> targets;
  std::vector<const LabelPlane*> masks;
};

template <typename T>
Batch<T> make_batch(std::span<const SampleRecord> records, std::span<const std::size_t> items);

struct LrFinderResult {
  std::vector<double> lr;
  std::vector<double> loss;      // raw
  std::vector<double> smoothed;  // bias-corrected exponential moving average
  double suggested_lr = 0;
  bool stopped_early = false;
};

inline constexpr double kLrFinderSmoothing = 0.98;

/// Runs `step(lr)` (one optimisation step returning its loss) over `steps`
/// exponentially spaced rates in [lr_lo, lr_hi]. Stops once the smoothed loss
/// exceeds four times its minimum. The suggestion is the rate at the steepest
/// descent of the smoothed loss against log(lr). Throws NumericalError when the
/// curve never descends.
LrFinderResult lr_finder(const std::function<double(double)>& step, double lr_lo, double lr_hi, std::size_t steps);
void write_lr_csv(std::ostream& os, const LrFinderResult& r);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_mcc = 0;
  double lr = 0;
  double train_mcc = 0;
};

/// Copies of every parameter and batch-norm buffer.
struct Snapshot {
  std::vector<Tensor<float>> values;
  static Snapshot take(const Model<float>& model);
  void restore(Model<float>& model) const;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  Snapshot best;
  std::size_t best_epoch = 0;
  bool halted = false;  // stopped on a non-finite loss; the model holds `best`
  std::string reason;
};

/// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Augmented training passes with Adam, validation loss and MCC after each
/// epoch, and a plateau schedule on the validation loss (training loss when
/// there is no validation set).
TrainResult train(Model<float>& model, std::span<const SampleRecord> train_set, std::span<const SampleRecord> val_set,
                  const TrainConfig& cfg, LossKind loss, const AugmentConfig& augment, const EpochCallback& on_epoch = {});

/// Eval-mode loss and pooled MCC over `records`.
std::pair<double, double> evaluate_records(const Model<float>& model, std::span<const SampleRecord> records,
                                           LossKind loss, std::size_t batch);

void write_history_csv(std::ostream& os, std::span<const EpochRecord> history);

}  // namespace resunet
