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

#include "resunet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "resunet/errors.hpp"

namespace resunet {

void TrainConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (micro_batch < 1 || aggregate_steps < 1) throw ConfigError("micro_batch and aggregate_steps must be >= 1");
  if (!(plateau_factor > 0 && plateau_factor < 1)) throw ConfigError("plateau_factor must lie in (0, 1)");
}

template <typename T>
void adam_step(std::span<const Var<T>> params, AdamState<T>& state, double lr, double beta1, double beta2,
               double epsilon) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape());
      state.v.emplace_back(p.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter list changed between steps");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var<T> p = params[i];
    if (state.m[i].shape() != p.shape())
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " + to_string(p.shape()) +
                       " but its moments are " + to_string(state.m[i].shape()));
    const T* g = p.grad().data();
    T* w = p.mutable_value().data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (std::size_t j = 0; j < p.value().size(); ++j) {
      m[j] = static_cast<T>(beta1 * m[j] + (1 - beta1) * g[j]);
      v[j] = static_cast<T>(beta2 * v[j] + (1 - beta2) * g[j] * g[j]);
      const double mhat = m[j] / c1, vhat = v[j] / c2;
      w[j] = static_cast<T>(w[j] - lr * mhat / (std::sqrt(vhat) + epsilon));
    }
  }
}

template <typename T>
double aggregate_gradients(std::span<const Var<T>> params, const std::vector<std::vector<std::size_t>>& micro_batches,
                           const std::function<Var<T>(std::span<const std::size_t>)>& mean_loss) {
  zero_grad(params);
  std::size_t total = 0;
  for (const auto& mb : micro_batches) total += mb.size();
  if (total == 0) throw DataError("aggregate_gradients: no samples");
  double loss_sum = 0;
  for (const auto& mb : micro_batches) {
    if (mb.empty()) continue;
    const double share = static_cast<double>(mb.size()) / static_cast<double>(total);
    const Var<T> loss = mean_loss(mb);
    loss_sum += share * static_cast<double>(loss.value()[0]);
    backward(affine(loss, share, 0.0));
  }
  return loss_sum;
}

template <typename T>
Batch<T> make_batch(std::span<const SampleRecord> records, std::span<const std::size_t> items) {
  if (items.empty()) throw DataError("make_batch: empty batch");
  auto gather = [&](auto member) {
    std::vector<Tensor<T>> parts;
    parts.reserve(items.size());
    for (std::size_t i : items) parts.push_back((records[i].*member).template cast<T>());
    return stack<T>(parts);
  };
  Batch<T> b;
  b.input = gather(&SampleRecord::image);
  b.targets.onehot = gather(&SampleRecord::onehot);
  b.targets.boundary = gather(&SampleRecord::boundary);
  b.targets.distance = gather(&SampleRecord::distance);
  b.targets.hsv = gather(&SampleRecord::hsv);
  for (std::size_t i : items) b.masks.push_back(&records[i].mask);
  return b;
}

LrFinderResult lr_finder(const std::function<double(double)>& step, double lr_lo, double lr_hi, std::size_t steps) {
  if (!(lr_lo > 0 && lr_lo < lr_hi)) throw ConfigError("lr_finder: need 0 < lr_lo < lr_hi");
  if (steps < 3) throw ConfigError("lr_finder: need at least 3 steps");
  LrFinderResult r;
  const double growth = std::pow(lr_hi / lr_lo, 1.0 / static_cast<double>(steps - 1));
  double avg = 0, best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < steps; ++i) {
    const double lr = lr_lo * std::pow(growth, static_cast<double>(i));
    const double loss = step(lr);
    if (!std::isfinite(loss)) {
      r.stopped_early = true;
      break;
    }
    avg = kLrFinderSmoothing * avg + (1 - kLrFinderSmoothing) * loss;
    const double smoothed = avg / (1 - std::pow(kLrFinderSmoothing, static_cast<double>(i + 1)));
    r.lr.push_back(lr);
    r.loss.push_back(loss);
    r.smoothed.push_back(smoothed);
    best = std::min(best, smoothed);
    if (smoothed > 4 * best) {
      r.stopped_early = true;
      break;
    }
  }
  double steepest = 0;
  bool found = false;
  for (std::size_t i = 1; i + 1 < r.smoothed.size(); ++i) {
    const double slope = (r.smoothed[i + 1] - r.smoothed[i - 1]) / std::log(r.lr[i + 1] / r.lr[i - 1]);
    if (slope < steepest) {
      steepest = slope;
      r.suggested_lr = r.lr[i];
      found = true;
    }
  }
  if (!found)
    throw NumericalError("lr_finder: smoothed loss never decreased over " + std::to_string(r.lr.size()) +
                         " steps from lr " + std::to_string(lr_lo) + "; lower lr_lo");
  return r;
}

void write_lr_csv(std::ostream& os, const LrFinderResult& r) {
  os << "lr,loss,smoothed\n";
  os.precision(10);
  for (std::size_t i = 0; i < r.lr.size(); ++i) os << r.lr[i] << ',' << r.loss[i] << ',' << r.smoothed[i] << '\n';
}

Snapshot Snapshot::take(const Model<float>& model) {
  Snapshot s;
  for (const auto& p : model.store().parameters()) s.values.push_back(p.var.value());
  for (const auto& b : model.store().batch_stats()) {
    s.values.push_back(b.stats->running_mean);
    s.values.push_back(b.stats->running_var);
  }
  return s;
}

void Snapshot::restore(Model<float>& model) const {
  std::size_t i = 0;
  for (const auto& p : model.store().parameters()) p.var.node()->value = values.at(i++);
  for (const auto& b : model.store().batch_stats()) {
    b.stats->running_mean = values.at(i++);
    b.stats->running_var = values.at(i++);
  }
}

namespace {

ConfusionMatrix batch_confusion(const Tensor<float>& seg, const std::vector<const LabelPlane*>& masks) {
  const std::size_t k = seg.dim(1);
  ConfusionMatrix cm(k);
  for (std::size_t b = 0; b < masks.size(); ++b) cm += confusion(argmax_channels(take(seg, b)), *masks[b], k);
  return cm;
}

std::vector<std::vector<std::size_t>> chunk(std::span<const std::size_t> items, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < items.size(); i += size)
    out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                     items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + size)));
  return out;
}

}  // namespace

std::pair<double, double> evaluate_records(const Model<float>& model, std::span<const SampleRecord> records,
                                           LossKind loss, std::size_t batch) {
  NoGradGuard no_grad;
  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), 0);
  double loss_sum = 0;
  ConfusionMatrix cm(model.spec().n_classes);
  for (const auto& items : chunk(all, batch)) {
    const Batch<float> b = make_batch<float>(records, items);
    const auto out = model.forward(constant(b.input), Mode::Eval);
    loss_sum += static_cast<double>(multitask_loss(out, b.targets, loss).total.value()[0]) *
                static_cast<double>(items.size());
    cm += batch_confusion(out.segmentation.value(), b.masks);
  }
  return {loss_sum / static_cast<double>(records.size()), metrics(cm).mcc};
}

TrainResult train(Model<float>& model, std::span<const SampleRecord> train_set, std::span<const SampleRecord> val_set,
                  const TrainConfig& cfg, LossKind loss, const AugmentConfig& augment, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  const std::vector<Var<float>> params = model.parameters();
  AdamState<float> adam;
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.best = Snapshot::take(model);
  double best_loss = std::numeric_limits<double>::infinity();
  double lr = cfg.lr;
  std::size_t waited = 0, reductions = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<SampleRecord> epoch_set;
    epoch_set.reserve(order.size());
    for (std::size_t i : order) {
      if (!cfg.augment) {
        epoch_set.push_back(train_set[i]);
        continue;
      }
      epoch_set.push_back(random_flip(random_affine(train_set[i], augment, rng), rng, augment.flip_prob));
    }

    std::vector<std::size_t> items(epoch_set.size());
    std::iota(items.begin(), items.end(), 0);
    ConfusionMatrix train_cm(model.spec().n_classes);
    double loss_sum = 0;
    for (const auto& window : chunk(items, cfg.effective_batch())) {
      const auto micro = chunk(window, cfg.micro_batch);
      loss_sum += static_cast<double>(window.size()) *
                  aggregate_gradients<float>(params, micro, [&](std::span<const std::size_t> mb) {
                    const Batch<float> b = make_batch<float>(epoch_set, mb);
                    const auto out = model.forward(constant(b.input), Mode::Train);
                    train_cm += batch_confusion(out.segmentation.value(), b.masks);
                    return multitask_loss(out, b.targets, loss).total;
                  });
      adam_step<float>(params, adam, lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(items.size());
    rec.train_mcc = metrics(train_cm).mcc;
    if (!val_set.empty()) {
      std::tie(rec.val_loss, rec.val_mcc) = evaluate_records(model, val_set, loss, cfg.micro_batch);
    } else {
      rec.val_loss = rec.train_loss;
      rec.val_mcc = rec.train_mcc;
    }
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      result.best.restore(model);
      result.halted = true;
      result.reason = "non-finite loss at epoch " + std::to_string(epoch);
      result.history.push_back(rec);
      break;
    }
    result.history.push_back(rec);

    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      result.best = Snapshot::take(model);
      result.best_epoch = epoch;
      waited = 0;
    } else if (++waited >= cfg.plateau_patience && reductions < cfg.max_reductions) {
      lr *= cfg.plateau_factor;
      ++reductions;
      waited = 0;
    }
    if (on_epoch && !on_epoch(rec)) break;
  }
  return result;
}

void write_history_csv(std::ostream& os, std::span<const EpochRecord> history) {
  os << "epoch,train_loss,val_loss,val_mcc,lr,train_mcc\n";
  os.precision(10);
  for (const auto& r : history)
    os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_mcc << ',' << r.lr << ','
       << r.train_mcc << '\n';
}

template void adam_step(std::span<const Var<float>>, AdamState<float>&, double, double, double, double);
template void adam_step(std::span<const Var<double>>, AdamState<double>&, double, double, double, double);
template double aggregate_gradients(std::span<const Var<float>>, const std::vector<std::vector<std::size_t>>&,
                                    const std::function<Var<float>(std::span<const std::size_t>)>&);
template double aggregate_gradients(std::span<const Var<double>>, const std::vector<std::vector<std::size_t>>&,
                                    const std::function<Var<double>(std::span<const std::size_t>)>&);
template Batch<float> make_batch(std::span<const SampleRecord>, std::span<const std::size_t>);
template Batch<double> make_batch(std::span<const SampleRecord>, std::span<const std::size_t>);

}  // namespace resunet
