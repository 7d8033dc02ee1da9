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

// Acceptance run: one PASS/FAIL line per criterion, then a summary line.
// Exit status is the number of failed criteria.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "resunet/config.hpp"
#include "resunet/labels.hpp"
#include "resunet/trainer.hpp"

using namespace resunet;
using resunet::testing::gradcheck;
using resunet::testing::project;
using resunet::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome gradient_integrity() {
  constexpr double h = 1e-5;
  std::mt19937_64 rng(1);
  std::vector<std::pair<std::string, double>> errors;
  auto check = [&](std::string name, auto f, std::vector<Tensor<double>> inputs) {
    errors.emplace_back(std::move(name), gradcheck(f, inputs, h));
  };
  auto r = [&](Shape s, double lo = -1, double hi = 1) { return random_tensor(std::move(s), rng, lo, hi); };

  for (int stride : {1, 2})
    for (int dilation : {1, 2, 3})
      check(fmt("conv2d s%d d%d", stride, dilation),
            [=](const auto& v) {
              const Var<double> y = conv2d(v[0], v[1], v[2], stride, dilation);
              return affine(sum(mul(y, y)), 0.5, 0.0);
            },
            {r({2, 2, 7, 6}), r({3, 2, 3, 3}), r({3})});
  for (Mode mode : {Mode::Train, Mode::Eval})
    check(mode == Mode::Train ? "batch_norm train" : "batch_norm eval",
          [=](const auto& v) {
            BatchNormStats<double> stats(3);
            stats.running_mean.fill(0.2);
            stats.running_var.fill(1.5);
            return project(batch_norm(v[0], v[1], v[2], stats, mode));
          },
          {r({2, 3, 3, 3}), r({3}), r({3})});
  check("relu", [](const auto& v) { return project(relu(v[0])); }, {r({2, 3, 4, 4})});
  check("sigmoid", [](const auto& v) { return project(sigmoid(v[0])); }, {r({2, 3, 4, 4})});
  check("softmax_channel", [](const auto& v) { return project(softmax_channel(v[0])); }, {r({2, 4, 3, 3})});
  for (std::size_t cells : {1, 2, 4})
    check(fmt("max_pool_grid %zu", cells), [=](const auto& v) { return project(max_pool_grid(v[0], cells)); },
          {r({1, 2, 8, 8})});
  check("nearest_upsample", [](const auto& v) { return project(nearest_upsample(v[0], 2)); }, {r({1, 2, 3, 4})});
  check("concat_channels", [](const auto& v) { return project(concat_channels<double>({v[0], v[1]})); },
        {r({2, 1, 3, 3}), r({2, 2, 3, 3})});
  check("slice_channels", [](const auto& v) { return project(slice_channels(v[0], 1, 2)); }, {r({2, 4, 2, 2})});
  check("add/sub/mul/div", [](const auto& v) { return project(div(mul(add(v[0], v[1]), sub(v[0], v[1])), v[2])); },
        {r({3, 4}), r({3, 4}), r({3, 4}, 0.5, 2)});
  check("affine", [](const auto& v) { return project(affine(v[0], -1.5, 0.25)); }, {r({5})});
  check("sum/mean", [](const auto& v) { return add(sum(mul(v[0], v[0])), mean(v[0])); }, {r({3, 3})});
  check("spatial_sum", [](const auto& v) { return project(spatial_sum(v[0])); }, {r({2, 3, 2, 2})});
  {
    const Tensor<double> w = r({2, 3});
    check("weighted_row_sum", [=](const auto& v) { return project(weighted_row_sum(v[0], w)); }, {r({2, 3})});
  }
  {
    ParameterStore<double> store(2);
    const ResBlockA<double> block(store, "block", BlockConfig{2, 3, {1, 3}, 1});
    const PspPooling<double> psp(store, "psp", 4, kPspFullScales);
    const Combine<double> combine(store, "combine", 2, 2, 3);
    const UpSampleBlock<double> up(store, "up", 2, 3);
    check("resblock_a", [&](const auto& v) { return project(block(v[0], Mode::Train)); }, {r({2, 2, 6, 6})});
    check("psp_pooling", [&](const auto& v) { return project(psp(v[0], Mode::Train)); }, {r({2, 4, 8, 8})});
    check("combine", [&](const auto& v) { return project(combine(v[0], v[1], Mode::Train)); },
          {r({2, 2, 4, 4}), r({2, 2, 4, 4})});
    check("upsample_block", [&](const auto& v) { return project(up(v[0], Mode::Train)); }, {r({2, 2, 3, 3})});
  }

  Tensor<double> onehot(Shape{2, 3, 3, 3});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 9; ++i) onehot[(n * 3 + (i + n) % 3) * 9 + i] = 1;
  const Tensor<double> soft = r({2, 3, 3, 3}, 0, 1);
  for (Family f : {Family::d1, Family::d2, Family::d3})
    for (bool complement : {false, true})
      for (Weighting w : {Weighting::uniform, Weighting::volume}) {
        const LossKind kind{f, complement};
        const bool volume = w == Weighting::volume;
        check(to_string(kind) + (volume ? " volume" : " uniform"),
              [=](const auto& v) { return overlap_loss(v[0], volume ? onehot : soft, kind, w); },
              {r({2, 3, 3, 3}, 0.05, 0.95)});
      }
  {
    LossTargets<double> t{onehot, onehot, soft, r({2, 3, 3, 3}, 0, 1)};
    check("multitask_loss",
          [&](const auto& v) {
            const MultiHeadOutput<double> out{softmax_channel(v[0]), sigmoid(v[1]), sigmoid(v[2]), sigmoid(v[3])};
            return multitask_loss(out, t, LossKind{}).total;
          },
          {r({2, 3, 3, 3}), r({2, 3, 3, 3}), r({2, 3, 3, 3}), r({2, 3, 3, 3})});
  }

  auto worst = std::max_element(errors.begin(), errors.end(),
                                [](const auto& a, const auto& b) { return a.second < b.second; });
  Outcome o;
  o.pass = worst->second < 1e-4;
  o.detail = fmt("%zu checks, worst %s rel err %.2e (limit 1e-4)", errors.size(), worst->first.c_str(), worst->second);
  return o;
}

// ---------------------------------------------------------------- 2

double cosine(std::array<double, 2> a, std::array<double, 2> b) {
  return (a[0] * b[0] + a[1] * b[1]) / (std::hypot(a[0], a[1]) * std::hypot(b[0], b[1]));
}

Outcome loss_field() {
  const std::array<double, 2> l{1, 0};
  auto min_cos = [&](LossKind kind) {
    double worst = 1;
    for (const FieldPoint& q : field_sample(kind, l, 101))
      worst = std::min(worst, cosine({q.gx, q.gy}, {l[0] - q.px, l[1] - q.py}));
    return worst;
  };
  const LossKind tanimoto_c{Family::d3, true}, d1{Family::d1, false};
  const double cos_t = min_cos(tanimoto_c), cos_d1 = min_cos(d1);

  bool vanishing = true;
  std::string norms, projected;
  for (Family f : {Family::d1, Family::d2, Family::d3})
    for (bool complement : {false, true}) {
      const LossKind kind{f, complement};
      const auto g = field_gradient(kind, l, l);
      const double norm = std::hypot(g[0], g[1]);
      vanishing = vanishing && norm < 1e-6;
      norms += fmt(" %s=%.3g", to_string(kind).c_str(), norm);
      // Component of the ascent direction that stays inside [0,1]^2 at p = l.
      const double p0 = l[0] >= 1 ? std::min(g[0], 0.0) : (l[0] <= 0 ? std::max(g[0], 0.0) : g[0]);
      const double p1 = l[1] >= 1 ? std::min(g[1], 0.0) : (l[1] <= 0 ? std::max(g[1], 0.0) : g[1]);
      projected += fmt(" %.3g", std::hypot(p0, p1));
    }
  Outcome o;
  o.pass = cos_t > 0 && cos_t > cos_d1 && vanishing;
  o.detail = fmt("min cos T~ %.4f vs D1 %.4f; |grad| at p=l:", cos_t, cos_d1) + norms +
             "; in-box projected |grad|:" + projected;
  return o;
}

// ---------------------------------------------------------------- 3

Outcome distance_oracle() {
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    LabelPlane m(16, 16);
    std::bernoulli_distribution on(0.2 + 0.6 * (trial % 5) / 4.0);
    for (auto& v : m.data) v = on(rng);
    Tensor<double> oracle(Shape{16, 16});
    double peak = 0;
    for (long y = 0; y < 16; ++y)
      for (long x = 0; x < 16; ++x) {
        if (!m(y, x)) continue;
        long best = std::numeric_limits<long>::max();
        for (long v = -1; v <= 16; ++v)
          for (long u = -1; u <= 16; ++u)
            if (v < 0 || u < 0 || v >= 16 || u >= 16 || !m(v, u))
              best = std::min(best, (v - y) * (v - y) + (u - x) * (u - x));
        oracle(y, x) = std::sqrt(static_cast<double>(best));
        peak = std::max(peak, oracle(y, x));
      }
    if (peak > 0)
      for (auto& v : oracle.values()) v /= peak;
    if (!(get_distance(m) == oracle)) ++mismatches;
  }
  return {mismatches == 0, fmt("%zu of 200 random 16x16 masks differ from the brute-force scan", mismatches)};
}

// ---------------------------------------------------------------- 4

Outcome tiling() {
  bool coverage = true;
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{256, 256}, {600, 450}, {100, 700}})
    for (auto c : coverage_counts(h, w, 256)) coverage = coverage && c == 16;

  const WindowPredictor constant_stub = [](const Tensor<float>& b) {
    Tensor<float> out(Shape{b.dim(0), 3, b.dim(2), b.dim(3)});
    const std::size_t hw = b.dim(2) * b.dim(3);
    for (std::size_t n = 0; n < b.dim(0); ++n)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i) out[(n * 3 + c) * hw + i] = c == 1 ? 0.5f : 0.25f;
    return out;
  };
  std::mt19937_64 rng(4);
  const Tensor<float> tile = random_tensor({3, 300, 280}, rng, 0, 1).cast<float>();
  const Tensor<float> flat = sliding_window_inference(tile, constant_stub, {256, 4, 1});
  const std::size_t hw = 300 * 280;
  bool constant = true;
  for (std::size_t i = 0; i < hw; ++i)
    constant = constant && flat[i] == 0.25f && flat[hw + i] == 0.5f && flat[2 * hw + i] == 0.25f;

  const WindowPredictor varying = [](const Tensor<float>& b) {
    Tensor<float> out(Shape{b.dim(0), 3, b.dim(2), b.dim(3)});
    const std::size_t hw = b.dim(2) * b.dim(3), ch = b.dim(1);
    for (std::size_t n = 0; n < b.dim(0); ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        double e[3], total = 0;
        for (std::size_t c = 0; c < 3; ++c) total += e[c] = std::exp(4.0 * b[(n * ch + c) * hw + i]);
        for (std::size_t c = 0; c < 3; ++c) out[(n * 3 + c) * hw + i] = static_cast<float>(e[c] / total);
      }
    return out;
  };
  const Tensor<float> probs = sliding_window_inference(tile, varying, {256, 4, 1});
  double worst = 0;
  for (std::size_t i = 0; i < hw; ++i)
    worst = std::max(worst, std::abs(static_cast<double>(probs[i]) + probs[hw + i] + probs[2 * hw + i] - 1.0));
  Outcome o;
  o.pass = coverage && constant && worst <= 1e-6;
  o.detail = fmt("coverage 16 everywhere: %s; constant stub reproduced: %s; max |row sum - 1| = %.2e",
                 coverage ? "yes" : "no", constant ? "yes" : "no", worst);
  return o;
}

// ---------------------------------------------------------------- 5

Outcome table_f1() {
  const double f1 = f1_score(0.9538, 0.9735);
  return {std::abs(f1 - 0.9635) <= 5e-4, fmt("F1(0.9538, 0.9735) = %.5f, printed 0.9635", f1)};
}

// ---------------------------------------------------------------- 6

Outcome parameter_counts() {
  auto count = [](Depth d) { return Model<float>(ModelSpec{d, 32, 6, Head::single, 5}).param_count(); };
  const std::size_t d6 = count(Depth::d6);
  const std::size_t d7v1 = count(Depth::d7v1);
  const std::size_t d7v2 = count(Depth::d7v2);
  auto in = [](std::size_t v, double lo, double hi) { return v >= lo && v <= hi; };
  Outcome o;
  o.pass = in(d6, 42e6, 62e6) && in(d7v1, 130e6, 190e6) && in(d7v2, 130e6, 190e6);
  o.detail = fmt("d6 %zu, d7v1 %zu, d7v2 %zu", d6, d7v1, d7v2);
  return o;
}

// ---------------------------------------------------------------- 7, 8

struct ToyData {
  RunConfig cfg;
  std::vector<SampleRecord> train, val;
};

ToyData toy_data(const fs::path& config) {
  ToyData d;
  d.cfg = RunConfig::load(config);
  const SceneSpec spec = d.cfg.data.synth.value();
  std::vector<LabeledImage> items;
  std::vector<std::size_t> groups;
  for (auto& s : generate(spec)) {
    groups.push_back(items.size());
    items.push_back({std::move(s.image), std::move(s.mask), items.size()});
  }
  const DatasetSplit split = split_dataset(groups, d.cfg.data.split, d.cfg.data.split_seed);
  for (std::size_t i : split.train) d.train.push_back(derive_record(items[i].image, items[i].mask, spec.n_classes));
  for (std::size_t i : split.val) d.val.push_back(derive_record(items[i].image, items[i].mask, spec.n_classes));
  return d;
}

// First epoch whose training MCC reaches `target`, or 0 if it never does within the cap.
std::size_t epochs_to_mcc(const ToyData& d, ModelSpec spec, LossKind loss, double target, std::size_t cap) {
  Model<float> model(spec, d.cfg.train.seed);
  TrainConfig cfg = d.cfg.train;
  cfg.max_epochs = cap;
  std::size_t reached = 0;
  train(model, d.train, {}, cfg, loss, d.cfg.augment, [&](const EpochRecord& e) {
    if (e.train_mcc >= target) reached = e.epoch;
    return reached == 0;
  });
  return reached;
}

double last_window_variance(const ToyData& d, Head head, std::size_t window) {
  ModelSpec spec = d.cfg.model;
  spec.head = head;
  Model<float> model(spec, d.cfg.train.seed);
  const TrainResult r = train(model, d.train, d.val, d.cfg.train, d.cfg.loss, d.cfg.augment);
  if (r.history.size() < window) return std::numeric_limits<double>::infinity();
  double mean = 0, var = 0;
  for (std::size_t i = r.history.size() - window; i < r.history.size(); ++i) mean += r.history[i].val_mcc;
  mean /= static_cast<double>(window);
  for (std::size_t i = r.history.size() - window; i < r.history.size(); ++i)
    var += (r.history[i].val_mcc - mean) * (r.history[i].val_mcc - mean);
  return var / static_cast<double>(window);
}

Outcome convergence_ordering(const fs::path& config) {
  const ToyData d = toy_data(config);
  constexpr std::size_t cap = 80;
  const std::size_t t_epochs = epochs_to_mcc(d, d.cfg.model, LossKind{Family::d3, true}, 0.9, cap);
  const std::size_t d1_epochs = epochs_to_mcc(d, d.cfg.model, LossKind{Family::d1, false}, 0.9, cap);
  const bool a = t_epochs != 0 && (d1_epochs == 0 || t_epochs < d1_epochs);

  const double var_mtsk = last_window_variance(d, Head::mtsk, 30);
  const double var_cmtsk = last_window_variance(d, Head::cmtsk, 30);
  const bool b = var_cmtsk <= var_mtsk;

  auto epochs = [](std::size_t e) { return e ? std::to_string(e) : std::string(">") + std::to_string(cap); };
  Outcome o;
  o.pass = a && b;
  o.detail = "(a) epochs to train MCC 0.9: tanimoto-complement " + epochs(t_epochs) + ", d1 " + epochs(d1_epochs) +
             fmt("; (b) last-30 val MCC variance: cmtsk %.3e, mtsk %.3e", var_cmtsk, var_mtsk);
  return o;
}

Outcome overfit(const fs::path& config) {
  ToyData d = toy_data(config);
  SceneSpec spec = d.cfg.data.synth.value();
  spec.count = 8;
  std::vector<SampleRecord> eight;
  for (auto& s : generate(spec)) eight.push_back(derive_record(std::move(s.image), std::move(s.mask), spec.n_classes));
  d.train = std::move(eight);
  ModelSpec model = d.cfg.model;
  model.head = Head::cmtsk;
  const std::size_t reached = epochs_to_mcc(d, model, LossKind{Family::d3, true}, 0.95 + 1e-12, 200);
  return {reached != 0, reached ? fmt("training MCC > 0.95 at epoch %zu of 200", reached)
                                : std::string("training MCC stayed <= 0.95 for 200 epochs")};
}

// ---------------------------------------------------------------- 9

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility(const fs::path& config, const fs::path& work, const std::string& cli) {
  nlohmann::json doc = nlohmann::json::parse(read_file(config));
  doc["train"]["augment"] = true;
  doc["train"]["max_epochs"] = 3;
  const fs::path cfg_path = work / "repro_config.json";
  std::ofstream(cfg_path) << doc.dump(2);

  std::vector<std::string> traces;
  for (const char* run : {"run_a", "run_b"}) {
    const fs::path out = work / run;
    fs::remove_all(out);
    const std::string cmd = "\"" + cli + "\" train --config \"" + cfg_path.string() + "\" --seed 5 --out \"" +
                            out.string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("train command failed: ") + cmd};
    traces.push_back(read_file(out / "history.csv"));
  }
  const bool same = !traces[0].empty() && traces[0] == traces[1];
  const auto rows = std::count(traces[0].begin(), traces[0].end(), '\n') - 1;
  return {same, fmt("history.csv of two seeded runs (%ld epochs, augmentation on) %s", static_cast<long>(rows),
                    same ? "byte-identical" : "differ")};
}

// ---------------------------------------------------------------- 10

Outcome head_ablation() {
  std::mt19937_64 rng(10);
  const Tensor<float> x = random_tensor({1, 4, 64, 64}, rng, 0, 1).cast<float>();
  auto changed = [&](Head head) {
    Model<float> model(ModelSpec{Depth::d6, 4, 4, head, 4}, 11);
    const Tensor<float> before = model.forward(constant(x), Mode::Eval).segmentation.value();
    model.zero_parameters("head.distance");
    const Tensor<float> after = model.forward(constant(x), Mode::Eval).segmentation.value();
    double diff = 0;
    for (std::size_t i = 0; i < before.size(); ++i) diff = std::max(diff, static_cast<double>(std::abs(before[i] - after[i])));
    return diff;
  };
  const double cm = changed(Head::cmtsk), m = changed(Head::mtsk);
  return {cm > 0 && m == 0, fmt("max |change| in segmentation: cmtsk %.3e, mtsk %.3e", cm, m)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "resunet_acceptance").string();
  std::string config = RESUNET_SOURCE_DIR "/configs/toy.json";
  std::string cli = RESUNET_CLI_PATH;
  std::vector<int> only;
  app.add_option("--work-dir", work, "scratch directory");
  app.add_option("--config", config, "toy run configuration");
  app.add_option("--cli", cli, "path to the resunet executable");
  app.add_option("--only", only, "criterion numbers to run");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"loss-field reproduction", loss_field},
      {"distance-transform oracle", distance_oracle},
      {"tiling coverage", tiling},
      {"metrics cross-check", table_f1},
      {"parameter-count sanity", parameter_counts},
      {"toy convergence ordering", [&] { return convergence_ordering(config); }},
      {"overfit capacity", [&] { return overfit(config); }},
      {"reproducibility", [&] { return reproducibility(config, work, cli); }},
      {"multitask independence/conditioning", head_ablation},
  };

  int failed = 0, run = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++run;
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << fmt(" [%.1f s]", secs) << std::endl;
  }
  std::cout << run - failed << "/" << run << " criteria passed" << std::endl;
  return failed;
}
