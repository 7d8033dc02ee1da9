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

// Command-line front end: synth, derive-labels, lr-find, train, infer, eval,
// loss-field and param-count. Failures print one line
//   resunet: error kind=<config|data|numerical|shape> code=<n>: <reason>
// on stderr and exit with 1 (config), 2 (data) or 3 (numerical).

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "resunet/config.hpp"
#include "resunet/errors.hpp"
#include "resunet/nct.hpp"

namespace fs = std::filesystem;
using namespace resunet;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> model, head, loss;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "seed for weights, shuffling and augmentation");
  cmd->add_option("--epochs", c.epochs, "maximum training epochs");
  cmd->add_option("--model", c.model, "d6 | d7v1 | d7v2");
  cmd->add_option("--head", c.head, "single | mtsk | cmtsk");
  cmd->add_option("--loss", c.loss, "d1 | d2 | tanimoto | tanimoto-complement");
  cmd->add_option("--workers", c.workers, "worker threads");
  cmd->add_option("--out", c.out, "output directory (or file for loss-field)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.augment.seed = *c.seed;
  }
  if (c.epochs) cfg.train.max_epochs = *c.epochs;
  if (c.model) cfg.model.depth = parse_depth(*c.model);
  if (c.head) cfg.model.head = parse_head(*c.head);
  if (c.loss) cfg.loss = parse_loss(*c.loss);
  if (c.workers) cfg.workers = *c.workers;
  if (c.out) cfg.output_dir = *c.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void snapshot(const fs::path& dir, const std::string& command, const RunConfig& cfg, const json& args = {}) {
  json doc = json::parse(cfg.dump());
  doc["command"] = command;
  if (!args.is_null()) doc["arguments"] = args;
  write_text(dir / "resolved_config.json", doc.dump(2) + "\n");
}

Tensor<float> read_image(const std::string& image, const std::string& height) {
  Tensor<float> rgb = read_ppm(image);
  if (height.empty()) return rgb;
  const LabelPlane hp = read_pgm(height);
  if (hp.height != rgb.dim(1) || hp.width != rgb.dim(2)) throw DataError("height plane size differs from image");
  std::vector<float> values(rgb.values().begin(), rgb.values().end());
  for (auto v : hp.data) values.push_back(static_cast<float>(v) / 255.0f);
  return Tensor<float>(Shape{4, rgb.dim(1), rgb.dim(2)}, std::move(values));
}

Dataset load_data(const RunConfig& cfg) {
  if (!cfg.data.manifest.empty()) return read_dataset(cfg.data.manifest);
  if (!cfg.data.synth) throw ConfigError("config needs data.manifest or data.synth");
  Dataset ds;
  ds.n_classes = cfg.data.synth->n_classes;
  std::size_t i = 0;
  for (auto& scene : generate(*cfg.data.synth)) ds.items.push_back({std::move(scene.image), std::move(scene.mask), i++});
  return ds;
}

std::vector<SampleRecord> records_of(const Dataset& ds, const std::vector<std::size_t>& items) {
  std::vector<SampleRecord> out;
  for (std::size_t i : items) out.push_back(derive_record(ds.items[i].image, ds.items[i].mask, ds.n_classes));
  return out;
}

DatasetSplit split_of(const RunConfig& cfg, const Dataset& ds) {
  std::vector<std::size_t> groups;
  for (const auto& item : ds.items) groups.push_back(item.group);
  return split_dataset(groups, cfg.data.split, cfg.data.split_seed);
}

int run_synth(const Common& c, std::optional<std::size_t> size, std::optional<std::size_t> count,
              std::optional<std::size_t> classes, bool imbalanced) {
  RunConfig cfg = resolve(c);
  SceneSpec spec = cfg.data.synth.value_or(SceneSpec{});
  if (size) spec.size = *size;
  if (count) spec.count = *count;
  if (classes) spec.n_classes = *classes;
  if (imbalanced) spec.imbalanced = true;
  if (c.seed) spec.seed = *c.seed;
  spec.validate();
  cfg.data.synth = spec;
  const fs::path out = cfg.output_dir;
  write_scenes(out, spec, generate(spec));
  snapshot(out, "synth", cfg);
  std::cout << (out / "manifest.json").string() << '\n';
  return 0;
}

int run_derive(const Common& c, const std::string& image, const std::string& height, const std::string& mask,
               std::size_t classes) {
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const SampleRecord r = derive_record(read_image(image, height), read_pgm(mask), classes);
  fs::create_directories(out);
  save_nct(out / "onehot.nct", r.onehot);
  save_nct(out / "boundary.nct", r.boundary);
  save_nct(out / "distance.nct", r.distance);
  save_nct(out / "hsv.nct", r.hsv);
  write_ppm(out / "hsv.ppm", r.hsv);
  snapshot(out, "derive-labels", cfg, {{"image", image}, {"height", height}, {"mask", mask}, {"classes", classes}});
  return 0;
}

int run_lr_find(const Common& c, double lo, double hi, std::size_t steps) {
  const RunConfig cfg = resolve(c);
  cfg.validate();
  const fs::path out = cfg.output_dir;
  const Dataset ds = load_data(cfg);
  const DatasetSplit split = split_of(cfg, ds);
  const std::vector<SampleRecord> train_set = records_of(ds, split.train);
  Model<float> model(cfg.model, cfg.train.seed);
  const auto params = model.parameters();
  AdamState<float> adam;
  std::mt19937_64 rng(cfg.train.seed);
  std::size_t cursor = 0;
  const auto result = lr_finder(
      [&](double lr) {
        std::vector<std::size_t> mb;
        for (std::size_t i = 0; i < cfg.train.micro_batch; ++i) mb.push_back(cursor++ % train_set.size());
        const double loss = aggregate_gradients<float>(params, {mb}, [&](std::span<const std::size_t> items) {
          const Batch<float> b = make_batch<float>(train_set, items);
          return multitask_loss(model.forward(constant(b.input), Mode::Train), b.targets, cfg.loss).total;
        });
        adam_step<float>(params, adam, lr, cfg.train.beta1, cfg.train.beta2, cfg.train.adam_epsilon);
        return loss;
      },
      lo, hi, steps);
  std::ostringstream csv;
  write_lr_csv(csv, result);
  write_text(out / "lr_finder.csv", csv.str());
  snapshot(out, "lr-find", cfg, {{"lr_lo", lo}, {"lr_hi", hi}, {"steps", steps}});
  std::cout << "suggested_lr=" << result.suggested_lr << '\n';
  return 0;
}

int run_train(const Common& c) {
  const RunConfig cfg = resolve(c);
  cfg.validate();
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  snapshot(out, "train", cfg);
  const Dataset ds = load_data(cfg);
  if (ds.n_classes != cfg.model.n_classes)
    throw ConfigError("dataset has " + std::to_string(ds.n_classes) + " classes, model expects " +
                      std::to_string(cfg.model.n_classes));
  const DatasetSplit split = split_of(cfg, ds);
  const auto train_set = records_of(ds, split.train);
  const auto val_set = records_of(ds, split.val);
  Model<float> model(cfg.model, cfg.train.seed);
  const TrainResult result = train(model, train_set, val_set, cfg.train, cfg.loss, cfg.augment);
  std::ostringstream csv;
  write_history_csv(csv, result.history);
  write_text(out / "history.csv", csv.str());
  model.save(out / "last");
  {
    Model<float> best(cfg.model);
    result.best.restore(best);
    best.save(out / "best");
  }
  const json summary = {{"epochs", result.history.size()},
                        {"best_epoch", result.best_epoch},
                        {"halted", result.halted},
                        {"reason", result.reason},
                        {"train_items", split.train.size()},
                        {"val_items", split.val.size()},
                        {"test_items", split.test.size()}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  if (result.halted) throw NumericalError(result.reason);
  return 0;
}

int run_infer(const Common& c, const std::string& checkpoint, const std::string& image, const std::string& height,
              std::size_t window, std::size_t batch) {
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output_dir;
  const Model<float> model = Model<float>::load(checkpoint);
  const Tensor<float> tile = read_image(image, height);
  if (tile.dim(0) != model.spec().input_channels)
    throw DataError("image has " + std::to_string(tile.dim(0)) + " channels, model expects " +
                    std::to_string(model.spec().input_channels));
  const Tensor<float> probs =
      sliding_window_inference(tile, model_predictor(model), {window, batch, std::max<std::size_t>(cfg.workers, 1)});
  fs::create_directories(out);
  save_nct(out / "probabilities.nct", probs);
  write_pgm(out / "prediction.pgm", argmax_channels(probs));
  snapshot(out, "infer", cfg, {{"checkpoint", checkpoint}, {"image", image}, {"height", height}, {"window", window}});
  return 0;
}

int run_eval(const Common& c, const std::string& pred_path, const std::string& ref_path, std::optional<int> ignore,
             std::optional<std::size_t> classes, const std::vector<std::size_t>& exclude) {
  const RunConfig cfg = resolve(c);
  const LabelPlane pred = read_pgm(pred_path), ref = read_pgm(ref_path);
  std::optional<std::uint8_t> ig;
  if (ignore) {
    if (*ignore < 0 || *ignore > 255) throw ConfigError("--ignore must be a class id in [0, 255]");
    ig = static_cast<std::uint8_t>(*ignore);
  }
  std::size_t k = classes.value_or(0);
  if (!classes) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      k = std::max<std::size_t>(k, pred.data[i] + 1u);
      if (!ig || ref.data[i] != *ig) k = std::max<std::size_t>(k, ref.data[i] + 1u);
    }
  }
  const ConfusionMatrix cm = confusion(pred, ref, k, ig);
  const Metrics m = metrics(cm, {exclude.begin(), exclude.end()});
  const std::string doc = metrics_json(m, cm);
  const fs::path out = cfg.output_dir;
  write_text(out / "metrics.json", doc + "\n");
  write_error_map(out / "error_map.ppm", error_map(pred, ref, ig));
  snapshot(out, "eval", cfg, {{"pred", pred_path}, {"ref", ref_path}, {"ignore", ignore ? json(*ignore) : json()}});
  std::cout << doc << '\n';
  return 0;
}

int run_loss_field(const Common& c, const std::string& gt, std::size_t grid) {
  const LossKind kind = c.loss ? parse_loss(*c.loss) : LossKind{};
  double a = 0, b = 0;
  char comma = 0;
  std::istringstream in(gt);
  if (!(in >> a >> comma >> b) || comma != ',' || !(in >> std::ws).eof())
    throw ConfigError("--gt expects two comma-separated numbers, got '" + gt + "'");
  const auto points = field_sample(kind, {a, b}, grid);
  if (c.out) {
    std::ostringstream csv;
    write_field_csv(csv, points);
    write_text(*c.out, csv.str());
  } else {
    write_field_csv(std::cout, points);
  }
  return 0;
}

int run_param_count(const Common& c, std::optional<std::size_t> filters, std::optional<std::size_t> classes,
                    std::optional<std::size_t> channels) {
  RunConfig cfg = resolve(c);
  if (filters) cfg.model.initial_filters = *filters;
  if (classes) cfg.model.n_classes = *classes;
  if (channels) cfg.model.input_channels = *channels;
  cfg.model.validate();
  const Model<float> model(cfg.model);
  std::cout << param_count(model) << '\n';
  return 0;
}

[[noreturn]] void fail(const char* kind, int code, const std::string& what) {
  std::string line = what;
  for (auto& ch : line)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "resunet: error kind=" << kind << " code=" << code << ": " << line << '\n';
  std::exit(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual atrous U-Net segmentation toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  add_common(synth, common);
  std::optional<std::size_t> size, count, classes, filters, channels;
  bool imbalanced = false;
  synth->add_option("--size", size, "image side in pixels (>= 64)");
  synth->add_option("--count", count, "number of images");
  synth->add_option("--classes", classes, "number of classes (>= 3)");
  synth->add_flag("--imbalanced", imbalanced, "make the last class under 2% of pixels");

  auto* derive = app.add_subcommand("derive-labels", "derive one-hot, boundary, distance and HSV targets");
  add_common(derive, common);
  std::string image, height, mask;
  std::size_t derive_classes = 0;
  derive->add_option("--image", image, "RGB PPM")->required();
  derive->add_option("--height", height, "optional height PGM");
  derive->add_option("--mask", mask, "class-index PGM")->required();
  derive->add_option("--classes", derive_classes, "number of classes")->required();

  auto* lrf = app.add_subcommand("lr-find", "exponential learning-rate sweep");
  add_common(lrf, common);
  double lr_lo = 1e-6, lr_hi = 1.0;
  std::size_t steps = 60;
  lrf->add_option("--lr-lo", lr_lo);
  lrf->add_option("--lr-hi", lr_hi);
  lrf->add_option("--steps", steps);

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, common);

  auto* inf = app.add_subcommand("infer", "sliding-window inference over a tile");
  add_common(inf, common);
  std::string checkpoint;
  std::size_t window = 256, batch = 1;
  inf->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  inf->add_option("--image", image, "RGB PPM")->required();
  inf->add_option("--height", height, "optional height PGM");
  inf->add_option("--window", window, "window side (multiple of 4 and of the model size divisor)");
  inf->add_option("--batch", batch, "windows per forward pass");

  auto* ev = app.add_subcommand("eval", "confusion matrix and metrics of two masks");
  add_common(ev, common);
  std::string pred, ref;
  std::optional<int> ignore;
  std::vector<std::size_t> exclude;
  ev->add_option("--pred", pred, "predicted class PGM")->required();
  ev->add_option("--ref", ref, "reference class PGM")->required();
  ev->add_option("--ignore", ignore, "reference class id to skip");
  ev->add_option("--classes", classes, "number of classes (default: largest id + 1)");
  ev->add_option("--exclude", exclude, "classes left out of the average F1");

  auto* lf = app.add_subcommand("loss-field", "sample a loss and its gradient over [0,1]^2");
  add_common(lf, common);
  std::string gt = "1,0";
  std::size_t grid = 101;
  lf->add_option("--gt", gt, "ground truth as a,b");
  lf->add_option("--grid", grid, "grid points per axis");

  auto* pc = app.add_subcommand("param-count", "count trainable parameters");
  add_common(pc, common);
  pc->add_option("--filters", filters, "initial filters");
  pc->add_option("--classes", classes, "number of classes");
  pc->add_option("--channels", channels, "input channels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    fail("config", 1, e.what());
  }

  try {
    if (*synth) return run_synth(common, size, count, classes, imbalanced);
    if (*derive) return run_derive(common, image, height, mask, derive_classes);
    if (*lrf) return run_lr_find(common, lr_lo, lr_hi, steps);
    if (*tr) return run_train(common);
    if (*inf) return run_infer(common, checkpoint, image, height, window, batch);
    if (*ev) return run_eval(common, pred, ref, ignore, classes, exclude);
    if (*lf) return run_loss_field(common, gt, grid);
    if (*pc) return run_param_count(common, filters, classes, channels);
  } catch (const ConfigError& e) {
    fail("config", 1, e.what());
  } catch (const DataError& e) {
    fail("data", 2, e.what());
  } catch (const NumericalError& e) {
    fail("numerical", 3, e.what());
  } catch (const ShapeError& e) {
    fail("shape", 1, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    fail("data", 2, e.what());
  }
  return 0;
}
