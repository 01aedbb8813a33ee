// Copyright 2026, The desnow Authors
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

// desnow: synthesize snowy scans, train, infer, filter, evaluate and render.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "desnow/desnow.hpp"
#include "desnow/pipeline/render.hpp"
#include "desnow/util/malloc_tuning.hpp"

namespace fs = std::filesystem;
using namespace desnow;

namespace {

std::pair<int, int> parse_count_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--noise-count-range", "expected a:b");
  const int a = std::stoi(s.substr(0, colon));
  const int b = std::stoi(s.substr(colon + 1));
  if (a < 0 || b < a) throw CLI::ValidationError("--noise-count-range", "need 0 <= a <= b");
  return {a, b};
}

// ---------------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t scenes = 200;
  std::string count_range = "1080:2950";
  std::uint64_t seed = 1;
  std::string out;
  int rows = 32;
  int cols = 512;
  double max_range = 80.0;
  double mean_range = 8.0;
  double min_range = 3.0;
};

int run_synth(const SynthArgs& a) {
  SensorConfig sensor = a.rows == 32 ? SensorConfig::spinning32(a.cols, a.max_range)
                                     : SensorConfig::spinning(a.rows, a.cols, a.max_range);
  synth::DatasetParams params;
  std::tie(params.snow.min_count, params.snow.max_count) = parse_count_range(a.count_range);
  params.snow.mean_range = a.mean_range;
  params.snow.min_range = a.min_range;
  const auto m = pipeline::synthesize_dataset(a.out, a.scenes, a.seed, sensor, params);
  std::map<std::string, int> levels;
  for (const auto& s : m.scans) ++levels[synth::to_string(s.level)];
  std::cout << "wrote " << m.scans.size() << " scans to " << a.out << " (";
  bool first = true;
  for (const auto& [l, n] : levels) {
    std::cout << (first ? "" : ", ") << l << ' ' << n;
    first = false;
  }
  std::cout << ")\n";
  return 0;
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string mode = "self";
  std::string schedule = "smooth";
  int hypotheses = 3;
  double blank_ratio = 0.5;
  double labeled_fraction = 0.0;
  std::uint64_t seed = 1;
  int steps = 1500;
  int channels = 8;
  int blocks = 6;
  int batch = 1;
  int crop = 128;
  double lr = 3e-3;
  double rho = 100.0;
  double self_scale = 0.01;
  std::string out = "model.ckpt";
  std::string log;
};

int run_train(const TrainArgs& a) {
  const auto manifest = pipeline::load_manifest(a.data);
  const auto train_scans = pipeline::load_split(a.data, manifest, "train");
  core::TrainConfig cfg;
  cfg.mode = a.mode == "semi" ? core::TrainMode::Semi : core::TrainMode::Self;
  cfg.schedule = core::parse_schedule(a.schedule);
  cfg.net.hypotheses = a.hypotheses;
  cfg.net.channels = a.channels;
  cfg.net.blocks = a.blocks;
  cfg.net.encoder_blocks = std::min(cfg.net.encoder_blocks, a.blocks);
  cfg.net.classifier = cfg.mode == core::TrainMode::Semi;
  cfg.blank_ratio = a.blank_ratio;
  cfg.steps = a.steps;
  cfg.batch_size = a.batch;
  cfg.crop_cols = a.crop;
  cfg.self_scale = a.self_scale;
  cfg.learning_rate = a.lr;
  cfg.rho = a.rho;
  cfg.seed = a.seed;
  const double fraction = cfg.mode == core::TrainMode::Semi ? a.labeled_fraction : 0.0;
  const core::TrainingSet data = pipeline::make_training_set(train_scans, fraction, a.seed);

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw std::runtime_error("cannot write " + a.log);
    log << "step,L_self,L_sup,w_self,w_sup\n";
  }
  const auto result = core::train(data, cfg, nullptr, [&](const core::LossRecord& r) {
    if (log.is_open()) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", r.step, r.l_self, r.l_sup, r.w_self, r.w_sup);
      log << buf;
    }
    if (r.step % 100 == 0) std::cerr << "step " << r.step << " L_self " << r.l_self << " L_sup " << r.l_sup << '\n';
  });
  core::save_checkpoint(a.out, result.model, cfg.steps, cfg.rho);
  std::cout << "saved " << a.out << " (" << result.model.parameter_count() << " parameters, "
            << data.labeled_indices().size() << " labelled scans)\n";
  return 0;
}

// ---------------------------------------------------------------------- infer

struct InferArgs {
  std::string data;
  std::string model;
  std::string shift = "p20";
  std::string threshold = "auto";
  std::string score = "auto";
  std::string split = "test";
  std::string val_split = "val";
  std::string out;
};

int run_infer(const InferArgs& a) {
  const auto manifest = pipeline::load_manifest(a.data);
  const auto ck = core::load_checkpoint(a.model);
  const auto shift = pipeline::parse_shift(a.shift);
  pipeline::ScoreSource source = pipeline::default_source(ck.model);
  if (a.score == "difficulty") source = pipeline::ScoreSource::Difficulty;
  else if (a.score == "classifier") source = pipeline::ScoreSource::Classifier;
  else if (a.score != "auto") throw CLI::ValidationError("--score", "auto, difficulty or classifier");

  double threshold = 0.0;
  if (a.threshold == "auto") {
    const auto val = pipeline::load_split(a.data, manifest, a.val_split);
    if (val.empty()) throw std::runtime_error("split '" + a.val_split + "' is empty; pass a numeric --threshold");
    const auto choice = pipeline::select_threshold_on(ck.model, val, ck.rho, source, shift);
    threshold = choice.threshold;
    std::cout << "selected threshold " << pipeline::format_metric(threshold) << " (validation IoU "
              << pipeline::format_metric(choice.iou) << ")\n";
  } else {
    threshold = std::stod(a.threshold);
  }

  fs::create_directories(a.out);
  std::size_t n = 0;
  for (auto i : manifest.in_split(a.split)) {
    const auto scan = pipeline::load_scan(a.data, manifest.scans[i]);
    const auto scores = pipeline::score_scan(ck.model, scan.noisy, ck.rho, source, shift);
    pipeline::save_label_map(fs::path(a.out) / (scan.name + ".lbl"), pipeline::classify(scores, threshold));
    ++n;
  }
  std::ofstream(fs::path(a.out) / "threshold.txt") << pipeline::format_metric(threshold) << '\n';
  std::cout << "labelled " << n << " scans into " << a.out << '\n';
  return 0;
}

// --------------------------------------------------------------------- filter

struct FilterArgs {
  std::string method = "dror";
  std::string data;
  std::string split = "test";
  std::string cloud;
  std::string out;
  double radius = 0.5;
  double gamma = 3.0;
  double min_radius = 0.04;
  int min_neighbors = 3;
  int cols = 512;
};

int run_filter(const FilterArgs& a) {
  filters::RorConfig ror{a.radius, static_cast<std::size_t>(a.min_neighbors)};
  filters::DrorConfig dror{a.gamma, a.min_radius, static_cast<std::size_t>(a.min_neighbors)};
  if (a.method != "ror" && a.method != "dror") throw CLI::ValidationError("--method", "ror or dror");
  if (!a.cloud.empty()) {
    const PointCloud cloud = io::load_cloud(a.cloud);
    SensorConfig sensor = SensorConfig::spinning32(a.cols);
    const auto labels = a.method == "ror" ? filters::ror(cloud, ror) : filters::dror(cloud, dror, sensor);
    io::save_labels(a.out, labels);
    std::cout << "labelled " << labels.size() << " points into " << a.out << '\n';
    return 0;
  }
  const auto manifest = pipeline::load_manifest(a.data);
  fs::create_directories(a.out);
  std::size_t n = 0;
  for (auto i : manifest.in_split(a.split)) {
    const auto scan = pipeline::load_scan(a.data, manifest.scans[i]);
    const LabelMap labels = a.method == "ror" ? pipeline::ror_labels(scan.noisy, manifest.sensor, ror)
                                              : pipeline::dror_labels(scan.noisy, manifest.sensor, dror);
    pipeline::save_label_map(fs::path(a.out) / (scan.name + ".lbl"), labels);
    ++n;
  }
  std::cout << "labelled " << n << " scans into " << a.out << '\n';
  return 0;
}

// ----------------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> pred;
  std::vector<std::string> names;
  std::string gt;
  std::string split;
  bool by_level = false;
  std::string csv;
};

int run_eval(const EvalArgs& a) {
  const auto manifest = pipeline::load_manifest(a.gt);
  const int rows = manifest.sensor.n_rows, cols = manifest.sensor.n_cols();
  std::vector<std::pair<std::string, pipeline::Metrics>> table;
  std::ofstream csv;
  if (!a.csv.empty()) {
    csv.open(a.csv);
    if (!csv) throw std::runtime_error("cannot write " + a.csv);
    pipeline::write_csv_header(csv);
  }
  if (!a.names.empty() && a.names.size() != a.pred.size())
    throw CLI::ValidationError("--name", "give one name per --pred directory");
  for (std::size_t p = 0; p < a.pred.size(); ++p) {
    const std::string method = a.names.empty() ? fs::path(a.pred[p]).filename().string() : a.names[p];
    pipeline::Report report;
    std::size_t n = 0;
    for (auto i : manifest.in_split(a.split.empty() ? "all" : a.split)) {
      const std::string& name = manifest.scans[i].name;
      const fs::path pred_file = fs::path(a.pred[p]) / (name + ".lbl");
      if (!fs::exists(pred_file)) {
        if (a.split.empty()) continue;
        throw std::runtime_error("missing prediction " + pred_file.string());
      }
      report.add(pipeline::load_label_map(pred_file, rows, cols),
                 pipeline::load_label_map(pipeline::label_path(a.gt, name), rows, cols));
      ++n;
    }
    if (n == 0) throw std::runtime_error("no predictions found in " + a.pred[p]);
    table.emplace_back(method, pipeline::metrics_from(report.overall));
    if (a.by_level)
      for (const auto& [level, c] : report.by_level)
        table.emplace_back(method + " [" + synth::to_string(level) + "]", pipeline::metrics_from(c));
    if (csv.is_open()) pipeline::write_csv_rows(csv, method, report, a.by_level);
  }
  pipeline::print_table(std::cout, table);
  return 0;
}

// --------------------------------------------------------------------- render

struct RenderArgs {
  std::string style = "bev";
  std::string scan;
  std::string pred;
  std::string gt;
  std::string model;
  std::string out;
  double extent = 40.0;
  double resolution = 0.2;
  int scale = 2;
};

int run_render(const RenderArgs& a) {
  const auto file = io::load_range_image(a.scan);
  const RangeImage& img = file.image;
  if (a.style == "bev") {
    if (a.pred.empty() || a.gt.empty()) throw CLI::ValidationError("render", "bev needs --pred and --gt label files");
    const LabelMap pred = pipeline::load_label_map(a.pred, img.rows, img.cols);
    const LabelMap gt = pipeline::load_label_map(a.gt, img.rows, img.cols);
    std::vector<std::size_t> pixel_of;
    const PointCloud cloud = unproject(img, file.sensor, &pixel_of);
    std::vector<Label> p, g;
    for (auto k : pixel_of) {
      p.push_back(pred[k]);
      g.push_back(gt[k]);
    }
    pipeline::BevConfig cfg;
    cfg.extent = a.extent;
    cfg.resolution = a.resolution;
    pipeline::save_raster(a.out, pipeline::render_bev(cloud, p, g, cfg));
  } else if (a.style == "range") {
    pipeline::HeatmapConfig cfg;
    cfg.scale = a.scale;
    core::ScoreMap field = pipeline::range_field(img);
    if (!a.model.empty()) {
      const auto ck = core::load_checkpoint(a.model);
      field = core::infer_difficulty(ck.model, img, ck.rho);
    }
    pipeline::save_raster(a.out, pipeline::render_heatmap(field, cfg));
  } else {
    throw CLI::ValidationError("--style", "bev or range");
  }
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  util::tune_allocator();
  CLI::App app{"LiDAR de-snowing: synthesis, training, inference, filters, evaluation and rendering"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "synthesize a snowy dataset");
  synth_cmd->add_option("--scenes", sa.scenes, "number of scans")->capture_default_str();
  synth_cmd->add_option("--noise-count-range", sa.count_range, "snow returns per capture, a:b")->capture_default_str();
  synth_cmd->add_option("--seed", sa.seed)->capture_default_str();
  synth_cmd->add_option("--out", sa.out, "output directory")->required();
  synth_cmd->add_option("--rows", sa.rows)->capture_default_str();
  synth_cmd->add_option("--cols", sa.cols)->capture_default_str();
  synth_cmd->add_option("--max-range", sa.max_range)->capture_default_str();
  synth_cmd->add_option("--snow-mean-range", sa.mean_range, "mean of the exponential snow range law [m]")->capture_default_str();
  synth_cmd->add_option("--snow-min-range", sa.min_range, "lower truncation of the snow range law [m]")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train the reconstruction and difficulty networks");
  train_cmd->add_option("--data", ta.data, "dataset directory")->required();
  train_cmd->add_option("--mode", ta.mode)->check(CLI::IsMember({"self", "semi"}))->capture_default_str();
  train_cmd->add_option("--hypotheses", ta.hypotheses)->capture_default_str();
  train_cmd->add_option("--blank-ratio", ta.blank_ratio)->capture_default_str();
  train_cmd->add_option("--schedule", ta.schedule)
      ->check(CLI::IsMember({"ramp", "pretrain", "smooth", "supervised"}))
      ->capture_default_str();
  train_cmd->add_option("--labeled-fraction", ta.labeled_fraction, "fraction of training scans with labels (semi)")
      ->capture_default_str();
  train_cmd->add_option("--seed", ta.seed)->capture_default_str();
  train_cmd->add_option("--steps", ta.steps)->capture_default_str();
  train_cmd->add_option("--channels", ta.channels)->capture_default_str();
  train_cmd->add_option("--blocks", ta.blocks)->capture_default_str();
  train_cmd->add_option("--batch", ta.batch)->capture_default_str();
  train_cmd->add_option("--crop", ta.crop, "azimuth crop width, 0 for full sweeps")->capture_default_str();
  train_cmd->add_option("--lr", ta.lr)->capture_default_str();
  train_cmd->add_option("--rho", ta.rho, "meters per normalized range unit")->capture_default_str();
  train_cmd->add_option("--self-scale", ta.self_scale, "factor on the self-supervised term in semi mode")
      ->capture_default_str();
  train_cmd->add_option("--out", ta.out, "checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", ta.log, "training log CSV");

  InferArgs ia;
  auto* infer_cmd = app.add_subcommand("infer", "label scans with a trained model");
  infer_cmd->add_option("--data", ia.data, "dataset directory")->required();
  infer_cmd->add_option("--model", ia.model, "checkpoint")->required();
  infer_cmd->add_option("--shift", ia.shift, "pNN, min or none")->capture_default_str();
  infer_cmd->add_option("--threshold", ia.threshold, "auto or a number")->capture_default_str();
  infer_cmd->add_option("--score", ia.score, "auto, difficulty or classifier")->capture_default_str();
  infer_cmd->add_option("--split", ia.split)->capture_default_str();
  infer_cmd->add_option("--val-split", ia.val_split)->capture_default_str();
  infer_cmd->add_option("--out", ia.out, "prediction directory")->required();

  FilterArgs fa;
  auto* filter_cmd = app.add_subcommand("filter", "ROR / DROR baselines");
  filter_cmd->add_option("--method", fa.method)->check(CLI::IsMember({"ror", "dror"}))->capture_default_str();
  filter_cmd->add_option("--data", fa.data, "dataset directory");
  filter_cmd->add_option("--split", fa.split)->capture_default_str();
  filter_cmd->add_option("--cloud", fa.cloud, "single point cloud (.csv or .bin) instead of a dataset");
  filter_cmd->add_option("--out", fa.out, "prediction directory, or label file with --cloud")->required();
  filter_cmd->add_option("--radius", fa.radius, "ROR search radius [m]")->capture_default_str();
  filter_cmd->add_option("--gamma", fa.gamma, "DROR radius multiplier")->capture_default_str();
  filter_cmd->add_option("--min-radius", fa.min_radius, "DROR minimum search radius [m]")->capture_default_str();
  filter_cmd->add_option("--min-neighbors", fa.min_neighbors)->capture_default_str();
  filter_cmd->add_option("--cols", fa.cols, "azimuth columns of the sensor (with --cloud)")->capture_default_str();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "IoU / precision / recall against ground truth");
  eval_cmd->add_option("--pred", ea.pred, "prediction directories")->required();
  eval_cmd->add_option("--name", ea.names, "method name per prediction directory");
  eval_cmd->add_option("--gt", ea.gt, "dataset directory")->required();
  eval_cmd->add_option("--split", ea.split, "restrict to a split");
  eval_cmd->add_flag("--by-noise-level", ea.by_level);
  eval_cmd->add_option("--csv", ea.csv, "metrics CSV");

  RenderArgs ra;
  auto* render_cmd = app.add_subcommand("render", "BEV outcome raster or range heatmap");
  render_cmd->add_option("--style", ra.style)->check(CLI::IsMember({"bev", "range"}))->capture_default_str();
  render_cmd->add_option("--scan", ra.scan, "range image file")->required();
  render_cmd->add_option("--pred", ra.pred, "predicted labels (bev)");
  render_cmd->add_option("--gt", ra.gt, "ground-truth labels (bev)");
  render_cmd->add_option("--model", ra.model, "checkpoint; range style then shows difficulty");
  render_cmd->add_option("--out", ra.out, ".png or .svg")->required();
  render_cmd->add_option("--extent", ra.extent)->capture_default_str();
  render_cmd->add_option("--resolution", ra.resolution)->capture_default_str();
  render_cmd->add_option("--scale", ra.scale)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth_cmd) return run_synth(sa);
    if (*train_cmd) return run_train(ta);
    if (*infer_cmd) return run_infer(ia);
    if (*filter_cmd) return run_filter(fa);
    if (*eval_cmd) return run_eval(ea);
    if (*render_cmd) return run_render(ra);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
