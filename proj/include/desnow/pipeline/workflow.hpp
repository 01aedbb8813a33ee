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

/**
 * \file workflow.hpp
 * \brief Glue shared by the CLI and the acceptance run: training sets from a
 *        dataset directory, scoring, threshold selection and metric reports.
 */
#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "desnow/core/train.hpp"
#include "desnow/filters.hpp"
#include "desnow/pipeline/dataset.hpp"
#include "desnow/pipeline/metrics.hpp"
#include "desnow/pipeline/postprocess.hpp"

namespace desnow::pipeline {

/// Shift applied to difficulty scores before thresholding.
struct ShiftSpec {
  bool enabled = true;
  ShiftConfig cfg;
};

/// "p20" (or any "pNN"), "min" for the per-bin minimum, "none".
[[nodiscard]] inline ShiftSpec parse_shift(const std::string& s) {
  ShiftSpec spec;
  if (s == "none") {
    spec.enabled = false;
  } else if (s == "min") {
    spec.cfg.percentile = 0;
  } else if (s.size() > 1 && s[0] == 'p') {
    std::size_t used = 0;
    spec.cfg.percentile = std::stoi(s.substr(1), &used);
    if (used != s.size() - 1) throw std::invalid_argument("bad shift '" + s + "'");
    spec.cfg.validate();
  } else {
    throw std::invalid_argument("bad shift '" + s + "' (expected pNN, min or none)");
  }
  return spec;
}

enum class ScoreSource { Difficulty, Classifier };

[[nodiscard]] inline ScoreSource default_source(const core::DesnowModel& model) {
  return model.config().classifier ? ScoreSource::Classifier : ScoreSource::Difficulty;
}

/// Noise scores for one scan: shifted difficulty, or the classifier's noise logit.
[[nodiscard]] inline core::ScoreMap score_scan(const core::DesnowModel& model, const RangeImage& img, double rho,
                                               ScoreSource source, const ShiftSpec& shift) {
  if (source == ScoreSource::Classifier) return core::infer_noise_logit(model, img, rho);
  core::ScoreMap s = core::infer_difficulty(model, img, rho);
  return shift.enabled ? percentile_shift(s, img, shift.cfg) : s;
}

/// Validation-selected threshold over pooled scans.
[[nodiscard]] inline ThresholdChoice select_threshold_on(const core::DesnowModel& model,
                                                         const std::vector<LoadedScan>& scans, double rho,
                                                         ScoreSource source, const ShiftSpec& shift, int grid = 401) {
  ScoredLabels pooled;
  for (const auto& s : scans) append_scored(pooled, score_scan(model, s.noisy, rho, source, shift), s.truth);
  return select_threshold(pooled, threshold_grid(pooled, grid));
}

/**
 * Training scans of a dataset. Labels are attached to round(fraction * n)
 * scans (at least one when fraction > 0), chosen by a seeded shuffle.
 */
[[nodiscard]] inline core::TrainingSet make_training_set(const std::vector<LoadedScan>& train, double labeled_fraction,
                                                         std::uint64_t seed) {
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0))
    throw std::invalid_argument("labeled fraction must be in [0, 1]");
  core::TrainingSet ts;
  for (const auto& s : train) ts.scans.push_back(s.noisy);
  ts.labels.resize(train.size());
  std::size_t n_labeled = static_cast<std::size_t>(std::llround(labeled_fraction * static_cast<double>(train.size())));
  if (labeled_fraction > 0.0) n_labeled = std::max<std::size_t>(n_labeled, 1);
  if (n_labeled == 0) return ts;
  const Split pick = split_dataset(train.size(), {1.0, 0.0, 0.0}, mix_seed(seed, 5));
  for (std::size_t k = 0; k < n_labeled; ++k) ts.labels[pick.train[k]] = train[pick.train[k]].truth;
  return ts;
}

[[nodiscard]] inline LabelMap dror_labels(const RangeImage& img, const SensorConfig& sensor,
                                          const filters::DrorConfig& cfg = {}) {
  return filters::filter_range_image(img, sensor, [&](const PointCloud& c) { return filters::dror(c, cfg, sensor); });
}

[[nodiscard]] inline LabelMap ror_labels(const RangeImage& img, const SensorConfig& sensor,
                                         const filters::RorConfig& cfg = {}) {
  return filters::filter_range_image(img, sensor, [&](const PointCloud& c) { return filters::ror(c, cfg); });
}

// ------------------------------------------------------------------- reports

struct Report {
  Confusion overall;
  std::map<synth::NoiseLevel, Confusion> by_level;

  void add(const LabelMap& pred, const LabelMap& gt) {
    const Confusion c = confusion(pred, gt);
    overall += c;
    by_level[synth::stratify_noise_level(gt)] += c;
  }
};

[[nodiscard]] inline std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_csv_header(std::ostream& os) { os << "method,level,tp,fp,fn,tn,iou,precision,recall\n"; }

inline void write_csv_rows(std::ostream& os, const std::string& method, const Report& r, bool by_level) {
  const auto row = [&](const std::string& level, const Confusion& c) {
    const Metrics m = metrics_from(c);
    os << method << ',' << level << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << c.tn << ','
       << format_metric(m.iou) << ',' << format_metric(m.precision) << ',' << format_metric(m.recall) << '\n';
  };
  row("all", r.overall);
  if (by_level)
    for (const auto& [level, c] : r.by_level) row(synth::to_string(level), c);
}

/// Human-readable table with columns Method, IoU, Precision, Recall in percent.
inline void print_table(std::ostream& os, const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t w = 6;
  for (const auto& [name, m] : rows) w = std::max(w, name.size());
  const auto pct = [](double v) {
    char buf[16];
    if (std::isnan(v)) return std::string("    n/a");
    std::snprintf(buf, sizeof buf, "%7.2f", 100.0 * v);
    return std::string(buf);
  };
  os << std::string("Method") + std::string(w - 6, ' ') << " |     IoU | Precision |  Recall\n";
  os << std::string(w, '-') << "-+---------+-----------+--------\n";
  for (const auto& [name, m] : rows)
    os << name << std::string(w - name.size(), ' ') << " | " << pct(m.iou) << " |   " << pct(m.precision) << " | "
       << pct(m.recall) << '\n';
}

}  // namespace desnow::pipeline
