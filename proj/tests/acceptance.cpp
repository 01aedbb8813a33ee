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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. The end-to-end criteria train several models on a
// 200-scan procedural dataset and take a while on one core.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "desnow/core/blank.hpp"
#include "desnow/core/losses.hpp"
#include "desnow/core/model.hpp"
#include "desnow/core/train.hpp"
#include "desnow/filters.hpp"
#include "desnow/io.hpp"
#include "desnow/pipeline/dataset.hpp"
#include "desnow/pipeline/metrics.hpp"
#include "desnow/pipeline/postprocess.hpp"
#include "desnow/pipeline/workflow.hpp"
#include "desnow/random.hpp"
#include "desnow/synth.hpp"
#include "desnow/util/malloc_tuning.hpp"
#include "gradcheck.hpp"

namespace fs = std::filesystem;
using namespace desnow;
using nn::Shape;
using nn::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [failed]");
  }
};

Tensor random_tensor(Shape s, Rng& rng, bool grad, double lo, double hi) {
  Tensor t(s, 0.0, grad);
  for (double& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

RangeImage random_image(int rows, int cols, Rng& rng, double p_valid, double lo, double hi) {
  RangeImage img(rows, cols);
  img.intensity.assign(img.size(), 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (uniform01(rng) >= p_valid) continue;
    img.range[i] = uniform(rng, lo, hi);
    img.valid[i] = 1;
    img.intensity[i] = uniform01(rng);
  }
  return img;
}

// ------------------------------------------------------------ 1: gradients

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  // toy-width networks: at full width nearly every stencil of eps = 1e-5 straddles some activation kink
  core::NetConfig cfg;
  cfg.channels = 4;
  cfg.blocks = 2;
  cfg.encoder_blocks = 1;
  cfg.hypotheses = 3;
  const core::DesnowModel model(cfg, 11);
  test_support::nudge_biases(model.named_parameters(), 13);
  Rng rng = make_rng(12);
  std::vector<RangeImage> scans, hidden;
  std::vector<std::uint8_t> mask;
  for (int s = 0; s < 2; ++s) {
    scans.push_back(random_image(16, 64, rng, 0.9, 2.0, 70.0));
    const core::BlankMask m = core::sample_blank_mask(scans.back(), 0.5, 40 + s);
    hidden.push_back(core::blank(scans.back(), m));
    mask.insert(mask.end(), m.mask.begin(), m.mask.end());
  }
  const Tensor xb = core::encode_input({&hidden[0], &hidden[1]}, 100.0);
  const Tensor xf = core::encode_input({&scans[0], &scans[1]}, 100.0);
  const Tensor target = core::encode_target({&scans[0], &scans[1]}, 100.0);
  const auto loss = [&] { return core::loss_self_mhl(model.reconstruct(xb), target, model.difficulty(xf), mask); };
  const auto terms = [&] {
    return core::laplace_nll_terms(core::min_hypothesis_error(model.reconstruct(xb), target).value,
                                   model.difficulty(xf));
  };
  // the differenced terms must add up to the loss being differentiated
  double sum = 0.0;
  const Tensor t = terms();
  for (std::size_t i = 0; i < mask.size(); ++i) sum += mask[i] ? t[i] : 0.0;
  const double total = loss().item();
  const auto r = test_support::check_sum_gradients(loss, terms, mask, model.parameters(), 1e-5);
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(std::abs(sum - total) <= 1e-12 * std::abs(total), fmt("loss %.6f is the sum of its pixel terms", total));
  o.require(r.max_rel_error < 1e-5, fmt("max relative error %.3g over %zu entries of %zu parameter tensors "
                                        "(%zu nudged off a kink, worst per-tensor norm-wise %.3g)",
                                        r.max_rel_error, r.checked, model.parameters().size(), r.nudged, r.max_tensor_rel_error));
  o.require(secs < 60.0, fmt("%.1f s", secs));
  return o;
}

// ------------------------------------------------------- 2: loss arithmetic

Outcome loss_arithmetic() {
  const Shape one{1, 1, 1, 1};
  const auto t = [&](double v) { return Tensor(one, std::vector<double>{v}); };
  const std::vector<std::uint8_t> m{1};
  const double a = core::loss_self(t(2.0), t(1.0), t(0.0), m).item();
  const double b = core::loss_self(t(2.0), t(1.0), t(std::log(2.0)), m).item();
  const double c = core::loss_self_mhl(Tensor(Shape{1, 3, 1, 1}, {4.0, 2.0, -3.0}), t(1.0), t(std::log(2.0)), m).item();
  Outcome o;
  o.require(std::abs(a - std::sqrt(2.0)) <= 1e-12, fmt("phi=0 gives %.15f", a));
  o.require(std::abs(b - (std::sqrt(2.0) / 2.0 + std::log(2.0))) <= 1e-12 && std::abs(b - 1.4002569) < 1e-5,
            fmt("phi=ln2 gives %.15f", b));
  o.require(std::abs(c - b) <= 1e-12, fmt("three hypotheses with best error 1 give %.15f", c));
  return o;
}

// ------------------------------------------------------ 3: winner takes all

Outcome winner_takes_all() {
  Rng rng = make_rng(3);
  std::size_t pixels = 0, mismatches = 0;
  double worst_loss = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 1 + static_cast<int>(uniform_index(rng, 4));
    const int h = 2 + static_cast<int>(uniform_index(rng, 4)), w = 2 + static_cast<int>(uniform_index(rng, 6));
    const Shape hs{2, k, h, w}, ts{2, 1, h, w};
    Tensor th = random_tensor(hs, rng, true, -1, 1);
    if (trial % 3 == 0)
      for (double& v : th.values()) v = std::round(v * 4.0) / 4.0;  // exact ties
    const Tensor r = random_tensor(ts, rng, false, -1, 1);
    const Tensor phi = random_tensor(ts, rng, true, -2, 2);
    std::vector<std::uint8_t> mask(ts.size());
    for (auto& v : mask) v = uniform01(rng) < 0.7;
    Tensor l = core::loss_self_mhl(th, r, phi, mask);
    l.backward();
    const nn::ChannelMin sel = core::min_hypothesis_error(th, r);

    double expect = 0.0;
    for (std::size_t p = 0; p < ts.size(); ++p) {
      const int b = static_cast<int>(p / (static_cast<std::size_t>(h) * w));
      const int y = static_cast<int>(p / w % h), x = static_cast<int>(p % w);
      int best = 0;
      double c = std::abs(th[hs.index(b, 0, y, x)] - r[p]);
      for (int j = 1; j < k; ++j) {
        const double e = std::abs(th[hs.index(b, j, y, x)] - r[p]);
        if (e < c) {
          c = e;
          best = j;
        }
      }
      ++pixels;
      const double inv = std::exp(-phi[p]);
      if (mask[p]) expect += std::sqrt(2.0) * c * inv + phi[p];
      bool ok = sel.argmin[p] == best && sel.value[p] == c;
      for (int j = 0; j < k; ++j) {
        const double diff = th[hs.index(b, j, y, x)] - r[p];
        const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
        const double g = (mask[p] && j == best) ? std::sqrt(2.0) * inv * sign : 0.0;
        ok = ok && th.grad()[hs.index(b, j, y, x)] == g;
      }
      mismatches += !ok;
    }
    worst_loss = std::max(worst_loss, std::abs(l.item() - expect));
  }
  Outcome o;
  o.require(mismatches == 0, fmt("%zu of %zu pixels differ in selection or routed gradient", mismatches, pixels));
  o.require(worst_loss <= 1e-12, fmt("loss differs by at most %.2g", worst_loss));
  return o;
}

// ------------------------------------------------------ 4: synthesis oracle

Outcome synthesis_oracle() {
  Rng rng = make_rng(77);
  const synth::SynthConfig cfg;
  std::size_t label_bad = 0, inject_bad = 0, pixels = 0;
  double range_err = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    const RangeImage base = random_image(16, 64, rng, 0.8, 0.5, 80.0);
    const RangeImage ref = random_image(16, 64, rng, 0.8, 0.5, 80.0);
    const RangeImage snowy = random_image(16, 64, rng, 0.8, 0.5, 80.0);
    const double tau = uniform(rng, 0.0, 2.0);
    const LabelMap labels = synth::extract_noise_labels(snowy, ref, tau);
    const synth::InjectionResult inj = synth::inject_noise(base, snowy, labels, cfg);
    for (std::size_t i = 0; i < base.size(); ++i) {
      ++pixels;
      Label expect = Label::Invalid;
      if (snowy.valid[i]) expect = (!ref.valid[i] || ref.range[i] >= snowy.range[i] + tau) ? Label::Noise : Label::Clean;
      label_bad += labels[i] != expect;

      const double ib = base.valid[i] ? base.intensity[i] : 0.0;
      const double rb = base.valid[i] ? base.range[i] : std::numeric_limits<double>::infinity();
      double rmax = 0.0;
      if (ib + cfg.gain > cfg.noise_floor)
        rmax = std::min(std::log((ib + cfg.gain) / cfg.noise_floor) / (2.0 * cfg.beta), rb);
      const double got = synth::max_detectable_range(ib, rb, cfg).meters;
      range_err = std::max(range_err, std::isinf(rmax) && std::isinf(got) ? 0.0 : std::abs(got - rmax));

      const bool take = expect == Label::Noise && snowy.range[i] <= rmax;
      const bool ok = inj.scan.range[i] == (take ? snowy.range[i] : base.range[i]) &&
                      inj.scan.valid[i] == (take ? 1 : base.valid[i]) &&
                      inj.truth[i] == (take ? Label::Noise : (base.valid[i] ? Label::Clean : Label::Invalid));
      inject_bad += !ok;
    }
  }

  std::size_t monotone_bad = 0;
  for (int k = 0; k < 10000; ++k) {
    const synth::SynthConfig c{1.0, uniform(rng, 0.0, 1.0), uniform(rng, 1e-3, 0.2), uniform(rng, 1e-3, 0.5)};
    const double i = uniform01(rng), rb = uniform(rng, 1.0, 120.0);
    const double base = synth::max_detectable_range(i, rb, c).meters;
    synth::SynthConfig denser = c, noisier = c;
    denser.beta *= 1.0 + uniform01(rng);
    noisier.noise_floor *= 1.0 + uniform01(rng);
    const bool ok = base <= rb && synth::max_detectable_range(i + uniform01(rng), rb, c).meters >= base &&
                    synth::max_detectable_range(i, rb, denser).meters <= base &&
                    synth::max_detectable_range(i, rb, noisier).meters <= base;
    monotone_bad += !ok;
  }
  Outcome o;
  o.require(label_bad == 0, fmt("label rule: %zu of %zu pixels differ", label_bad, pixels));
  o.require(range_err <= 1e-12, fmt("range limit: max error %.2g m", range_err));
  o.require(inject_bad == 0, fmt("injection: %zu pixels differ", inject_bad));
  o.require(monotone_bad == 0, fmt("monotonicity: %zu of 10000 draws violate", monotone_bad));
  return o;
}

// ------------------------------------------------------- 5: filter fidelity

template <typename RadiusFn>
std::vector<Label> brute_force(const PointCloud& cloud, std::size_t min_neighbors, RadiusFn radius_of) {
  std::vector<Label> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double r = radius_of(cloud[i]);
    std::size_t n = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      if (j == i) continue;
      const double dx = cloud[i].x - cloud[j].x, dy = cloud[i].y - cloud[j].y, dz = cloud[i].z - cloud[j].z;
      if (dx * dx + dy * dy + dz * dz <= r * r) ++n;
    }
    out[i] = n < min_neighbors ? Label::Noise : Label::Clean;
  }
  return out;
}

// A synthesized snowy scan as a cloud, optionally snapped to a grid so that distance ties occur.
PointCloud scan_cloud(std::uint64_t seed, std::size_t max_points, double quantum) {
  const SensorConfig sensor = SensorConfig::spinning32(256);
  synth::DatasetParams params;
  params.snow.min_count = params.snow.max_count = 600;
  const synth::SnowyScan s = synth::synthesize_scan(seed, 0, sensor, params);
  PointCloud c = unproject(s.noisy, sensor);
  if (c.size() > max_points) c.resize(max_points);
  if (quantum > 0)
    for (auto& p : c) {
      p.x = std::round(p.x / quantum) * quantum;
      p.y = std::round(p.y / quantum) * quantum;
      p.z = std::round(p.z / quantum) * quantum;
    }
  return c;
}

PointCloud wall(const SensorConfig& s, double distance, bool behind) {
  PointCloud c;
  for (int v = 0; v < s.n_rows; ++v) {
    if (std::abs(s.elevation_of(v)) > 8.0 * std::numbers::pi / 180.0) continue;
    for (int u = 0; u < s.n_cols(); ++u) {
      const RayDirection d = pixel_ray(s, v, u);
      const double along = behind ? -d.x : d.x;
      if (along <= 0 || std::abs(std::atan2(d.y, along)) > 10.0 * std::numbers::pi / 180.0) continue;
      const double t = distance / along;
      c.push_back({t * d.x, t * d.y, t * d.z, 0.5, v});
    }
  }
  return c;
}

Outcome filter_fidelity() {
  const SensorConfig sensor = SensorConfig::spinning32(512);
  std::size_t compared = 0, differ = 0, largest = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (double quantum : {0.0, 0.2}) {
      const PointCloud c = scan_cloud(seed, 5000, quantum);
      largest = std::max(largest, c.size());
      for (std::size_t k : {1u, 3u, 5u}) {
        const filters::RorConfig rc{0.5, k};
        filters::DrorConfig dc;
        dc.min_neighbors = k;
        const auto ror_ref = brute_force(c, k, [](const Point&) { return 0.5; });
        const auto dror_ref =
            brute_force(c, k, [&](const Point& p) { return filters::dror_radius(range_of(p), dc, sensor.delta_h); });
        const auto ror = filters::ror(c, rc);
        const auto dror = filters::dror(c, dc, sensor);
        for (std::size_t i = 0; i < c.size(); ++i) differ += (ror[i] != ror_ref[i]) + (dror[i] != dror_ref[i]);
        compared += 2 * c.size();
      }
    }
  }

  const PointCloud near = wall(sensor, 10.0, false), far = wall(sensor, 40.0, true);
  PointCloud both = near;
  both.insert(both.end(), far.begin(), far.end());
  const filters::RorConfig rc{0.4, 3};
  const auto ror = filters::ror(both, rc);
  const auto dror = filters::dror(both, {}, sensor);
  const bool repeatable = filters::ror(both, rc) == ror && filters::dror(both, {}, sensor) == dror;
  std::size_t near_killed = 0, far_killed = 0, dror_killed = 0;
  for (std::size_t i = 0; i < both.size(); ++i) {
    (i < near.size() ? near_killed : far_killed) += ror[i] == Label::Noise;
    dror_killed += dror[i] == Label::Noise;
  }
  Outcome o;
  o.require(differ == 0, fmt("%zu of %zu labels differ from O(n^2) counting (clouds up to %zu points)", differ,
                             compared, largest));
  o.require(near_killed == 0 && far_killed == far.size(),
            fmt("ROR r=0.4 removes %zu/%zu of the 10 m wall and %zu/%zu of the 40 m wall", near_killed, near.size(),
                far_killed, far.size()));
  o.require(dror_killed == 0, fmt("DROR removes %zu wall points", dror_killed));
  o.require(repeatable, "deterministic");
  return o;
}

// ---------------------------------------------------- 8: post-processing

Outcome postprocessing() {
  Rng rng = make_rng(12);
  std::size_t bins_checked = 0, bin_bad = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    const int n = 5 + static_cast<int>(uniform_index(rng, 80));
    RangeImage img(1, n);
    core::ScoreMap s{1, n, std::vector<double>(static_cast<std::size_t>(n)), {}};
    for (int i = 0; i < n; ++i) {
      img.set(0, i, uniform(rng, 0.5, 8.0));
      const double v = uniform(rng, -3, 3);
      s.score[static_cast<std::size_t>(i)] = draw % 4 == 0 ? std::round(v) : v;
    }
    s.present = img.valid;
    const core::ScoreMap out = pipeline::percentile_shift(s, img, {});
    std::map<long, std::vector<double>> bins;
    for (std::size_t i = 0; i < img.size(); ++i)
      bins[static_cast<long>(std::floor(img.range[i]))].push_back(out.score[i]);
    for (const auto& [b, v] : bins) {
      if (v.size() < 5) continue;
      ++bins_checked;
      std::size_t negative = 0;
      for (double x : v) negative += x < 0.0;
      bin_bad += !(pipeline::nearest_rank(v, 20) == 0.0 && static_cast<double>(negative) < 0.2 * v.size());
    }
  }

  std::size_t field_bad = 0;
  for (int field = 0; field < 1000; ++field) {
    pipeline::ScoredLabels s;
    const int n = 20 + static_cast<int>(uniform_index(rng, 200));
    for (int i = 0; i < n; ++i) s.emplace_back(uniform(rng, -2, 2), uniform01(rng) < 0.3);
    const auto grid = pipeline::threshold_grid(s, 41);
    bool ok = true;
    pipeline::Confusion prev = pipeline::confusion_at(s, grid.front());
    for (double t : grid) {
      const pipeline::Confusion c = pipeline::confusion_at(s, t);
      ok = ok && c.tp <= prev.tp && c.fp <= prev.fp && c.fn >= prev.fn && c.tn >= prev.tn &&
           c.tp + c.fn == prev.tp + prev.fn && c.fp + c.tn == prev.fp + prev.tn;
      prev = c;
    }
    field_bad += !ok;
  }
  Outcome o;
  o.require(bin_bad == 0, fmt("p20 of every populated bin is 0: %zu of %zu bins violate", bin_bad, bins_checked));
  o.require(field_bad == 0, fmt("confusion counts monotone in the threshold: %zu of 1000 fields violate", field_bad));
  return o;
}

// --------------------------------------------------------- 9: determinism

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DESNOW_CLI_PATH) + " " + args + " >> " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& root) {
  std::vector<std::string> csv;
  Outcome o;
  for (const char* run : {"run_a", "run_b"}) {
    const fs::path dir = root / "determinism" / run;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";
    const std::string d = dir.string();
    const bool ok =
        run_cli("synth --scenes 30 --seed 9 --out " + d + "/data", log) == 0 &&
        run_cli("train --data " + d + "/data --steps 200 --seed 4 --out " + d + "/model.ckpt", log) == 0 &&
        run_cli("infer --data " + d + "/data --model " + d + "/model.ckpt --out " + d + "/pred", log) == 0 &&
        run_cli("filter --method dror --data " + d + "/data --out " + d + "/dror", log) == 0 &&
        run_cli("eval --pred " + d + "/pred --pred " + d + "/dror --name ours --name dror --gt " + d +
                    "/data --split test --by-noise-level --csv " + d + "/metrics.csv",
                log) == 0;
    o.require(ok, std::string(run) + " pipeline completed");
    csv.push_back(slurp(dir / "metrics.csv"));
  }
  o.require(!csv[0].empty() && csv[0] == csv[1], fmt("metric CSVs identical (%zu bytes)", csv[0].size()));
  return o;
}

// ------------------------------------------------- shared desk-scale setup

struct Desk {
  fs::path dir;
  pipeline::DatasetManifest manifest;
  std::vector<pipeline::LoadedScan> train, val, test;
  std::vector<RangeImage> test_clean;
  int steps = 1500;
  std::map<std::string, core::DesnowModel> cache;
  std::map<std::string, double> train_seconds;
};

core::TrainConfig self_config(const Desk& d, std::uint64_t seed) {
  core::TrainConfig cfg;
  cfg.steps = d.steps;
  cfg.seed = seed;
  return cfg;
}

const core::DesnowModel& trained(Desk& d, const std::string& key, const core::TrainConfig& cfg, double fraction) {
  if (auto it = d.cache.find(key); it != d.cache.end()) return it->second;
  const auto t0 = Clock::now();
  auto result = core::train(pipeline::make_training_set(d.train, fraction, cfg.seed), cfg);
  d.train_seconds[key] = seconds_since(t0);
  std::cout << "  trained " << key << " in " << fmt("%.0f s", d.train_seconds[key]) << std::endl;
  return d.cache.emplace(key, std::move(result.model)).first->second;
}

pipeline::ScoredLabels pooled(const core::DesnowModel& m, const std::vector<pipeline::LoadedScan>& scans,
                              pipeline::ScoreSource source, const pipeline::ShiftSpec& shift) {
  pipeline::ScoredLabels out;
  for (const auto& s : scans) pipeline::append_scored(out, pipeline::score_scan(m, s.noisy, 100.0, source, shift), s.truth);
  return out;
}

struct Scored {
  double auc = 0.0;
  double threshold = 0.0;
  pipeline::Metrics test;
};

Scored score(const Desk& d, const core::DesnowModel& m, pipeline::ScoreSource source, const std::string& shift_name) {
  const auto shift = pipeline::parse_shift(shift_name);
  const auto test = pooled(m, d.test, source, shift);
  Scored s;
  s.auc = pipeline::roc_auc(test);
  s.threshold = pipeline::select_threshold_on(m, d.val, 100.0, source, shift).threshold;
  s.test = pipeline::metrics_from(pipeline::confusion_at(test, s.threshold));
  return s;
}

// Clean pixels at a depth discontinuity of the snow-free scan: their context
// mixes a foreground and a background surface.
std::vector<std::uint8_t> boundary_mask(const RangeImage& clean, const LabelMap& truth) {
  std::vector<std::uint8_t> out(clean.size(), 0);
  for (int v = 0; v < clean.rows; ++v)
    for (int u = 0; u < clean.cols; ++u) {
      const std::size_t i = clean.index(v, u);
      if (!clean.valid[i] || truth[i] != Label::Clean) continue;
      const int nb[4][2] = {{v - 1, u}, {v + 1, u}, {v, (u + 1) % clean.cols}, {v, (u + clean.cols - 1) % clean.cols}};
      for (const auto& [y, x] : nb) {
        if (y < 0 || y >= clean.rows) continue;
        const std::size_t j = clean.index(y, x);
        if (clean.valid[j] && std::abs(clean.range[j] - clean.range[i]) > std::max(1.0, 0.1 * clean.range[i])) out[i] = 1;
      }
    }
  return out;
}

// Mean best-hypothesis error on hidden boundary pixels, over several blanking draws.
double boundary_error(const Desk& d, const core::DesnowModel& m) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < d.test.size(); ++s) {
    const RangeImage& img = d.test[s].noisy;
    const auto edge = boundary_mask(d.test_clean[s], d.test[s].truth);
    for (std::uint64_t draw = 0; draw < 4; ++draw) {
      const core::BlankMask mask = core::sample_blank_mask(img, 0.5, mix_seed(900 + draw, s));
      const Tensor th = m.reconstruct(core::encode_input(core::blank(img, mask), 100.0));
      const Tensor err = core::min_hypothesis_error(th, core::encode_target({&img}, 100.0)).value;
      for (std::size_t i = 0; i < img.size(); ++i)
        if (mask.mask[i] && edge[i]) {
          acc += err[i] * 100.0;
          ++n;
        }
    }
  }
  return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

Desk make_desk(const fs::path& root, int steps) {
  Desk d;
  d.dir = root / "dataset";
  d.steps = steps;
  fs::remove_all(d.dir);
  d.manifest = pipeline::synthesize_dataset(d.dir, 200, 2026, SensorConfig::spinning32(512), synth::DatasetParams{});
  d.train = pipeline::load_split(d.dir, d.manifest, "train");
  d.val = pipeline::load_split(d.dir, d.manifest, "val");
  d.test = pipeline::load_split(d.dir, d.manifest, "test");
  for (const auto& s : d.test) d.test_clean.push_back(io::load_range_image(pipeline::clean_path(d.dir, s.name)).image);
  return d;
}

// ------------------------------------------------------ 6: end to end

Outcome end_to_end(Desk& d) {
  double lo = 1.0, hi = 0.0;
  for (const auto& s : d.manifest.scans) {
    lo = std::min(lo, s.noise_fraction);
    hi = std::max(hi, s.noise_fraction);
  }
  std::cout << "  dataset: " << d.manifest.scans.size() << " scans 32x512, noise fraction "
            << fmt("%.3f to %.3f", lo, hi) << ", " << d.train.size() << "/" << d.val.size() << "/" << d.test.size()
            << " train/val/test" << std::endl;

  const core::TrainConfig cfg = self_config(d, 1);
  const auto& k3 = trained(d, "k3_seed1", cfg, 0.0);
  const Scored ours = score(d, k3, pipeline::ScoreSource::Difficulty, "p20");

  pipeline::Confusion dror;
  for (const auto& s : d.test) dror += pipeline::confusion(pipeline::dror_labels(s.noisy, d.manifest.sensor), s.truth);
  const pipeline::Metrics dm = pipeline::metrics_from(dror);

  core::TrainConfig k1cfg = cfg;
  k1cfg.net.hypotheses = 1;
  const auto& k1 = trained(d, "k1_seed1", k1cfg, 0.0);
  const double c3 = boundary_error(d, k3), c1 = boundary_error(d, k1);

  Outcome o;
  o.require(cfg.steps <= 2000 && d.train_seconds["k3_seed1"] <= 1800.0,
            fmt("%d steps in %.0f s", cfg.steps, d.train_seconds["k3_seed1"]));
  o.require(ours.auc > 0.90, fmt("(a) test AUC %.4f", ours.auc));
  o.require(ours.test.iou > dm.iou, fmt("(b) test IoU %.4f (P %.3f R %.3f) vs DROR %.4f (P %.3f R %.3f)", ours.test.iou,
                                        ours.test.precision, ours.test.recall, dm.iou, dm.precision, dm.recall));
  o.require(c3 <= c1, fmt("(c) boundary error K=3 %.4f m vs K=1 %.4f m", c3, c1));
  return o;
}

// ---------------------------------------------------------- 7: ablations

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

Outcome ablations(Desk& d) {
  Outcome o;
  const auto blank_aucs = [&](std::uint64_t seed) {
    core::TrainConfig a = self_config(d, seed), b = a;
    b.blank_ratio = 0.1;
    const double half = score(d, trained(d, fmt("k3_seed%d", static_cast<int>(seed)), a, 0.0),
                              pipeline::ScoreSource::Difficulty, "p20").auc;
    const double tenth = score(d, trained(d, fmt("blank01_seed%d", static_cast<int>(seed)), b, 0.0),
                               pipeline::ScoreSource::Difficulty, "p20").auc;
    return std::make_pair(half, tenth);
  };
  const auto shift_ious = [&](std::uint64_t seed) {
    const auto& m = trained(d, fmt("k3_seed%d", static_cast<int>(seed)), self_config(d, seed), 0.0);
    return std::make_pair(score(d, m, pipeline::ScoreSource::Difficulty, "p20").test.iou,
                          score(d, m, pipeline::ScoreSource::Difficulty, "min").test.iou);
  };
  const auto ordering = [&](const std::string& what, const auto& measure) {
    auto [a, b] = measure(1);
    if (a >= b) {
      o.require(true, what + fmt(" %.4f >= %.4f (seed 1)", a, b));
      return;
    }
    std::vector<double> as{a}, bs{b};
    for (std::uint64_t seed : {2u, 3u}) {
      const auto [x, y] = measure(seed);
      as.push_back(x);
      bs.push_back(y);
    }
    o.require(median3(as) >= median3(bs), what + fmt(" seed 1 %.4f < %.4f; median of 3 seeds %.4f vs %.4f", a, b,
                                                     median3(as), median3(bs)));
  };
  ordering("blank 0.5 vs 0.1 test AUC", blank_aucs);
  ordering("p20 vs min shift test IoU", shift_ious);
  return o;
}

// ------------------------------------------------------- 10: semi-supervised

Outcome semi_supervised(Desk& d) {
  const auto run = [&](core::Schedule schedule, const std::string& key) {
    core::TrainConfig cfg = self_config(d, 1);
    cfg.mode = core::TrainMode::Semi;
    cfg.net.classifier = true;
    cfg.schedule = schedule;
    return score(d, trained(d, key, cfg, 0.10), pipeline::ScoreSource::Classifier, "none").test.iou;
  };
  const double base = run(core::Schedule::SupervisedOnly, "semi_supervised_only");
  Outcome o;
  o.require(true, fmt("supervised-only IoU %.4f", base));
  for (const auto& [s, name] : {std::pair{core::Schedule::Ramp, "ramp"}, std::pair{core::Schedule::Pretrain, "pretrain"},
                                std::pair{core::Schedule::Smooth, "smooth"}}) {
    const double iou = run(s, std::string("semi_") + name);
    o.require(iou >= base, fmt("%s %.4f", name, iou));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  util::tune_allocator();
  CLI::App app{"desnow acceptance run"};
  std::string workdir = (fs::temp_directory_path() / "desnow_acceptance").string();
  int steps = 1500;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory")->capture_default_str();
  app.add_option("--steps", steps, "training steps of every desk-scale model")->capture_default_str();
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  std::optional<Desk> desk;
  const auto desk_ref = [&]() -> Desk& {
    if (!desk) desk = make_desk(workdir, steps);
    return *desk;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"loss arithmetic", loss_arithmetic},
      {"winner-takes-all routing", winner_takes_all},
      {"synthesis oracle", synthesis_oracle},
      {"filter fidelity", filter_fidelity},
      {"end-to-end desk-scale run", [&] { return end_to_end(desk_ref()); }},
      {"ablation orderings", [&] { return ablations(desk_ref()); }},
      {"post-processing properties", postprocessing},
      {"determinism", [&] { return determinism(workdir); }},
      {"semi-supervised schedules", [&] { return semi_supervised(desk_ref()); }},
  };
  // Cheap criteria first; the training-heavy ones share models.
  const int order[] = {1, 2, 3, 4, 5, 8, 9, 6, 7, 10};
  std::map<int, std::string> lines;
  bool all = true;
  for (int n : order) {
    if (!wanted(n)) continue;
    const auto& [name, fn] = criteria[static_cast<std::size_t>(n - 1)];
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    lines[n] = fmt("%s criterion %d (%s): %s [%.0f s]", o.pass ? "PASS" : "FAIL", n, name.c_str(), o.detail.c_str(),
                   seconds_since(t0));
    std::cout << lines[n] << std::endl;
  }
  std::cout << "\nsummary\n";
  for (const auto& [n, line] : lines) std::cout << line << '\n';
  return all ? 0 : 1;
}
