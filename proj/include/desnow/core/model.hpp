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
 * \file model.hpp
 * \brief Reconstruction network, difficulty network and the optional
 *        noise-classification head.
 *
 * Both networks are residual stacks over a two-channel input (range / rho,
 * validity). The reconstructor sees a blanked scan and emits K range
 * hypotheses; the difficulty network sees the full scan and emits one
 * log-difficulty per pixel. The classifier head, when present, reuses the
 * difficulty network's encoder (stem plus the first `encoder_blocks` blocks).
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "desnow/geom.hpp"
#include "desnow/nn/layers.hpp"
#include "desnow/random.hpp"

namespace desnow::core {

struct NetConfig {
  int channels = 8;
  int blocks = 6;
  int encoder_blocks = 4;
  int kernel = 3;
  int hypotheses = 3;
  bool classifier = false;

  void validate() const {
    if (channels < 1 || blocks < 0 || kernel < 1 || kernel % 2 == 0)
      throw std::invalid_argument("NetConfig: invalid channel/block/kernel settings");
    if (encoder_blocks < 0 || encoder_blocks > blocks)
      throw std::invalid_argument("NetConfig: encoder_blocks must be within [0, blocks]");
    if (hypotheses < 1) throw std::invalid_argument("NetConfig: need at least one hypothesis");
  }
};

/// Stem convolution, residual blocks, 1x1 output convolution.
class Backbone {
 public:
  Backbone() = default;
  Backbone(int in_ch, int out_ch, const NetConfig& cfg, Rng& rng) : encoder_blocks_(cfg.encoder_blocks) {
    stem_ = nn::ConvLayer(in_ch, cfg.channels, cfg.kernel, rng);
    for (int b = 0; b < cfg.blocks; ++b) blocks_.emplace_back(cfg.channels, cfg.kernel, rng);
    head_ = nn::ConvLayer(cfg.channels, out_ch, 1, rng);
  }

  [[nodiscard]] nn::Tensor encode(const nn::Tensor& x) const {
    nn::Tensor h = nn::leaky_relu(stem_.forward(x), nn::kLeakySlope);
    for (int b = 0; b < encoder_blocks_; ++b) h = blocks_[static_cast<std::size_t>(b)].forward(h);
    return h;
  }

  [[nodiscard]] nn::Tensor decode(const nn::Tensor& features) const {
    nn::Tensor h = features;
    for (std::size_t b = static_cast<std::size_t>(encoder_blocks_); b < blocks_.size(); ++b) h = blocks_[b].forward(h);
    return head_.forward(h);
  }

  [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const { return decode(encode(x)); }

  void named(const std::string& prefix, std::vector<std::pair<std::string, nn::Tensor>>& out) const {
    out.emplace_back(prefix + "stem.weight", stem_.weight());
    out.emplace_back(prefix + "stem.bias", stem_.bias());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      std::vector<nn::Tensor> p;
      blocks_[b].collect(p);
      const std::string bp = prefix + "block" + std::to_string(b) + ".";
      out.emplace_back(bp + "conv1.weight", p[0]);
      out.emplace_back(bp + "conv1.bias", p[1]);
      out.emplace_back(bp + "conv2.weight", p[2]);
      out.emplace_back(bp + "conv2.bias", p[3]);
    }
    out.emplace_back(prefix + "head.weight", head_.weight());
    out.emplace_back(prefix + "head.bias", head_.bias());
  }

  /// Parameters of the stem and the encoder blocks only.
  void encoder_params(std::vector<nn::Tensor>& out) const {
    stem_.collect(out);
    for (int b = 0; b < encoder_blocks_; ++b) blocks_[static_cast<std::size_t>(b)].collect(out);
  }

 private:
  int encoder_blocks_ = 0;
  nn::ConvLayer stem_;
  std::vector<nn::ResidualBlock> blocks_;
  nn::ConvLayer head_;
};

/// Decoder-only stack producing two logits per pixel (Clean, Noise).
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(const NetConfig& cfg, Rng& rng) {
    for (int b = cfg.encoder_blocks; b < cfg.blocks; ++b) blocks_.emplace_back(cfg.channels, cfg.kernel, rng);
    head_ = nn::ConvLayer(cfg.channels, 2, 1, rng);
  }

  [[nodiscard]] nn::Tensor forward(const nn::Tensor& features) const {
    nn::Tensor h = features;
    for (const auto& b : blocks_) h = b.forward(h);
    return head_.forward(h);
  }

  void named(const std::string& prefix, std::vector<std::pair<std::string, nn::Tensor>>& out) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      std::vector<nn::Tensor> p;
      blocks_[b].collect(p);
      const std::string bp = prefix + "block" + std::to_string(b) + ".";
      out.emplace_back(bp + "conv1.weight", p[0]);
      out.emplace_back(bp + "conv1.bias", p[1]);
      out.emplace_back(bp + "conv2.weight", p[2]);
      out.emplace_back(bp + "conv2.bias", p[3]);
    }
    out.emplace_back(prefix + "head.weight", head_.weight());
    out.emplace_back(prefix + "head.bias", head_.bias());
  }

 private:
  std::vector<nn::ResidualBlock> blocks_;
  nn::ConvLayer head_;
};

/// Two-channel network input: range / rho and validity.
[[nodiscard]] inline nn::Tensor encode_input(const std::vector<const RangeImage*>& batch, double rho) {
  if (batch.empty()) throw std::invalid_argument("encode_input: empty batch");
  const int h = batch.front()->rows, w = batch.front()->cols;
  nn::Tensor x(nn::Shape{static_cast<int>(batch.size()), 2, h, w});
  auto v = x.values();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const RangeImage& img = *batch[b];
    if (img.rows != h || img.cols != w) throw std::invalid_argument("encode_input: mixed scan shapes in batch");
    for (std::size_t i = 0; i < plane; ++i) {
      v[(b * 2) * plane + i] = img.valid[i] ? img.range[i] / rho : 0.0;
      v[(b * 2 + 1) * plane + i] = img.valid[i] ? 1.0 : 0.0;
    }
  }
  return x;
}

[[nodiscard]] inline nn::Tensor encode_input(const RangeImage& img, double rho) { return encode_input({&img}, rho); }

/// Range / rho as an (n, 1, h, w) regression target.
[[nodiscard]] inline nn::Tensor encode_target(const std::vector<const RangeImage*>& batch, double rho) {
  const int h = batch.front()->rows, w = batch.front()->cols;
  nn::Tensor t(nn::Shape{static_cast<int>(batch.size()), 1, h, w});
  auto v = t.values();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < plane; ++i) v[b * plane + i] = batch[b]->valid[i] ? batch[b]->range[i] / rho : 0.0;
  return t;
}

/// The paired reconstruction / difficulty networks plus the optional classifier.
class DesnowModel {
 public:
  DesnowModel() = default;
  DesnowModel(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg.validate();
    Rng rng = make_rng(seed, 101);
    reconstructor_ = Backbone(2, cfg.hypotheses, cfg, rng);
    difficulty_ = Backbone(2, 1, cfg, rng);
    if (cfg.classifier) classifier_ = ClassifierHead(cfg, rng);
  }

  [[nodiscard]] const NetConfig& config() const { return cfg_; }

  /// Scan shape the model was trained on; inference rejects other shapes once set.
  void set_resolution(int rows, int cols) { resolution_ = std::make_pair(rows, cols); }
  [[nodiscard]] std::optional<std::pair<int, int>> resolution() const { return resolution_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// (n, K, h, w) hypotheses for a blanked input.
  [[nodiscard]] nn::Tensor reconstruct(const nn::Tensor& blanked_input) const { return reconstructor_.forward(blanked_input); }
  /// (n, 1, h, w) log-difficulty for an unblanked input.
  [[nodiscard]] nn::Tensor difficulty(const nn::Tensor& input) const { return difficulty_.forward(input); }
  /// (n, 2, h, w) logits from the shared difficulty encoder.
  [[nodiscard]] nn::Tensor classify(const nn::Tensor& input) const {
    if (!cfg_.classifier) throw std::logic_error("DesnowModel: no classifier head configured");
    return classifier_.forward(difficulty_.encode(input));
  }

  [[nodiscard]] std::vector<std::pair<std::string, nn::Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, nn::Tensor>> out;
    reconstructor_.named("reconstructor.", out);
    difficulty_.named("difficulty.", out);
    if (cfg_.classifier) classifier_.named("classifier.", out);
    return out;
  }

  [[nodiscard]] std::vector<nn::Tensor> parameters() const {
    std::vector<nn::Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
  }

  /// Deep copy: parameters are duplicated, not shared.
  [[nodiscard]] DesnowModel clone() const {
    DesnowModel m(cfg_, seed_);
    m.resolution_ = resolution_;
    auto dst = m.named_parameters();
    const auto src = named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto d = dst[i].second.values();
      const auto s = src[i].second.values();
      std::copy(s.begin(), s.end(), d.begin());
    }
    return m;
  }

  /// Order-sensitive FNV-1a hash over the raw parameter bytes.
  [[nodiscard]] std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : parameters())
      for (double v : p.values()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t k = 0; k < sizeof(double); ++k) {
          h ^= bytes[k];
          h *= 1099511628211ULL;
        }
      }
    return h;
  }

 private:
  NetConfig cfg_;
  std::uint64_t seed_ = 0;
  std::optional<std::pair<int, int>> resolution_;
  Backbone reconstructor_;
  Backbone difficulty_;
  ClassifierHead classifier_;
};

}  // namespace desnow::core
