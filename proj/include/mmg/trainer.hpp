/* Copyright 2026 The mmgraph Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "mmg/encoder.hpp"
#include "mmg/graph.hpp"
#include "mmg/sampler.hpp"
#include "mmg/sim_index.hpp"

namespace mmg {

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  std::uint32_t epochs = 50;
  std::uint32_t batch_size = 512;
  double learning_rate = 1e-5;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool regenerate_pairs = true;  // fresh walks every epoch
  SamplerConfig sampler;
  EncoderConfig encoder;  // dropout lives here; fanouts are taken from sampler
  std::uint64_t rng_seed = 0;

  void validate() const;
  // Encoder settings as used for training and stored in the checkpoint.
  EncoderConfig effective_encoder() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double wall_seconds = 0.0;
  std::filesystem::path checkpoint_path;
};

struct TrainResult {
  EncoderParams<float> params;
  EncoderConfig encoder;
  TrainReport report;
};

// Adam (or plain SGD) over the four weight matrices.
template <typename S>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const EncoderDims& dims)
      : cfg_(cfg), m_(EncoderParams<S>::zeros(dims)), v_(EncoderParams<S>::zeros(dims)) {}

  void step(EncoderParams<S>& params, const EncoderParams<S>& grad) {
    ++t_;
    auto p = params.matrices();
    auto g = grad.matrices();
    if (cfg_.optimizer == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < p.size(); ++i) *p[i] -= static_cast<S>(cfg_.learning_rate) * *g[i];
      return;
    }
    auto m = m_.matrices();
    auto v = v_.matrices();
    const S b1 = static_cast<S>(cfg_.adam_beta1);
    const S b2 = static_cast<S>(cfg_.adam_beta2);
    const S c1 = static_cast<S>(1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_)));
    const S lr = static_cast<S>(cfg_.learning_rate);
    const S eps = static_cast<S>(cfg_.adam_epsilon);
    for (std::size_t i = 0; i < p.size(); ++i) {
      *m[i] = b1 * *m[i] + (S(1) - b1) * *g[i];
      *v[i] = b2 * *v[i] + (S(1) - b2) * g[i]->cwiseProduct(*g[i]);
      p[i]->array() -= lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + eps);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  EncoderParams<S> m_, v_;
  std::uint64_t t_ = 0;
};

using EpochCallback = std::function<void(std::uint32_t epoch, double mean_loss)>;

TrainResult train(const MultiModalGraph& g, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Inference-mode embeddings for every node, using truncated neighborhoods
// over the full adjacency.
EmbeddingTable embed_all(const MultiModalGraph& g, const EncoderParams<float>& params,
                         const EncoderConfig& cfg);

void write_loss_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace mmg
