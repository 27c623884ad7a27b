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

#include "mmg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

namespace mmg {
namespace {

// Stream ids for derive_seed; keep stable, checkpoints depend on them.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kCapStream = 2;
constexpr std::uint64_t kWalkStream = 1000;
constexpr std::uint64_t kBatchStream = 1'000'000;

constexpr std::size_t kEmbedChunk = 256;

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) {
    throw Error(ErrorCode::kInvalidConfig, "epochs and batch_size must be positive");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "Adam hyperparameters out of range");
  }
  sampler.validate();
  effective_encoder().validate();
}

EncoderConfig TrainConfig::effective_encoder() const {
  EncoderConfig e = encoder;
  e.fanouts = sampler.fanouts;
  return e;
}

TrainResult train(const MultiModalGraph& g, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (g.node_count() < 2 || g.edge_count() < 1) {
    throw Error(ErrorCode::kDegenerateGraph, "training needs at least two nodes and one edge");
  }
  EncoderConfig enc = cfg.effective_encoder();
  if (enc.dims.d_in != g.d_in()) {
    throw Error(ErrorCode::kShapeMismatch, "encoder d_in " + std::to_string(enc.dims.d_in) +
                                               " != graph d_in " + std::to_string(g.d_in()));
  }

  SamplerConfig cap_cfg = cfg.sampler;
  cap_cfg.rng_seed = derive_seed(cfg.rng_seed, kCapStream);
  const AdjacencyView capped = cap_adjacency(g, cap_cfg);
  const NegativeSampler negatives(g, cfg.sampler.neg_exponent);

  TrainResult out;
  out.encoder = enc;
  out.params = init_params<float>(enc.dims, derive_seed(cfg.rng_seed, kInitStream));
  Optimizer<float> opt(cfg, enc.dims);

  std::vector<PositivePair> pairs;
  std::vector<NodeId> roots;
  ForwardCache<float> cache;
  Mat<float> dz;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch == 0 || cfg.regenerate_pairs) {
      SamplerConfig walk_cfg = cfg.sampler;
      walk_cfg.rng_seed = derive_seed(cfg.rng_seed, kWalkStream + epoch);
      pairs = generate_pairs(capped, walk_cfg);
      if (pairs.empty()) throw Error(ErrorCode::kDegenerateGraph, "random walks produced no pairs");
      if (pairs.size() < cfg.batch_size) {
        throw Error(ErrorCode::kInvalidConfig,
                    "batch_size " + std::to_string(cfg.batch_size) + " exceeds the " +
                        std::to_string(pairs.size()) + " positive pairs available");
      }
    }
    Rng rng(derive_seed(cfg.rng_seed, kBatchStream + epoch));
    std::shuffle(pairs.begin(), pairs.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(pairs.size(), begin + cfg.batch_size);
      const std::size_t batch = end - begin;
      roots.clear();
      for (std::size_t i = begin; i < end; ++i) roots.push_back(pairs[i].u);
      for (std::size_t i = begin; i < end; ++i) roots.push_back(pairs[i].v);
      for (std::uint32_t q = 0; q < cfg.sampler.negatives; ++q) roots.push_back(negatives.draw(rng));

      const LayeredSample sample = sample_fanout(capped, roots, enc.fanouts, rng);
      forward_into(cache, out.params, enc, g, sample, Mode::kTrain, &rng);
      const float loss = batch_loss(cache.z, batch, cfg.sampler.negatives, &dz);
      const auto grad = backward(out.params, enc, cache, dz);
      opt.step(out.params, grad);
      if (!out.params.all_finite()) {
        throw Error(ErrorCode::kNonFiniteActivation,
                    "parameters became non-finite in epoch " + std::to_string(epoch + 1));
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(batch);
    }
    const double mean = loss_sum / static_cast<double>(pairs.size());
    out.report.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }

  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

EmbeddingTable embed_all(const MultiModalGraph& g, const EncoderParams<float>& params,
                         const EncoderConfig& cfg) {
  cfg.validate();
  params.check_shapes(cfg.dims);
  const AdjacencyView adj = AdjacencyView::full(g);

  EmbeddingTable t;
  t.dim = cfg.dims.out_width();
  t.ids.reserve(g.node_count());
  t.kinds.reserve(g.node_count());
  t.values.reserve(g.node_count() * t.dim);

  std::vector<NodeId> roots;
  for (std::size_t begin = 0; begin < g.node_count(); begin += kEmbedChunk) {
    const std::size_t end = std::min(g.node_count(), begin + kEmbedChunk);
    roots.clear();
    for (std::size_t i = begin; i < end; ++i) roots.push_back(NodeId{i});
    const LayeredSample sample = truncated_sample(adj, roots, cfg.fanouts);
    const auto cache = forward(params, cfg, g, sample, Mode::kInfer);
    for (std::size_t i = 0; i < roots.size(); ++i) {
      t.ids.push_back(roots[i]);
      t.kinds.push_back(g.kind(roots[i]));
      const auto row = cache.z.row(static_cast<Eigen::Index>(i));
      t.values.insert(t.values.end(), row.data(), row.data() + row.size());
    }
  }
  return t;
}

void write_loss_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.9g", report.epoch_loss[e]);
    out << (e + 1) << ',' << buf << '\n';
  }
}

}  // namespace mmg
