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

#include "mmg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mmg/error.hpp"

namespace mmg {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SamplerConfig::validate() const {
  if (walks_per_node == 0 || walk_length == 0 || max_degree == 0) {
    throw Error(ErrorCode::kInvalidConfig, "walk counts and max_degree must be positive");
  }
  if (fanouts.size() != 2 || fanouts[0] == 0 || fanouts[1] == 0) {
    throw Error(ErrorCode::kInvalidConfig, "fanouts must be two positive integers");
  }
  if (!std::isfinite(neg_exponent)) throw Error(ErrorCode::kInvalidConfig, "neg_exponent");
}

AdjacencyView AdjacencyView::full(const MultiModalGraph& g) {
  std::vector<std::vector<NodeId>> lists(g.node_count());
  for (std::uint64_t i = 0; i < g.node_count(); ++i) lists[i] = g.neighbors(NodeId{i});
  return AdjacencyView(std::move(lists));
}

AdjacencyView cap_adjacency(const MultiModalGraph& g, const SamplerConfig& cfg) {
  std::vector<std::vector<NodeId>> lists(g.node_count());
  for (std::uint64_t i = 0; i < g.node_count(); ++i) {
    auto all = g.neighbors(NodeId{i});
    if (all.size() <= cfg.max_degree) {
      lists[i] = std::move(all);
      continue;
    }
    // std::sample keeps the relative order of the input, so the result stays sorted.
    Rng rng(derive_seed(cfg.rng_seed, i));
    lists[i].reserve(cfg.max_degree);
    std::sample(all.begin(), all.end(), std::back_inserter(lists[i]), cfg.max_degree, rng);
  }
  return AdjacencyView(std::move(lists));
}

std::vector<PositivePair> generate_pairs(const AdjacencyView& adj, const SamplerConfig& cfg) {
  cfg.validate();
  std::vector<PositivePair> pairs;
  for (std::uint64_t s = 0; s < adj.node_count(); ++s) {
    const NodeId start{s};
    if (adj.neighbors(start).empty()) continue;
    Rng rng(derive_seed(cfg.rng_seed, s));
    for (std::uint32_t w = 0; w < cfg.walks_per_node; ++w) {
      NodeId cur = start;
      for (std::uint32_t step = 0; step < cfg.walk_length; ++step) {
        const auto nbrs = adj.neighbors(cur);
        std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
        cur = nbrs[pick(rng)];
        if (cur != start) pairs.push_back({start, cur});
      }
    }
  }
  return pairs;
}

std::vector<PositivePair> generate_pairs(const MultiModalGraph& g, const SamplerConfig& cfg) {
  return generate_pairs(cap_adjacency(g, cfg), cfg);
}

void write_pairs_jsonl(const MultiModalGraph& g, std::span<const PositivePair> pairs,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["u"] = g.key(p.u);
    j["v"] = g.key(p.v);
    out << j.dump() << '\n';
  }
}

LayeredSample sample_fanout(const AdjacencyView& adj, std::span<const NodeId> roots,
                            std::span<const std::uint32_t> fanouts, Rng& rng) {
  if (fanouts.size() != 2) throw Error(ErrorCode::kInvalidConfig, "fanouts must have two entries");
  LayeredSample s;
  s.roots.assign(roots.begin(), roots.end());

  auto fill = [&](NodeId parent, std::uint32_t fanout, std::vector<NodeId>& out) {
    if (parent == kEmptySlot || adj.neighbors(parent).empty()) {
      out.insert(out.end(), fanout, kEmptySlot);
      return;
    }
    const auto nbrs = adj.neighbors(parent);
    std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
    for (std::uint32_t k = 0; k < fanout; ++k) out.push_back(nbrs[pick(rng)]);
  };

  s.hop1.reserve(roots.size() * fanouts[0]);
  for (NodeId r : roots) {
    fill(r, fanouts[0], s.hop1);
    s.hop1_offsets.push_back(static_cast<std::uint32_t>(s.hop1.size()));
  }
  s.hop2.reserve(s.hop1.size() * fanouts[1]);
  for (NodeId h : s.hop1) {
    fill(h, fanouts[1], s.hop2);
    s.hop2_offsets.push_back(static_cast<std::uint32_t>(s.hop2.size()));
  }
  return s;
}

LayeredSample truncated_sample(const AdjacencyView& adj, std::span<const NodeId> roots,
                               std::span<const std::uint32_t> fanouts,
                               std::span<const NodeId> virtual_neighbors) {
  if (fanouts.size() != 2) throw Error(ErrorCode::kInvalidConfig, "fanouts must have two entries");
  LayeredSample s;
  s.roots.assign(roots.begin(), roots.end());

  auto take = [](std::span<const NodeId> nbrs, std::uint32_t fanout, std::vector<NodeId>& out) {
    const std::size_t n = std::min<std::size_t>(nbrs.size(), fanout);
    out.insert(out.end(), nbrs.begin(), nbrs.begin() + static_cast<std::ptrdiff_t>(n));
  };

  for (NodeId r : roots) {
    take(r == kVirtualNode ? virtual_neighbors : adj.neighbors(r), fanouts[0], s.hop1);
    s.hop1_offsets.push_back(static_cast<std::uint32_t>(s.hop1.size()));
  }
  for (NodeId h : s.hop1) {
    take(adj.neighbors(h), fanouts[1], s.hop2);
    s.hop2_offsets.push_back(static_cast<std::uint32_t>(s.hop2.size()));
  }
  return s;
}

NegativeSampler::NegativeSampler(const MultiModalGraph& g, double exponent) {
  probabilities_.resize(g.node_count());
  double total = 0.0;
  for (std::uint64_t i = 0; i < g.node_count(); ++i) {
    const auto deg = static_cast<double>(g.degree(NodeId{i}));
    probabilities_[i] = deg > 0.0 ? std::pow(deg, exponent) : 0.0;
    total += probabilities_[i];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kDegenerateGraph, "no node has an edge");
  cumulative_.resize(probabilities_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    probabilities_[i] /= total;
    acc += probabilities_[i];
    cumulative_[i] = acc;
  }
}

NodeId NegativeSampler::draw(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, cumulative_.back());
  const double x = u(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  if (it == cumulative_.end()) --it;
  // upper_bound never lands on a zero-probability entry except via the clamp above.
  while (probabilities_[static_cast<std::size_t>(it - cumulative_.begin())] == 0.0) --it;
  return NodeId{static_cast<std::uint64_t>(it - cumulative_.begin())};
}

std::vector<NodeId> NegativeSampler::draw(std::size_t count, Rng& rng) const {
  std::vector<NodeId> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(rng));
  return out;
}

std::vector<NodeId> sample_negatives(const MultiModalGraph& g, std::size_t count,
                                     const SamplerConfig& cfg) {
  Rng rng(derive_seed(cfg.rng_seed, 0x6e6567ULL));
  return NegativeSampler(g, cfg.neg_exponent).draw(count, rng);
}

}  // namespace mmg
