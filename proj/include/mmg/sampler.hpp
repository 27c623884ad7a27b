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
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mmg/graph.hpp"

namespace mmg {

using Rng = std::mt19937_64;

// splitmix64 finalizer over (seed, stream); used for every derived seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct SamplerConfig {
  std::uint32_t walks_per_node = 50;
  std::uint32_t walk_length = 5;
  std::vector<std::uint32_t> fanouts = {25, 10};
  std::uint32_t max_degree = 100;
  std::uint32_t negatives = 20;  // Q
  double neg_exponent = 0.75;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct PositivePair {
  NodeId u;  // walk start
  NodeId v;  // co-visited node

  friend constexpr bool operator==(PositivePair, PositivePair) = default;
};

// Plain neighbor lists indexed by NodeId, sorted ascending.
class AdjacencyView {
 public:
  AdjacencyView() = default;
  explicit AdjacencyView(std::vector<std::vector<NodeId>> lists) : lists_(std::move(lists)) {}

  static AdjacencyView full(const MultiModalGraph& g);

  std::span<const NodeId> neighbors(NodeId v) const { return lists_.at(v.value); }
  std::size_t node_count() const { return lists_.size(); }

  friend bool operator==(const AdjacencyView&, const AdjacencyView&) = default;

 private:
  std::vector<std::vector<NodeId>> lists_;
};

// Per node, a seeded uniform subset (without replacement) of at most
// max_degree neighbors. Used for walks and training-time fanouts only.
AdjacencyView cap_adjacency(const MultiModalGraph& g, const SamplerConfig& cfg);

// walks_per_node uniform walks of walk_length steps from every node; each
// visited node other than the start yields a pair. Ordered by
// (start node, walk index, step).
std::vector<PositivePair> generate_pairs(const AdjacencyView& adj, const SamplerConfig& cfg);
std::vector<PositivePair> generate_pairs(const MultiModalGraph& g, const SamplerConfig& cfg);

void write_pairs_jsonl(const MultiModalGraph& g, std::span<const PositivePair> pairs,
                       const std::filesystem::path& path);

inline constexpr NodeId kEmptySlot{std::numeric_limits<std::uint64_t>::max()};
inline constexpr NodeId kVirtualNode{std::numeric_limits<std::uint64_t>::max() - 1};

// Two-hop computation tree. hop1[hop1_offsets[r] .. hop1_offsets[r+1]) are the
// children of roots[r]; hop2 is laid out the same way per hop1 entry. Empty
// slots (kEmptySlot) stand for "no neighbors" and aggregate as zero.
struct LayeredSample {
  std::vector<NodeId> roots;
  std::vector<NodeId> hop1;
  std::vector<std::uint32_t> hop1_offsets{0};
  std::vector<NodeId> hop2;
  std::vector<std::uint32_t> hop2_offsets{0};
};

// Training-time sample: fanouts[0] children per root and fanouts[1] per hop-1
// slot, drawn uniformly with replacement.
LayeredSample sample_fanout(const AdjacencyView& adj, std::span<const NodeId> roots,
                            std::span<const std::uint32_t> fanouts, Rng& rng);

// Inference-time sample: all neighbors in ascending order, truncated at the
// fanout. A root equal to kVirtualNode takes `virtual_neighbors` as its list.
LayeredSample truncated_sample(const AdjacencyView& adj, std::span<const NodeId> roots,
                               std::span<const std::uint32_t> fanouts,
                               std::span<const NodeId> virtual_neighbors = {});

// Draws from P(v) proportional to degree(v)^exponent over all nodes.
class NegativeSampler {
 public:
  NegativeSampler(const MultiModalGraph& g, double exponent);

  NodeId draw(Rng& rng) const;
  std::vector<NodeId> draw(std::size_t count, Rng& rng) const;
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

std::vector<NodeId> sample_negatives(const MultiModalGraph& g, std::size_t count,
                                     const SamplerConfig& cfg);

}  // namespace mmg
