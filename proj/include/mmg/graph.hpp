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

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmg {

struct NodeId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

enum class NodeKind : std::uint8_t { kImage = 0, kTag = 1 };
enum class EdgeKind : std::uint8_t { kImageImage = 0, kImageTag = 1 };

std::string_view to_string(NodeKind kind);

struct Neighbor {
  NodeId id;
  EdgeKind kind;

  friend constexpr bool operator==(Neighbor, Neighbor) = default;
};

struct Edge {
  NodeId u;  // u < v
  NodeId v;
  EdgeKind kind;

  friend constexpr bool operator==(Edge, Edge) = default;
};

// Image/tag graph with one feature vector per node. Append-only until
// freeze(); afterwards every accessor is safe to call concurrently.
class MultiModalGraph {
 public:
  explicit MultiModalGraph(std::uint32_t d_in = 512);

  NodeId add_node(std::string key, NodeKind kind, std::span<const float> feature);
  void add_edge(NodeId u, NodeId v, EdgeKind kind);
  void freeze() { frozen_ = true; }

  bool frozen() const { return frozen_; }
  std::uint32_t d_in() const { return d_in_; }
  std::size_t node_count() const { return kinds_.size(); }
  std::size_t edge_count() const { return edge_count_; }

  bool contains(NodeId v) const { return v.value < kinds_.size(); }
  NodeKind kind(NodeId v) const;
  const std::string& key(NodeId v) const;
  std::optional<NodeId> find(std::string_view key) const;
  std::span<const float> feature(NodeId v) const;
  const std::vector<float>& feature_data() const { return features_; }

  // Sorted ascending by id.
  std::span<const Neighbor> adjacency(NodeId v) const;
  std::vector<NodeId> neighbors(NodeId v, std::optional<EdgeKind> filter = std::nullopt) const;
  std::size_t degree(NodeId v) const { return adjacency(v).size(); }

  // Every undirected edge once, as (u < v), ordered by (u, v).
  std::vector<Edge> edges() const;

  friend bool operator==(const MultiModalGraph& a, const MultiModalGraph& b);

 private:
  void check_node(NodeId v) const;
  void check_mutable() const;

  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::uint32_t d_in_;
  bool frozen_ = false;
  std::size_t edge_count_ = 0;
  std::vector<NodeKind> kinds_;
  std::vector<std::string> keys_;
  std::vector<float> features_;  // node_count x d_in, row-major
  std::vector<std::vector<Neighbor>> adjacency_;
  std::unordered_map<std::string, NodeId, StringHash, std::equal_to<>> by_key_;
};

}  // namespace mmg

template <>
struct std::hash<mmg::NodeId> {
  std::size_t operator()(mmg::NodeId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
