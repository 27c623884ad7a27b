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

#include "mmg/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "mmg/error.hpp"

namespace mmg {

std::string_view to_string(NodeKind kind) {
  return kind == NodeKind::kImage ? "image" : "tag";
}

MultiModalGraph::MultiModalGraph(std::uint32_t d_in) : d_in_(d_in) {
  if (d_in == 0) throw Error(ErrorCode::kInvalidConfig, "d_in must be positive");
}

void MultiModalGraph::check_node(NodeId v) const {
  if (!contains(v)) throw Error(ErrorCode::kUnknownNode, "node " + std::to_string(v.value));
}

void MultiModalGraph::check_mutable() const {
  if (frozen_) throw Error(ErrorCode::kFrozenGraph, "graph is frozen");
}

NodeId MultiModalGraph::add_node(std::string key, NodeKind kind, std::span<const float> feature) {
  check_mutable();
  if (by_key_.contains(key)) throw Error(ErrorCode::kDuplicateKey, key);
  if (feature.size() != d_in_) {
    throw Error(ErrorCode::kDimensionMismatch,
                key + ": feature has " + std::to_string(feature.size()) + " entries, expected " +
                    std::to_string(d_in_));
  }
  if (!std::all_of(feature.begin(), feature.end(), [](float x) { return std::isfinite(x); })) {
    throw Error(ErrorCode::kNonFiniteFeature, key);
  }

  const NodeId id{kinds_.size()};
  kinds_.push_back(kind);
  features_.insert(features_.end(), feature.begin(), feature.end());
  adjacency_.emplace_back();
  by_key_.emplace(key, id);
  keys_.push_back(std::move(key));
  return id;
}

void MultiModalGraph::add_edge(NodeId u, NodeId v, EdgeKind kind) {
  check_mutable();
  check_node(u);
  check_node(v);
  if (u == v) throw Error(ErrorCode::kSelfLoop, keys_[u.value]);

  const NodeKind ku = kinds_[u.value];
  const NodeKind kv = kinds_[v.value];
  const bool ok = kind == EdgeKind::kImageImage
                      ? (ku == NodeKind::kImage && kv == NodeKind::kImage)
                      : (ku != kv);
  if (!ok) {
    throw Error(ErrorCode::kKindMismatch, keys_[u.value] + " -- " + keys_[v.value]);
  }

  auto by_id = [](const Neighbor& n, NodeId id) { return n.id < id; };
  auto& au = adjacency_[u.value];
  auto pos_u = std::lower_bound(au.begin(), au.end(), v, by_id);
  if (pos_u != au.end() && pos_u->id == v) {
    throw Error(ErrorCode::kDuplicateEdge, keys_[u.value] + " -- " + keys_[v.value]);
  }
  au.insert(pos_u, Neighbor{v, kind});

  auto& av = adjacency_[v.value];
  av.insert(std::lower_bound(av.begin(), av.end(), u, by_id), Neighbor{u, kind});
  ++edge_count_;
}

NodeKind MultiModalGraph::kind(NodeId v) const {
  check_node(v);
  return kinds_[v.value];
}

const std::string& MultiModalGraph::key(NodeId v) const {
  check_node(v);
  return keys_[v.value];
}

std::optional<NodeId> MultiModalGraph::find(std::string_view key) const {
  auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> MultiModalGraph::feature(NodeId v) const {
  check_node(v);
  return std::span(features_).subspan(v.value * d_in_, d_in_);
}

std::span<const Neighbor> MultiModalGraph::adjacency(NodeId v) const {
  check_node(v);
  return adjacency_[v.value];
}

std::vector<NodeId> MultiModalGraph::neighbors(NodeId v, std::optional<EdgeKind> filter) const {
  std::vector<NodeId> out;
  for (const Neighbor& n : adjacency(v)) {
    if (!filter || n.kind == *filter) out.push_back(n.id);
  }
  return out;
}

std::vector<Edge> MultiModalGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (std::uint64_t u = 0; u < adjacency_.size(); ++u) {
    for (const Neighbor& n : adjacency_[u]) {
      if (u < n.id.value) out.push_back(Edge{NodeId{u}, n.id, n.kind});
    }
  }
  return out;
}

bool operator==(const MultiModalGraph& a, const MultiModalGraph& b) {
  return a.d_in_ == b.d_in_ && a.kinds_ == b.kinds_ && a.keys_ == b.keys_ &&
         a.adjacency_ == b.adjacency_ &&
         std::equal(a.features_.begin(), a.features_.end(), b.features_.begin(),
                    b.features_.end(), [](float x, float y) {
                      return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
                    });
}

}  // namespace mmg
