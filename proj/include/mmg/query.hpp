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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmg/encoder.hpp"
#include "mmg/graph.hpp"
#include "mmg/ingest.hpp"
#include "mmg/sampler.hpp"
#include "mmg/sim_index.hpp"

namespace mmg {

struct Connectivity {
  enum class Kind { kImageOnly, kTagOnly, kBoth };
  Kind kind = Kind::kImageOnly;
  std::uint32_t k = 5;  // image neighbors for kImageOnly / kBoth

  static Connectivity image_only(std::uint32_t k = 5) { return {Kind::kImageOnly, k}; }
  static Connectivity tag_only() { return {Kind::kTagOnly, 0}; }
  static Connectivity both(std::uint32_t k = 5) { return {Kind::kBoth, k}; }
};

std::optional<Connectivity::Kind> parse_connectivity(std::string_view name);
std::string_view to_string(Connectivity::Kind kind);

// Visual weight W1 in [0, 1]; the conceptual weight is always 1 - W1.
class BlendWeights {
 public:
  BlendWeights() = default;
  static BlendWeights from_visual(double w1);

  double visual() const { return w1_; }
  double conceptual() const { return 1.0 - w1_; }

 private:
  double w1_ = 1.0;
};

struct QuerySpec {
  std::optional<std::vector<float>> init_feature;
  std::optional<std::vector<float>> sim_feature;  // defaults to init_feature
  std::vector<std::string> tags;
  Connectivity connectivity;
  BlendWeights blend;
  std::uint32_t k_results = 5;
  // Set when the query is an existing corpus image. That image is then left
  // out of both its own attachment and the results (see exclude_attached).
  std::optional<NodeId> source_node;
  bool exclude_attached = true;

  bool has_image() const { return init_feature.has_value() || sim_feature.has_value(); }
};

// A query node that exists only for the duration of one request.
struct QueryView {
  std::vector<NodeId> neighbors;  // sorted ascending
  std::vector<float> init_feature;
  std::vector<NodeId> resolved_tags;
  std::vector<std::string> dropped_tags;
};

struct RetrievalHit {
  NodeId id;
  std::string key;
  double score;
};

struct RetrievalResult {
  std::vector<RetrievalHit> hits;
  double w_visual = 1.0;
  double w_concept = 0.0;
  std::vector<std::string> resolved_tags;  // normalized
  std::vector<std::string> dropped_tags;   // as given
};

// Normalized similarity vectors of the corpus images, used to attach query
// images by cosine. Built from the ingest records when available, otherwise
// from the graph's own image features.
class SimFeatureStore {
 public:
  static SimFeatureStore from_graph(const MultiModalGraph& g);
  static SimFeatureStore from_records(const MultiModalGraph& g,
                                      const std::vector<ImageRecord>& records);

  std::uint32_t dim() const { return dim_; }
  // Up to k images by descending cosine, ties by NodeId.
  std::vector<NodeId> nearest(std::span<const float> query, std::size_t k,
                              std::optional<NodeId> exclude = std::nullopt) const;
  std::span<const float> vector_of(NodeId image) const;

 private:
  std::uint32_t dim_ = 0;
  std::vector<NodeId> ids_;
  std::vector<float> values_;
};

// E = (W1 * E_i + W2 * E_t) / 2, evaluated literally and not renormalized.
std::vector<float> blend(std::span<const float> e_visual, std::span<const float> e_concept,
                         const BlendWeights& w);

// Owns one immutable (graph, weights, embeddings) bundle and answers queries
// against it. All methods are const and safe to call concurrently.
class QueryEngine {
 public:
  QueryEngine(MultiModalGraph graph, EncoderParams<float> params, EncoderConfig encoder,
              EmbeddingTable table, std::optional<SimFeatureStore> sim = std::nullopt);

  const MultiModalGraph& graph() const { return graph_; }
  const EmbeddingTable& table() const { return table_; }
  const EmbeddingIndex& index() const { return index_; }
  const EncoderConfig& encoder() const { return encoder_; }
  const SimFeatureStore& sim_store() const { return sim_; }

  // Resolves raw tag strings against the tag vocabulary; unknown or blank
  // tags are reported in `dropped`.
  std::vector<NodeId> resolve_tags(const std::vector<std::string>& raw,
                                   std::vector<std::string>* dropped) const;

  QueryView attach_query(const QuerySpec& spec) const;
  std::vector<float> embed_query(const QueryView& view) const;
  // Mean of the trained embeddings of the given tag nodes.
  std::vector<float> concept_embedding(std::span<const NodeId> tags) const;

  RetrievalResult retrieve_images(const QuerySpec& spec) const;
  // Embeds the query under spec.connectivity and ranks images by that single
  // embedding (no blending).
  RetrievalResult retrieve_connected(const QuerySpec& spec) const;
  std::vector<RetrievalHit> predict_tags(const QuerySpec& image_query, std::size_t k) const;

  // Corpus image as a query: its own features, excluded from attachment and results.
  QuerySpec spec_for_image(NodeId image) const;

 private:
  std::vector<RetrievalHit> to_hits(const std::vector<ScoredNode>& scored) const;

  MultiModalGraph graph_;
  EncoderParams<float> params_;
  EncoderConfig encoder_;
  EmbeddingTable table_;
  EmbeddingIndex index_;
  SimFeatureStore sim_;
  AdjacencyView adjacency_;
};

}  // namespace mmg
