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

#include "mmg/query.hpp"

#include <algorithm>
#include <cmath>

#include "mmg/error.hpp"

namespace mmg {
namespace {

std::vector<float> normalized(std::span<const float> v, const std::string& what) {
  double n2 = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, what);
    n2 += double{x} * double{x};
  }
  if (!(n2 > 0.0)) throw Error(ErrorCode::kZeroVector, what + " has no direction");
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

void check_finite(std::span<const float> v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, what);
  }
}

}  // namespace

std::optional<Connectivity::Kind> parse_connectivity(std::string_view name) {
  if (name == "image_only") return Connectivity::Kind::kImageOnly;
  if (name == "tag_only") return Connectivity::Kind::kTagOnly;
  if (name == "both") return Connectivity::Kind::kBoth;
  return std::nullopt;
}

std::string_view to_string(Connectivity::Kind kind) {
  switch (kind) {
    case Connectivity::Kind::kImageOnly: return "image_only";
    case Connectivity::Kind::kTagOnly: return "tag_only";
    case Connectivity::Kind::kBoth: return "both";
  }
  return "image_only";
}

BlendWeights BlendWeights::from_visual(double w1) {
  if (!(w1 >= 0.0 && w1 <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "visual weight must lie in [0, 1]");
  }
  BlendWeights w;
  w.w1_ = w1;
  return w;
}

std::vector<float> blend(std::span<const float> e_visual, std::span<const float> e_concept,
                         const BlendWeights& w) {
  if (e_visual.size() != e_concept.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "blend inputs differ in width");
  }
  check_finite(e_visual, "visual embedding");
  check_finite(e_concept, "concept embedding");
  const double w1 = w.visual();
  const double w2 = w.conceptual();
  std::vector<float> out(e_visual.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((w1 * e_visual[i] + w2 * e_concept[i]) / 2.0);
  }
  return out;
}

SimFeatureStore SimFeatureStore::from_graph(const MultiModalGraph& g) {
  SimFeatureStore s;
  s.dim_ = g.d_in();
  for (std::uint64_t i = 0; i < g.node_count(); ++i) {
    const NodeId v{i};
    if (g.kind(v) != NodeKind::kImage) continue;
    s.ids_.push_back(v);
    const auto n = normalized(g.feature(v), g.key(v));
    s.values_.insert(s.values_.end(), n.begin(), n.end());
  }
  return s;
}

SimFeatureStore SimFeatureStore::from_records(const MultiModalGraph& g,
                                              const std::vector<ImageRecord>& records) {
  std::vector<std::pair<NodeId, const ImageRecord*>> rows;
  for (const auto& r : records) {
    const auto id = g.find(r.key);
    if (!id || g.kind(*id) != NodeKind::kImage) {
      throw Error(ErrorCode::kUnknownNode, "record " + r.key + " is not an image in the graph");
    }
    rows.emplace_back(*id, &r);
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  SimFeatureStore s;
  if (rows.empty()) return from_graph(g);
  s.dim_ = static_cast<std::uint32_t>(rows.front().second->similarity_vector().size());
  for (const auto& [id, rec] : rows) {
    const auto v = rec->similarity_vector();
    if (v.size() != s.dim_) throw Error(ErrorCode::kDimensionMismatch, rec->key + ": sim_feature");
    s.ids_.push_back(id);
    const auto n = normalized(v, rec->key);
    s.values_.insert(s.values_.end(), n.begin(), n.end());
  }
  return s;
}

std::vector<NodeId> SimFeatureStore::nearest(std::span<const float> query, std::size_t k,
                                             std::optional<NodeId> exclude) const {
  if (query.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query similarity vector has " + std::to_string(query.size()) +
                    " entries, corpus has " + std::to_string(dim_));
  }
  const auto q = normalized(query, "query similarity vector");
  std::vector<std::pair<double, NodeId>> scored;
  scored.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (exclude && ids_[r] == *exclude) continue;
    const float* v = values_.data() + r * dim_;
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) s += double{v[d]} * double{q[d]};
    scored.emplace_back(s, ids_[r]);
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

std::span<const float> SimFeatureStore::vector_of(NodeId image) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), image);
  if (it == ids_.end() || *it != image) {
    throw Error(ErrorCode::kUnknownNode, "no similarity vector for node " +
                                             std::to_string(image.value));
  }
  return std::span(values_).subspan(static_cast<std::size_t>(it - ids_.begin()) * dim_, dim_);
}

QueryEngine::QueryEngine(MultiModalGraph graph, EncoderParams<float> params,
                         EncoderConfig encoder, EmbeddingTable table,
                         std::optional<SimFeatureStore> sim)
    : graph_(std::move(graph)),
      params_(std::move(params)),
      encoder_(std::move(encoder)),
      table_(std::move(table)),
      index_(EmbeddingIndex::build(table_)),
      sim_(sim ? std::move(*sim) : SimFeatureStore::from_graph(graph_)),
      adjacency_(AdjacencyView::full(graph_)) {
  encoder_.validate();
  params_.check_shapes(encoder_.dims);
  if (encoder_.dims.d_in != graph_.d_in()) {
    throw Error(ErrorCode::kShapeMismatch, "weights were trained for a different d_in");
  }
  if (table_.size() != graph_.node_count() || table_.dim != encoder_.dims.out_width()) {
    throw Error(ErrorCode::kShapeMismatch, "embedding table does not match graph and weights");
  }
}

std::vector<NodeId> QueryEngine::resolve_tags(const std::vector<std::string>& raw,
                                              std::vector<std::string>* dropped) const {
  std::vector<NodeId> out;
  for (const auto& t : raw) {
    std::optional<NodeId> id;
    try {
      id = graph_.find(tag_node_key(normalize_tag(t)));
    } catch (const Error&) {
      // blank tag
    }
    if (id && graph_.kind(*id) == NodeKind::kTag) {
      out.push_back(*id);
    } else if (dropped != nullptr) {
      dropped->push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

QueryView QueryEngine::attach_query(const QuerySpec& spec) const {
  using Kind = Connectivity::Kind;
  const Kind kind = spec.connectivity.kind;
  QueryView view;

  if (spec.init_feature) {
    if (spec.init_feature->size() != graph_.d_in()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "init_feature has " + std::to_string(spec.init_feature->size()) +
                      " entries, expected " + std::to_string(graph_.d_in()));
    }
    check_finite(*spec.init_feature, "init_feature");
    view.init_feature = *spec.init_feature;
  }

  if (kind == Kind::kTagOnly || kind == Kind::kBoth) {
    view.resolved_tags = resolve_tags(spec.tags, &view.dropped_tags);
    if (view.resolved_tags.empty()) {
      throw Error(ErrorCode::kNoResolvableTags, "none of the query tags is in the vocabulary");
    }
    view.neighbors = view.resolved_tags;
  }

  if (kind == Kind::kImageOnly || kind == Kind::kBoth) {
    if (!spec.init_feature) {
      throw Error(ErrorCode::kMissingImageFeature, "this connectivity needs an image feature");
    }
    if (spec.connectivity.k == 0) throw Error(ErrorCode::kInvalidConfig, "attachment k must be >= 1");
    const auto& sim = spec.sim_feature ? *spec.sim_feature : *spec.init_feature;
    const auto images = sim_.nearest(sim, spec.connectivity.k, spec.source_node);
    view.neighbors.insert(view.neighbors.end(), images.begin(), images.end());
    std::sort(view.neighbors.begin(), view.neighbors.end());
    view.neighbors.erase(std::unique(view.neighbors.begin(), view.neighbors.end()),
                         view.neighbors.end());
  }

  if (view.init_feature.empty()) {
    // Tags-only query: start from the mean of the tags' input features.
    std::vector<double> acc(graph_.d_in(), 0.0);
    for (NodeId t : view.resolved_tags) {
      const auto f = graph_.feature(t);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
    }
    view.init_feature.resize(acc.size());
    const auto n = static_cast<double>(view.resolved_tags.size());
    for (std::size_t i = 0; i < acc.size(); ++i) view.init_feature[i] = static_cast<float>(acc[i] / n);
  }
  return view;
}

std::vector<float> QueryEngine::embed_query(const QueryView& view) const {
  const NodeId root = kVirtualNode;
  const LayeredSample sample =
      truncated_sample(adjacency_, std::span(&root, 1), encoder_.fanouts, view.neighbors);
  const auto cache = forward(params_, encoder_, graph_, sample, Mode::kInfer, nullptr,
                             std::span<const float>(view.init_feature));
  const auto row = cache.z.row(0);
  return {row.data(), row.data() + row.size()};
}

std::vector<float> QueryEngine::concept_embedding(std::span<const NodeId> tags) const {
  if (tags.empty()) throw Error(ErrorCode::kNoResolvableTags, "no tags to average");
  std::vector<double> acc(table_.dim, 0.0);
  for (NodeId t : tags) {
    const auto row = table_.find(t);
    if (!row) throw Error(ErrorCode::kUnknownNode, "tag has no embedding");
    const auto e = table_.row(*row);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += e[i];
  }
  std::vector<float> out(acc.size());
  const auto n = static_cast<double>(tags.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
  return out;
}

std::vector<RetrievalHit> QueryEngine::to_hits(const std::vector<ScoredNode>& scored) const {
  std::vector<RetrievalHit> hits;
  hits.reserve(scored.size());
  for (const auto& s : scored) hits.push_back({s.id, graph_.key(s.id), s.score});
  return hits;
}

RetrievalResult QueryEngine::retrieve_images(const QuerySpec& spec) const {
  using Kind = Connectivity::Kind;
  if (spec.k_results == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");
  const bool has_image = spec.init_feature.has_value();
  const bool has_tags = !spec.tags.empty();
  if (!has_image && !has_tags) {
    if (spec.sim_feature) throw Error(ErrorCode::kMissingImageFeature, "query needs init_feature");
    throw Error(ErrorCode::kEmptyQuery, "query has neither an image nor tags");
  }

  RetrievalResult result;
  std::vector<NodeId> tags;
  if (has_tags) {
    tags = resolve_tags(spec.tags, &result.dropped_tags);
    if (tags.empty()) {
      throw Error(ErrorCode::kNoResolvableTags, "none of the query tags is in the vocabulary");
    }
  } else if (spec.connectivity.kind != Kind::kImageOnly) {
    throw Error(ErrorCode::kNoResolvableTags, "this connectivity needs at least one tag");
  }
  for (NodeId t : tags) result.resolved_tags.push_back(graph_.key(t).substr(4));

  const double w1 = !has_tags ? 1.0 : (!has_image ? 0.0 : spec.blend.visual());
  const BlendWeights w = BlendWeights::from_visual(w1);
  result.w_visual = w.visual();
  result.w_concept = w.conceptual();

  const std::size_t width = table_.dim;
  std::vector<float> e_visual(width, 0.0f);
  if (has_image) {
    QuerySpec visual = spec;
    visual.connectivity = Connectivity::image_only(spec.connectivity.k > 0 ? spec.connectivity.k : 5);
    e_visual = embed_query(attach_query(visual));
  }
  const std::vector<float> e_concept =
      has_tags ? concept_embedding(tags) : std::vector<float>(width, 0.0f);

  const auto e = blend(e_visual, e_concept, w);
  std::vector<NodeId> exclude;
  if (spec.exclude_attached && spec.source_node) exclude.push_back(*spec.source_node);
  result.hits = to_hits(index_.top_k(e, spec.k_results, NodeKind::kImage, exclude));
  return result;
}

RetrievalResult QueryEngine::retrieve_connected(const QuerySpec& spec) const {
  if (spec.k_results == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");
  const QueryView view = attach_query(spec);
  RetrievalResult result;
  result.dropped_tags = view.dropped_tags;
  for (NodeId t : view.resolved_tags) result.resolved_tags.push_back(graph_.key(t).substr(4));
  std::vector<NodeId> exclude;
  if (spec.exclude_attached && spec.source_node) exclude.push_back(*spec.source_node);
  result.hits = to_hits(index_.top_k(embed_query(view), spec.k_results, NodeKind::kImage, exclude));
  return result;
}

std::vector<RetrievalHit> QueryEngine::predict_tags(const QuerySpec& image_query,
                                                    std::size_t k) const {
  QuerySpec spec = image_query;
  spec.connectivity =
      Connectivity::image_only(image_query.connectivity.k > 0 ? image_query.connectivity.k : 5);
  auto hits = to_hits(index_.top_k(embed_query(attach_query(spec)), k, NodeKind::kTag));
  return hits;
}

QuerySpec QueryEngine::spec_for_image(NodeId image) const {
  if (graph_.kind(image) != NodeKind::kImage) {
    throw Error(ErrorCode::kKindMismatch, graph_.key(image) + " is not an image");
  }
  QuerySpec spec;
  const auto f = graph_.feature(image);
  spec.init_feature.emplace(f.begin(), f.end());
  const auto s = sim_.vector_of(image);
  spec.sim_feature.emplace(s.begin(), s.end());
  spec.source_node = image;
  return spec;
}

}  // namespace mmg
