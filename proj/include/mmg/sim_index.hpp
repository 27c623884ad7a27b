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
#include <optional>
#include <span>
#include <vector>

#include "mmg/graph.hpp"

namespace mmg {

// One embedding row per node, rows sorted by NodeId.
struct EmbeddingTable {
  std::uint32_t dim = 0;
  std::vector<NodeId> ids;
  std::vector<NodeKind> kinds;
  std::vector<float> values;  // ids.size() x dim, row-major

  std::size_t size() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span(values).subspan(i * dim, dim);
  }
  // Row index of `id`, if present.
  std::optional<std::size_t> find(NodeId id) const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

struct ScoredNode {
  NodeId id;
  double score;
};

// Exact cosine top-k by full scan. Immutable once built.
class EmbeddingIndex {
 public:
  static EmbeddingIndex build(const EmbeddingTable& table);

  // Highest cosine scores among rows passing `kind_filter` and not in
  // `exclude` (sorted ascending), ordered by (score desc, NodeId asc). The
  // query is normalized internally, so any positive rescaling of it returns
  // the same list.
  std::vector<ScoredNode> top_k(std::span<const float> query, std::size_t k,
                                std::optional<NodeKind> kind_filter = std::nullopt,
                                std::span<const NodeId> exclude = {}) const;

  std::size_t rows() const { return ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::size_t zero_rows_skipped() const { return zero_rows_skipped_; }
  const std::vector<NodeId>& ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return std::span(values_).subspan(i * dim_, dim_);
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<NodeId> ids_;
  std::vector<NodeKind> kinds_;
  std::vector<float> values_;
  std::vector<std::size_t> image_rows_, tag_rows_;
  std::size_t zero_rows_skipped_ = 0;
};

}  // namespace mmg
