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

#include "mmg/sim_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmg/binary_io.hpp"
#include "mmg/error.hpp"

namespace mmg {
namespace {

constexpr std::string_view kEmbeddingMagic = "MMGE";
constexpr std::uint32_t kEmbeddingVersion = 1;

}  // namespace

std::optional<std::size_t> EmbeddingTable::find(NodeId id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.magic(kEmbeddingMagic);
  w.u32(kEmbeddingVersion);
  w.u64(table.size());
  w.u32(table.dim);
  for (std::size_t i = 0; i < table.size(); ++i) {
    w.u64(table.ids[i].value);
    w.u8(static_cast<std::uint8_t>(table.kinds[i]));
    w.f32s(table.row(i));
  }
  w.finish_to_file(path);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_header(kEmbeddingMagic, kEmbeddingVersion);
  EmbeddingTable t;
  const std::uint64_t rows = r.u64();
  t.dim = r.u32();
  if (t.dim == 0) throw Error(ErrorCode::kParseError, "embedding dim is zero");
  if (rows > r.remaining() / (9 + 4ull * t.dim)) {
    throw Error(ErrorCode::kParseError, "row count exceeds file size");
  }
  t.ids.resize(rows);
  t.kinds.resize(rows);
  t.values.resize(rows * t.dim);
  for (std::uint64_t i = 0; i < rows; ++i) {
    t.ids[i] = NodeId{r.u64()};
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw Error(ErrorCode::kParseError, "bad node kind");
    t.kinds[i] = static_cast<NodeKind>(kind);
    r.f32s(std::span(t.values).subspan(i * t.dim, t.dim));
    if (i > 0 && !(t.ids[i - 1] < t.ids[i])) {
      throw Error(ErrorCode::kParseError, "embedding rows not sorted by node id");
    }
  }
  if (!r.at_end()) throw Error(ErrorCode::kParseError, "trailing bytes in embedding table");
  return t;
}

EmbeddingIndex EmbeddingIndex::build(const EmbeddingTable& table) {
  if (table.size() == 0) throw Error(ErrorCode::kEmptyTable, "no embeddings to index");
  EmbeddingIndex idx;
  idx.dim_ = table.dim;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    double n2 = 0.0;
    for (float x : row) n2 += double{x} * double{x};
    const double n = std::sqrt(n2);
    if (!(n > 0.0) || !std::isfinite(n)) {
      ++idx.zero_rows_skipped_;
      continue;
    }
    const std::size_t at = idx.ids_.size();
    idx.ids_.push_back(table.ids[i]);
    idx.kinds_.push_back(table.kinds[i]);
    for (float x : row) idx.values_.push_back(static_cast<float>(x / n));
    (table.kinds[i] == NodeKind::kImage ? idx.image_rows_ : idx.tag_rows_).push_back(at);
  }
  return idx;
}

std::vector<ScoredNode> EmbeddingIndex::top_k(std::span<const float> query, std::size_t k,
                                              std::optional<NodeKind> kind_filter,
                                              std::span<const NodeId> exclude) const {
  if (k == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");
  if (query.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has " + std::to_string(query.size()) + " entries, index has " +
                    std::to_string(dim_));
  }
  double n2 = 0.0;
  for (float x : query) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, "query vector");
    n2 += double{x} * double{x};
  }
  if (!(n2 > 0.0)) throw Error(ErrorCode::kZeroQuery, "query vector is zero");
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<double> q(dim_);
  for (std::size_t d = 0; d < dim_; ++d) q[d] = query[d] * inv;

  std::vector<std::size_t> all;
  const std::vector<std::size_t>* pool = nullptr;
  if (kind_filter == NodeKind::kImage) {
    pool = &image_rows_;
  } else if (kind_filter == NodeKind::kTag) {
    pool = &tag_rows_;
  } else {
    all.resize(ids_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    pool = &all;
  }

  std::vector<ScoredNode> scored;
  scored.reserve(pool->size());
  for (std::size_t row : *pool) {
    if (std::binary_search(exclude.begin(), exclude.end(), ids_[row])) continue;
    const float* v = values_.data() + row * dim_;
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) s += double{v[d]} * q[d];
    scored.push_back({ids_[row], std::clamp(s, -1.0, 1.0)});
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const ScoredNode& a, const ScoredNode& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.id < b.id;
                    });
  scored.resize(take);
  return scored;
}

}  // namespace mmg
