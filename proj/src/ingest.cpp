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

#include "mmg/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "mmg/binary_io.hpp"
#include "mmg/error.hpp"

namespace mmg {
namespace {

constexpr std::string_view kGraphMagic = "MMGF";
constexpr std::uint32_t kGraphVersion = 1;

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double{x} * double{x};
  return std::sqrt(s);
}

std::vector<float> float_array(const nlohmann::json& j, std::string_view field) {
  if (!j.is_array()) {
    throw Error(ErrorCode::kParseError, std::string(field) + " must be an array of numbers");
  }
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) {
      throw Error(ErrorCode::kParseError, std::string(field) + " must be an array of numbers");
    }
    out.push_back(x.get<float>());
  }
  return out;
}

}  // namespace

void BuildConfig::validate() const {
  if (k_neighbors < 1) throw Error(ErrorCode::kInvalidConfig, "k_neighbors must be >= 1");
  if (d_in < 1) throw Error(ErrorCode::kInvalidConfig, "d_in must be >= 1");
  if (!(similarity_threshold >= -1.0f && similarity_threshold <= 1.0f)) {
    throw Error(ErrorCode::kInvalidConfig, "similarity_threshold must lie in [-1, 1]");
  }
  if (!(tag_init_scale > 0.0f)) throw Error(ErrorCode::kInvalidConfig, "tag_init_scale must be > 0");
}

std::string normalize_tag(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  if (out.empty()) {
    throw Error(ErrorCode::kEmptyAfterNormalization, "'" + std::string(raw) + "'");
  }
  return out;
}

std::string tag_node_key(std::string_view normalized_tag) {
  return "tag:" + std::string(normalized_tag);
}

ImageRecord parse_image_record(std::string_view json_line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "record must be a JSON object");

  ImageRecord r;
  if (!j.contains("key") || !j["key"].is_string()) {
    throw Error(ErrorCode::kParseError, "record needs a string \"key\"");
  }
  r.key = j["key"].get<std::string>();
  if (r.key.empty()) throw Error(ErrorCode::kParseError, "empty key");
  if (!j.contains("init_feature")) {
    throw Error(ErrorCode::kParseError, r.key + ": missing init_feature");
  }
  r.init_feature = float_array(j["init_feature"], "init_feature");
  if (j.contains("sim_feature") && !j["sim_feature"].is_null()) {
    r.sim_feature = float_array(j["sim_feature"], "sim_feature");
  }
  if (j.contains("tags")) {
    if (!j["tags"].is_array()) throw Error(ErrorCode::kParseError, r.key + ": tags must be an array");
    for (const auto& t : j["tags"]) {
      if (!t.is_string()) throw Error(ErrorCode::kParseError, r.key + ": tags must be strings");
      r.tags.push_back(t.get<std::string>());
    }
  }
  return r;
}

std::vector<ImageRecord> read_images_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<ImageRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_image_record(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<std::pair<std::size_t, std::size_t>> knn_pairs(const std::vector<ImageRecord>& records,
                                                           const BuildConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw Error(ErrorCode::kEmptyCorpus, "no image records");

  const std::size_t n = records.size();
  const std::size_t dim = records.front().similarity_vector().size();
  std::vector<double> inv_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = records[i].similarity_vector();
    if (v.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  records[i].key + ": similarity vector has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(dim));
    }
    const double nv = norm_of(v);
    if (!(nv > 0.0) || !std::isfinite(nv)) {
      throw Error(ErrorCode::kZeroVector, records[i].key + ": similarity vector has no direction");
    }
    inv_norm[i] = 1.0 / nv;
  }

  std::set<std::pair<std::size_t, std::size_t>> selected;
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = records[i].similarity_vector();
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto b = records[j].similarity_vector();
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += double{a[d]} * double{b[d]};
      const double cosine = dot * inv_norm[i] * inv_norm[j];
      if (cosine >= cfg.similarity_threshold) candidates.emplace_back(cosine, j);
    }
    const std::size_t take = std::min<std::size_t>(cfg.k_neighbors, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(),
                      [&](const auto& x, const auto& y) {
                        if (x.first != y.first) return x.first > y.first;
                        return records[x.second].key < records[y.second].key;
                      });
    for (std::size_t c = 0; c < take; ++c) {
      const std::size_t j = candidates[c].second;
      selected.emplace(std::min(i, j), std::max(i, j));
    }
  }
  return {selected.begin(), selected.end()};
}

std::vector<std::pair<std::string, std::string>> build_knn_edges(
    const std::vector<ImageRecord>& records, const BuildConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [i, j] : knn_pairs(records, cfg)) {
    out.emplace_back(records[i].key, records[j].key);
  }
  return out;
}

MultiModalGraph build_graph(const std::vector<ImageRecord>& records, const BuildConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw Error(ErrorCode::kEmptyCorpus, "no image records");

  MultiModalGraph g(cfg.d_in);
  std::vector<std::vector<std::string>> normalized_tags(records.size());
  std::set<std::string> vocabulary;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ImageRecord& r = records[i];
    for (float x : r.sim_feature) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteFeature, r.key + ": sim_feature");
    }
    g.add_node(r.key, NodeKind::kImage, r.init_feature);

    auto& tags = normalized_tags[i];
    for (const auto& raw : r.tags) tags.push_back(normalize_tag(raw));
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    vocabulary.insert(tags.begin(), tags.end());
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<float> init(-cfg.tag_init_scale, cfg.tag_init_scale);
  std::map<std::string, NodeId, std::less<>> tag_ids;
  std::vector<float> feature(cfg.d_in);
  for (const auto& tag : vocabulary) {
    for (float& x : feature) x = init(rng);
    tag_ids.emplace(tag, g.add_node(tag_node_key(tag), NodeKind::kTag, feature));
  }

  // Image nodes were inserted first, so record index == NodeId.
  for (const auto& [i, j] : knn_pairs(records, cfg)) {
    g.add_edge(NodeId{i}, NodeId{j}, EdgeKind::kImageImage);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& tag : normalized_tags[i]) {
      g.add_edge(NodeId{i}, tag_ids.at(tag), EdgeKind::kImageTag);
    }
  }
  g.freeze();
  return g;
}

void save_graph(const MultiModalGraph& g, const std::filesystem::path& path) {
  if (!g.frozen()) throw Error(ErrorCode::kInvalidConfig, "only frozen graphs can be saved");
  io::ByteWriter w;
  w.magic(kGraphMagic);
  w.u32(kGraphVersion);
  w.u64(g.node_count());
  w.u32(g.d_in());
  for (std::uint64_t i = 0; i < g.node_count(); ++i) {
    const NodeId v{i};
    w.str(g.key(v));
    w.u8(static_cast<std::uint8_t>(g.kind(v)));
    w.f32s(g.feature(v));
  }
  const auto edges = g.edges();
  w.u64(edges.size());
  for (const Edge& e : edges) {
    w.u64(e.u.value);
    w.u64(e.v.value);
    w.u8(static_cast<std::uint8_t>(e.kind));
  }
  w.finish_to_file(path);
}

MultiModalGraph load_graph(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_header(kGraphMagic, kGraphVersion);
  const std::uint64_t node_count = r.u64();
  const std::uint32_t d_in = r.u32();
  if (d_in == 0) throw Error(ErrorCode::kParseError, "d_in is zero");

  MultiModalGraph g(d_in);
  std::vector<float> feature(d_in);
  for (std::uint64_t i = 0; i < node_count; ++i) {
    std::string key = r.str();
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw Error(ErrorCode::kParseError, "bad node kind");
    r.f32s(feature);
    g.add_node(std::move(key), static_cast<NodeKind>(kind), feature);
  }
  const std::uint64_t edge_count = r.u64();
  for (std::uint64_t e = 0; e < edge_count; ++e) {
    const NodeId u{r.u64()};
    const NodeId v{r.u64()};
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw Error(ErrorCode::kParseError, "bad edge kind");
    if (!(u < v)) throw Error(ErrorCode::kParseError, "edge endpoints out of order");
    g.add_edge(u, v, static_cast<EdgeKind>(kind));
  }
  if (!r.at_end()) throw Error(ErrorCode::kParseError, "trailing bytes after edge table");
  g.freeze();
  return g;
}

}  // namespace mmg
