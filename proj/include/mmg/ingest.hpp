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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmg/graph.hpp"

namespace mmg {

struct BuildConfig {
  std::uint32_t k_neighbors = 5;
  float similarity_threshold = 0.65f;
  std::uint32_t d_in = 512;
  std::uint64_t rng_seed = 0;
  float tag_init_scale = 0.1f;

  void validate() const;
};

struct ImageRecord {
  std::string key;
  std::vector<float> init_feature;
  // Used only for kNN construction and query attachment. Empty means "same as
  // init_feature".
  std::vector<float> sim_feature;
  std::vector<std::string> tags;

  std::span<const float> similarity_vector() const {
    return sim_feature.empty() ? std::span<const float>(init_feature)
                               : std::span<const float>(sim_feature);
  }
};

// Trim, lowercase (ASCII), collapse internal whitespace runs to one space.
std::string normalize_tag(std::string_view raw);

// Graph key under which a normalized tag is stored.
std::string tag_node_key(std::string_view normalized_tag);

std::vector<ImageRecord> read_images_jsonl(const std::filesystem::path& path);
ImageRecord parse_image_record(std::string_view json_line);

// Undirected union of each image's top-k most cosine-similar images above the
// threshold. Pairs are (record index i, record index j) with i < j, sorted.
std::vector<std::pair<std::size_t, std::size_t>> knn_pairs(const std::vector<ImageRecord>& records,
                                                           const BuildConfig& cfg);

// Same selection as knn_pairs, reported by key.
std::vector<std::pair<std::string, std::string>> build_knn_edges(
    const std::vector<ImageRecord>& records, const BuildConfig& cfg);

// Image nodes in record order, then one tag node per distinct normalized tag
// in lexicographic order. The result is frozen.
MultiModalGraph build_graph(const std::vector<ImageRecord>& records, const BuildConfig& cfg);

void save_graph(const MultiModalGraph& g, const std::filesystem::path& path);
MultiModalGraph load_graph(const std::filesystem::path& path);

}  // namespace mmg
