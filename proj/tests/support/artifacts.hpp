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

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mmg/service.hpp"
#include "support/synthetic.hpp"

namespace mmg::testing {

inline void write_images_jsonl(const std::vector<ImageRecord>& records,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["key"] = r.key;
    j["init_feature"] = r.init_feature;
    if (!r.sim_feature.empty()) j["sim_feature"] = r.sim_feature;
    j["tags"] = r.tags;
    out << j.dump() << '\n';
  }
}

// Writes the artifact directory layout the service and CLI expect.
inline ArtifactPaths write_artifacts(const TrainedCorpus& tc, const std::filesystem::path& dir) {
  const ArtifactPaths p = ArtifactPaths::in(dir);
  save_graph(tc.engine->graph(), p.graph);
  save_checkpoint(tc.trained.params, tc.trained.encoder, p.weights);
  save_embeddings(tc.engine->table(), p.embeddings);
  write_images_jsonl(tc.data.corpus, p.images);
  return p;
}

}  // namespace mmg::testing
