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
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "mmg/query.hpp"

namespace httplib {
class Server;
}

namespace mmg {

struct HttpReply {
  int status = 200;
  std::string body;
};

// Artifact directory layout.
struct ArtifactPaths {
  std::filesystem::path graph, weights, embeddings, images;  // images is optional

  static ArtifactPaths in(const std::filesystem::path& dir);
};

// Loads graph.mmgf, weights.mmgw, embeddings.mmge and, when present,
// images.jsonl (for the image similarity vectors).
std::shared_ptr<const QueryEngine> load_snapshot(const ArtifactPaths& paths);

// HTTP handlers over an atomically replaceable snapshot. Every handler is a
// plain function of its inputs so it can be exercised without a socket.
class RetrievalService {
 public:
  void install(std::shared_ptr<const QueryEngine> snapshot);
  std::shared_ptr<const QueryEngine> snapshot() const;

  HttpReply search(std::string_view json_body) const;
  HttpReply predict_tags(const std::optional<std::string>& image_key,
                         const std::optional<std::string>& k) const;
  HttpReply get_node(std::string_view key) const;
  HttpReply health() const;

  // Registers all routes. /ui/ serves ui_dir when it exists, otherwise a
  // placeholder page.
  void mount(httplib::Server& server, const std::optional<std::filesystem::path>& ui_dir) const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const QueryEngine> snapshot_;
};

struct ServeOptions {
  std::filesystem::path artifact_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> ui_dir;
};

// Blocks until the server stops. SIGHUP reloads the snapshot from disk; a
// failed reload keeps the previous snapshot.
int serve(const ServeOptions& opts);

}  // namespace mmg
