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

#include "mmg/service.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mmg/error.hpp"
#include "mmg/ingest.hpp"

namespace mmg {
namespace {

using nlohmann::ordered_json;

constexpr std::uint32_t kMaxResults = 1000;

HttpReply json_reply(int status, const ordered_json& body) { return {status, body.dump()}; }

HttpReply error_reply(int status, std::string_view code, std::string_view message) {
  ordered_json body;
  body["error"] = code;
  body["message"] = message;
  return json_reply(status, body);
}

HttpReply not_ready() { return error_reply(503, "NotReady", "no snapshot loaded"); }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownNode: return 404;
    case ErrorCode::kNoResolvableTags:
    case ErrorCode::kEmptyQuery:
    case ErrorCode::kMissingImageFeature:
    case ErrorCode::kZeroQuery: return 422;
    default: return 400;
  }
}

HttpReply from_error(const Error& e) {
  return error_reply(status_for(e.code()), error_code_name(e.code()), e.what());
}

std::string tag_name(const MultiModalGraph& g, NodeId t) { return g.key(t).substr(4); }

std::optional<std::uint32_t> parse_k(const ordered_json& v) {
  if (!v.is_number_integer()) return std::nullopt;
  const auto k = v.get<std::int64_t>();
  if (k < 1 || k > kMaxResults) return std::nullopt;
  return static_cast<std::uint32_t>(k);
}

volatile std::sig_atomic_t g_reload_requested = 0;
extern "C" void on_sighup(int) { g_reload_requested = 1; }

}  // namespace

ArtifactPaths ArtifactPaths::in(const std::filesystem::path& dir) {
  return {dir / "graph.mmgf", dir / "weights.mmgw", dir / "embeddings.mmge", dir / "images.jsonl"};
}

std::shared_ptr<const QueryEngine> load_snapshot(const ArtifactPaths& paths) {
  MultiModalGraph g = load_graph(paths.graph);
  auto [params, enc] = load_checkpoint(paths.weights);
  EmbeddingTable table = load_embeddings(paths.embeddings);
  std::optional<SimFeatureStore> sim;
  if (!paths.images.empty() && std::filesystem::exists(paths.images)) {
    sim = SimFeatureStore::from_records(g, read_images_jsonl(paths.images));
  }
  return std::make_shared<const QueryEngine>(std::move(g), std::move(params), std::move(enc),
                                             std::move(table), std::move(sim));
}

void RetrievalService::install(std::shared_ptr<const QueryEngine> snapshot) {
  std::lock_guard lock(mu_);
  snapshot_ = std::move(snapshot);
}

std::shared_ptr<const QueryEngine> RetrievalService::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_;
}

HttpReply RetrievalService::search(std::string_view json_body) const {
  const auto engine = snapshot();
  if (!engine) return not_ready();

  ordered_json req;
  try {
    req = ordered_json::parse(json_body);
  } catch (const ordered_json::parse_error&) {
    return error_reply(400, "BadRequest", "body is not valid JSON");
  }
  if (!req.is_object()) return error_reply(400, "BadRequest", "body must be a JSON object");

  QuerySpec spec;
  const auto& vw = req.value("visual_weight", ordered_json());
  if (!vw.is_number()) return error_reply(400, "BadRequest", "visual_weight must be a number");
  const double w1 = vw.get<double>();
  if (!(w1 >= 0.0 && w1 <= 1.0)) {
    return error_reply(400, "BadRequest", "visual_weight must lie in [0, 1]");
  }
  spec.blend = BlendWeights::from_visual(w1);

  if (req.contains("k")) {
    const auto k = parse_k(req["k"]);
    if (!k) return error_reply(400, "BadRequest", "k must be an integer in [1, 1000]");
    spec.k_results = *k;
  }
  if (req.contains("connectivity")) {
    const auto& c = req["connectivity"];
    const auto kind = c.is_string() ? parse_connectivity(c.get<std::string>()) : std::nullopt;
    if (!kind) return error_reply(400, "BadRequest", "connectivity must be image_only, tag_only or both");
    spec.connectivity.kind = *kind;
  }
  if (req.contains("tags")) {
    const auto& t = req["tags"];
    if (!t.is_array()) return error_reply(400, "BadRequest", "tags must be an array of strings");
    for (const auto& s : t) {
      if (!s.is_string()) return error_reply(400, "BadRequest", "tags must be an array of strings");
      spec.tags.push_back(s.get<std::string>());
    }
  }
  const bool has_key = req.contains("image_key") && !req["image_key"].is_null();
  const bool has_feature = req.contains("feature") && !req["feature"].is_null();
  if (has_key && has_feature) {
    return error_reply(400, "BadRequest", "give image_key or feature, not both");
  }

  try {
    if (has_key) {
      if (!req["image_key"].is_string()) return error_reply(400, "BadRequest", "image_key must be a string");
      const auto key = req["image_key"].get<std::string>();
      const auto id = engine->graph().find(key);
      if (!id || engine->graph().kind(*id) != NodeKind::kImage) {
        return error_reply(404, "UnknownNode", "no image with key '" + key + "'");
      }
      QuerySpec base = engine->spec_for_image(*id);
      spec.init_feature = std::move(base.init_feature);
      spec.sim_feature = std::move(base.sim_feature);
      spec.source_node = base.source_node;
    } else if (has_feature) {
      const auto& f = req["feature"];
      if (!f.is_array()) return error_reply(400, "BadRequest", "feature must be an array of numbers");
      std::vector<float> v;
      v.reserve(f.size());
      for (const auto& x : f) {
        if (!x.is_number()) return error_reply(400, "BadRequest", "feature must be an array of numbers");
        v.push_back(x.get<float>());
      }
      spec.init_feature = std::move(v);
    }

    const RetrievalResult r = engine->retrieve_images(spec);
    ordered_json body;
    ordered_json results = ordered_json::array();
    for (const auto& h : r.hits) {
      ordered_json item;
      item["key"] = h.key;
      item["score"] = h.score;
      results.push_back(std::move(item));
    }
    body["results"] = std::move(results);
    body["dropped_tags"] = r.dropped_tags;
    body["effective_weights"] = {{"w1", r.w_visual}, {"w2", r.w_concept}};
    return json_reply(200, body);
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpReply RetrievalService::predict_tags(const std::optional<std::string>& image_key,
                                         const std::optional<std::string>& k) const {
  const auto engine = snapshot();
  if (!engine) return not_ready();
  if (!image_key || image_key->empty()) return error_reply(400, "BadRequest", "image_key is required");
  std::uint32_t want = 5;
  if (k) {
    ordered_json parsed;
    try {
      parsed = ordered_json::parse(*k);
    } catch (const ordered_json::parse_error&) {
    }
    const auto pk = parse_k(parsed);
    if (!pk) return error_reply(400, "BadRequest", "k must be an integer in [1, 1000]");
    want = *pk;
  }
  const auto id = engine->graph().find(*image_key);
  if (!id || engine->graph().kind(*id) != NodeKind::kImage) {
    return error_reply(404, "UnknownNode", "no image with key '" + *image_key + "'");
  }
  try {
    const auto hits = engine->predict_tags(engine->spec_for_image(*id), want);
    ordered_json body;
    body["image_key"] = *image_key;
    ordered_json tags = ordered_json::array();
    for (const auto& h : hits) {
      ordered_json item;
      item["tag"] = h.key.substr(4);
      item["score"] = h.score;
      tags.push_back(std::move(item));
    }
    body["tags"] = std::move(tags);
    return json_reply(200, body);
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpReply RetrievalService::get_node(std::string_view key) const {
  const auto engine = snapshot();
  if (!engine) return not_ready();
  const auto& g = engine->graph();
  const auto id = g.find(key);
  if (!id) return error_reply(404, "UnknownNode", "no node with key '" + std::string(key) + "'");
  ordered_json body;
  body["key"] = g.key(*id);
  body["kind"] = to_string(g.kind(*id));
  body["degree"] = g.degree(*id);
  if (g.kind(*id) == NodeKind::kImage) {
    ordered_json tags = ordered_json::array();
    for (NodeId t : g.neighbors(*id, EdgeKind::kImageTag)) tags.push_back(tag_name(g, t));
    body["tags"] = std::move(tags);
  }
  return json_reply(200, body);
}

HttpReply RetrievalService::health() const {
  const auto engine = snapshot();
  if (!engine) {
    ordered_json body;
    body["status"] = "loading";
    return json_reply(503, body);
  }
  ordered_json body;
  body["status"] = "ok";
  body["node_count"] = engine->graph().node_count();
  body["index_rows"] = engine->index().rows();
  return json_reply(200, body);
}

void RetrievalService::mount(httplib::Server& server,
                             const std::optional<std::filesystem::path>& ui_dir) const {
  const auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Post("/api/v1/search", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, search(req.body));
  });
  server.Get("/api/v1/tags/predict", [this, send](const httplib::Request& req, httplib::Response& res) {
    const auto param = [&](const char* name) -> std::optional<std::string> {
      if (!req.has_param(name)) return std::nullopt;
      return req.get_param_value(name);
    };
    send(res, predict_tags(param("image_key"), param("k")));
  });
  server.Get(R"(/api/v1/nodes/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_node(req.matches[1].str()));
  });
  server.Get("/api/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });

  if (ui_dir && std::filesystem::is_directory(*ui_dir)) {
    server.set_mount_point("/ui", ui_dir->string());
  } else {
    server.Get(R"(/ui/?)", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(
          "<!doctype html><title>mmgraph</title><p>Explorer assets are not installed.</p>",
          "text/html");
    });
  }
}

int serve(const ServeOptions& opts) {
  RetrievalService service;
  httplib::Server server;
  service.mount(server, opts.ui_dir ? opts.ui_dir : std::optional(opts.artifact_dir / "ui"));

  const ArtifactPaths paths = ArtifactPaths::in(opts.artifact_dir);
  const auto load = [&]() {
    try {
      service.install(load_snapshot(paths));
      std::cerr << "snapshot loaded from " << opts.artifact_dir.string() << '\n';
    } catch (const std::exception& e) {
      std::cerr << "snapshot load failed: " << e.what() << '\n';
    }
  };

  std::signal(SIGHUP, on_sighup);
  std::atomic<bool> stop{false};
  std::thread loader([&] {
    load();
    while (!stop) {
      if (g_reload_requested) {
        g_reload_requested = 0;
        load();
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  });

  std::cerr << "listening on " << opts.host << ':' << opts.port << '\n';
  const bool ok = server.listen(opts.host, opts.port);
  stop = true;
  loader.join();
  return ok ? 0 : 2;
}

}  // namespace mmg
