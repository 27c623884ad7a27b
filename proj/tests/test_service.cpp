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

#include <doctest.h>

#include <thread>

// Eigen must precede httplib, which pulls in <resolv.h> and its `_res` macro.
#include "mmg/service.hpp"
#include "support/artifacts.hpp"
#include "support/files.hpp"
#include "support/tempdir.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace mmg;
using nlohmann::json;

namespace {

struct Fixture {
  mmg::testing::TempDir dir;
  mmg::testing::TrainedCorpus tc = mmg::testing::train_small_clusters();
  RetrievalService service;

  Fixture() {
    mmg::testing::write_artifacts(tc, dir.path());
    service.install(load_snapshot(ArtifactPaths::in(dir.path())));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

json body_of(const HttpReply& r) { return json::parse(r.body); }

std::vector<std::string> result_keys(const HttpReply& r) {
  const json body = body_of(r);
  std::vector<std::string> keys;
  for (const auto& hit : body["results"]) keys.push_back(hit["key"]);
  return keys;
}

}  // namespace

TEST_CASE("handlers answer 503 before a snapshot is installed") {
  RetrievalService s;
  CHECK(s.health().status == 503);
  CHECK(body_of(s.health())["status"] == "loading");
  CHECK(s.search(R"({"visual_weight":1,"image_key":"a00"})").status == 503);
  CHECK(s.predict_tags(std::string("a00"), std::nullopt).status == 503);
  CHECK(s.get_node("a00").status == 503);
}

TEST_CASE("loaded snapshot mirrors the artifacts") {
  const auto& f = fixture();
  const auto snap = f.service.snapshot();
  CHECK(snap->graph() == f.tc.engine->graph());
  CHECK(snap->table() == f.tc.engine->table());
  const auto h = f.service.health();
  CHECK(h.status == 200);
  const auto j = body_of(h);
  CHECK(j["status"] == "ok");
  CHECK(j["node_count"] == f.tc.engine->graph().node_count());
  CHECK(j["index_rows"] == f.tc.engine->index().rows());
}

TEST_CASE("search returns ranked keys and effective weights") {
  const auto& s = fixture().service;
  const auto r = s.search(R"({"image_key":"a01","tags":["beta","zzz"],"visual_weight":0.25,"k":4})");
  REQUIRE(r.status == 200);
  const auto j = body_of(r);
  CHECK(j["results"].size() == 4);
  CHECK(j["dropped_tags"] == json::array({"zzz"}));
  CHECK(j["effective_weights"]["w1"] == 0.25);
  CHECK(j["effective_weights"]["w2"] == 0.75);
  double prev = 2.0;
  for (const auto& hit : j["results"]) {
    CHECK(hit["key"] != "a01");
    CHECK(hit["score"].get<double>() <= prev);
    prev = hit["score"];
  }
  // Field order is stable.
  CHECK(r.body.rfind(R"({"results":)", 0) == 0);
}

TEST_CASE("search matches the engine directly") {
  const auto& f = fixture();
  const QueryEngine& e = *f.tc.engine;
  QuerySpec spec = e.spec_for_image(*e.graph().find("b03"));
  spec.blend = BlendWeights::from_visual(0.7);
  spec.tags = {"alpha"};
  spec.connectivity = Connectivity::both(5);
  spec.k_results = 6;
  std::vector<std::string> expected;
  for (const auto& h : e.retrieve_images(spec).hits) expected.push_back(h.key);
  const auto got = result_keys(f.service.search(
      R"({"image_key":"b03","tags":["alpha"],"visual_weight":0.7,"k":6,"connectivity":"both"})"));
  CHECK(got == expected);
}

TEST_CASE("feature and tags-only searches") {
  const auto& f = fixture();
  json req;
  req["feature"] = f.tc.data.held_out[0].init_feature;
  req["visual_weight"] = 1.0;
  req["k"] = 3;
  const auto r = f.service.search(req.dump());
  REQUIRE(r.status == 200);
  for (const auto& key : result_keys(r)) CHECK(key[0] == 'a');

  const auto t = f.service.search(R"({"tags":["beta"],"visual_weight":0.9})");
  REQUIRE(t.status == 200);
  CHECK(body_of(t)["effective_weights"]["w1"] == 0.0);
  CHECK(body_of(t)["results"].size() == 5);
}

TEST_CASE("request validation maps to status codes") {
  const auto& s = fixture().service;
  const auto status = [&](const char* body) { return s.search(body).status; };
  CHECK(status(R"({"image_key":"a00","visual_weight":1.5})") == 400);
  CHECK(status(R"({"image_key":"a00","visual_weight":-0.1})") == 400);
  CHECK(status(R"({"image_key":"a00"})") == 400);
  CHECK(status(R"({"image_key":"a00","visual_weight":"high"})") == 400);
  CHECK(status(R"({"image_key":"a00","visual_weight":1,"k":0})") == 400);
  CHECK(status(R"({"image_key":"a00","visual_weight":1,"k":2.5})") == 400);
  CHECK(status(R"({"image_key":"a00","visual_weight":1,"connectivity":"all"})") == 400);
  CHECK(status(R"({"image_key":"a00","visual_weight":1,"tags":"alpha"})") == 400);
  CHECK(status(R"({"image_key":"a00","feature":[1,2],"visual_weight":1})") == 400);
  CHECK(status("not json") == 400);
  CHECK(status("[1,2]") == 400);
  CHECK(status(R"({"image_key":"nope","visual_weight":1})") == 404);
  CHECK(status(R"({"image_key":"tag:alpha","visual_weight":1})") == 404);
  CHECK(status(R"({"visual_weight":0.5})") == 422);
  CHECK(status(R"({"tags":["zzz"],"visual_weight":0.5})") == 422);
  CHECK(status(R"({"visual_weight":0.5,"connectivity":"tag_only","image_key":"a00"})") == 422);

  const auto err = body_of(s.search(R"({"image_key":"nope","visual_weight":1})"));
  CHECK(err.contains("error"));
  CHECK(err.contains("message"));
}

TEST_CASE("visual weight 1.0 and 0.999999 agree") {
  const auto& s = fixture().service;
  for (const char* key : {"a00", "a05", "b01", "b07"}) {
    const std::string head = std::string(R"({"image_key":")") + key + R"(","tags":["beta"],"k":10,"visual_weight":)";
    const auto one = s.search(head + "1.0}");
    const auto almost = s.search(head + "0.999999}");
    REQUIRE(one.status == 200);
    CHECK(result_keys(one) == result_keys(almost));
  }
}

TEST_CASE("identical requests produce identical bodies") {
  const auto& s = fixture().service;
  const char* req = R"({"image_key":"b02","tags":["alpha"],"visual_weight":0.4,"k":7})";
  CHECK(s.search(req).body == s.search(req).body);
  CHECK(s.predict_tags(std::string("a03"), std::string("2")).body ==
        s.predict_tags(std::string("a03"), std::string("2")).body);
}

TEST_CASE("tag prediction endpoint") {
  const auto& s = fixture().service;
  const auto r = s.predict_tags(std::string("a03"), std::string("3"));
  REQUIRE(r.status == 200);
  const auto j = body_of(r);
  CHECK(j["image_key"] == "a03");
  CHECK(j["tags"].size() <= 3);
  CHECK(j["tags"][0]["tag"] == "alpha");
  CHECK(s.predict_tags(std::string("zzz"), std::nullopt).status == 404);
  CHECK(s.predict_tags(std::nullopt, std::nullopt).status == 400);
  CHECK(s.predict_tags(std::string("a03"), std::string("x")).status == 400);
  CHECK(s.predict_tags(std::string("a03"), std::string("0")).status == 400);
}

TEST_CASE("node metadata endpoint") {
  const auto& f = fixture();
  const auto tag = body_of(f.service.get_node("tag:alpha"));
  CHECK(tag["kind"] == "tag");
  CHECK_FALSE(tag.contains("tags"));
  const auto img = f.service.get_node("a00");
  REQUIRE(img.status == 200);
  const auto j = body_of(img);
  CHECK(j["key"] == "a00");
  CHECK(j["kind"] == "image");
  CHECK(j["degree"] == f.tc.engine->graph().degree(*f.tc.engine->graph().find("a00")));
  CHECK(j["tags"] == json::array({"alpha"}));
  CHECK(f.service.get_node("missing").status == 404);
}

TEST_CASE("snapshot replacement is atomic for readers") {
  auto& f = fixture();
  const auto before = f.service.snapshot();
  const auto fresh = load_snapshot(ArtifactPaths::in(f.dir.path()));
  f.service.install(fresh);
  CHECK(f.service.snapshot() == fresh);
  CHECK(before->graph().node_count() == fresh->graph().node_count());  // old one still usable
  CHECK(f.service.health().status == 200);
}

TEST_CASE("routes over a live socket") {
  auto& f = fixture();
  mmg::testing::TempDir ui;
  mmg::testing::write_text(ui / "index.html", "<html>explorer</html>");

  httplib::Server server;
  f.service.mount(server, ui.path());
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client c("127.0.0.1", port);
  auto health = c.Get("/api/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Content-Type").find("application/json") == 0);

  auto search = c.Post("/api/v1/search", R"({"image_key":"a00","visual_weight":1,"k":3})",
                       "application/json");
  REQUIRE(search);
  CHECK(search->status == 200);
  CHECK(json::parse(search->body)["results"].size() == 3);
  CHECK(c.Post("/api/v1/search", R"({"visual_weight":2})", "application/json")->status == 400);

  auto predict = c.Get("/api/v1/tags/predict?image_key=b01&k=1");
  REQUIRE(predict);
  CHECK(json::parse(predict->body)["tags"][0]["tag"] == "beta");
  CHECK(c.Get("/api/v1/nodes/tag:beta")->status == 200);
  CHECK(c.Get("/api/v1/nodes/nothing")->status == 404);

  auto page = c.Get("/ui/index.html");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->body == "<html>explorer</html>");

  server.stop();
  t.join();
}

TEST_CASE("placeholder page when no UI build exists") {
  RetrievalService s;
  httplib::Server server;
  s.mount(server, std::filesystem::path("/nonexistent/ui"));
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client c("127.0.0.1", port);
  auto page = c.Get("/ui/");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->get_header_value("Content-Type").find("text/html") == 0);
  CHECK(c.Get("/api/v1/health")->status == 503);
  server.stop();
  t.join();
}
