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

#include "mmg/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmg/error.hpp"
#include "mmg/eval.hpp"
#include "mmg/ingest.hpp"
#include "mmg/service.hpp"
#include "mmg/trainer.hpp"

namespace mmg {
namespace {

using nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A JSON array of numbers, or whitespace-separated numbers.
std::vector<float> read_feature_file(const std::filesystem::path& p) {
  const std::string text = read_text(p);
  std::vector<float> v;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      for (const auto& x : nlohmann::json::parse(text)) v.push_back(x.get<float>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, p.string() + ": " + e.what());
    }
    return v;
  }
  std::istringstream in(text);
  float x;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw Error(ErrorCode::kParseError, p.string() + ": not a list of numbers");
  return v;
}

std::vector<std::string> split_tags(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::size_t start = 0;
    while (start <= r.size()) {
      const auto comma = std::min(r.find(',', start), r.size());
      out.push_back(r.substr(start, comma - start));
      start = comma + 1;
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const std::string& s) {
                             return s.find_first_not_of(" \t") == std::string::npos;
                           }),
            out.end());
  return out;
}

int exit_for_status(int status) {
  if (status == 200) return 0;
  return status == 400 ? 1 : 2;
}

void write_json(std::ostream& out, const std::string& body) {
  out << ordered_json::parse(body).dump(2) << '\n';
}

std::filesystem::path default_artifact_dir() {
  const char* env = std::getenv("MMG_ARTIFACT_DIR");
  return env ? std::filesystem::path(env) : std::filesystem::path(".");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-modal image/tag graph embedding and retrieval", "mmg"};
  app.require_subcommand(1);

  // build-graph
  std::filesystem::path images_in, graph_out;
  BuildConfig build;
  std::uint32_t build_d_in = 0;
  auto* cmd_build = app.add_subcommand("build-graph", "images.jsonl -> graph.mmgf");
  cmd_build->add_option("--images", images_in, "input JSONL")->required();
  cmd_build->add_option("--out", graph_out, "output graph")->required();
  cmd_build->add_option("--k", build.k_neighbors, "kNN candidates per image");
  cmd_build->add_option("--threshold", build.similarity_threshold, "cosine threshold");
  cmd_build->add_option("--d-in", build_d_in, "feature width (default: from the first record)");
  cmd_build->add_option("--seed", build.rng_seed, "tag feature seed");

  // train
  std::filesystem::path train_graph, weights_out, loss_csv;
  TrainConfig train_cfg;
  std::uint32_t hidden = 128;
  bool sgd = false;
  auto* cmd_train = app.add_subcommand("train", "graph -> weights.mmgw + loss.csv");
  cmd_train->add_option("--graph", train_graph)->required();
  cmd_train->add_option("--out", weights_out)->required();
  cmd_train->add_option("--loss-csv", loss_csv);
  cmd_train->add_option("--epochs", train_cfg.epochs);
  cmd_train->add_option("--batch-size", train_cfg.batch_size);
  cmd_train->add_option("--lr", train_cfg.learning_rate);
  cmd_train->add_option("--dropout", train_cfg.encoder.dropout);
  cmd_train->add_option("--hidden", hidden, "width of each layer half");
  cmd_train->add_option("--walks-per-node", train_cfg.sampler.walks_per_node);
  cmd_train->add_option("--walk-length", train_cfg.sampler.walk_length);
  cmd_train->add_option("--negatives", train_cfg.sampler.negatives);
  cmd_train->add_option("--max-degree", train_cfg.sampler.max_degree);
  cmd_train->add_option("--fanouts", train_cfg.sampler.fanouts)->expected(2);
  cmd_train->add_option("--seed", train_cfg.rng_seed);
  cmd_train->add_flag("--sgd", sgd, "plain SGD instead of Adam");

  // embed
  std::filesystem::path embed_graph, embed_weights, embed_out;
  auto* cmd_embed = app.add_subcommand("embed", "graph + weights -> embeddings.mmge");
  cmd_embed->add_option("--graph", embed_graph)->required();
  cmd_embed->add_option("--weights", embed_weights)->required();
  cmd_embed->add_option("--out", embed_out)->required();

  // query
  std::filesystem::path artifacts = default_artifact_dir();
  std::string image_key;
  std::filesystem::path feature_file;
  std::vector<std::string> raw_tags;
  double visual_weight = 0.5;
  std::uint32_t k = 5;
  std::string connectivity = "image_only";
  auto* cmd_query = app.add_subcommand("query", "retrieve images");
  cmd_query->add_option("--artifacts", artifacts, "artifact directory (default $MMG_ARTIFACT_DIR)");
  auto* opt_key = cmd_query->add_option("--image-key", image_key);
  auto* opt_feat = cmd_query->add_option("--feature-file", feature_file);
  opt_key->excludes(opt_feat);
  cmd_query->add_option("--tags", raw_tags, "comma-separated, repeatable");
  cmd_query->add_option("--visual-weight", visual_weight)->check(CLI::Range(0.0, 1.0));
  cmd_query->add_option("--k", k)->check(CLI::Range(1, 1000));
  cmd_query->add_option("--connectivity", connectivity)
      ->check(CLI::IsMember({"image_only", "tag_only", "both"}));

  // predict-tags
  auto* cmd_predict = app.add_subcommand("predict-tags", "top tags for a corpus image");
  cmd_predict->add_option("--artifacts", artifacts);
  cmd_predict->add_option("--image-key", image_key)->required();
  cmd_predict->add_option("--k", k)->check(CLI::Range(1, 1000));

  // eval
  std::filesystem::path judgments, report_out;
  std::string gain = "exponential";
  auto* cmd_eval = app.add_subcommand("eval", "judgments.csv -> report.json");
  cmd_eval->add_option("--judgments", judgments)->required();
  cmd_eval->add_option("--out", report_out);
  cmd_eval->add_option("--gain", gain)->check(CLI::IsMember({"exponential", "linear"}));

  // serve
  ServeOptions serve_opts;
  auto* cmd_serve = app.add_subcommand("serve", "HTTP service");
  cmd_serve->add_option("--artifacts", artifacts);
  cmd_serve->add_option("--host", serve_opts.host);
  cmd_serve->add_option("--port", serve_opts.port)->check(CLI::Range(1, 65535));
  cmd_serve->add_option("--ui-dir", serve_opts.ui_dir);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (cmd_build->parsed()) {
      const auto records = read_images_jsonl(images_in);
      if (records.empty()) throw Error(ErrorCode::kEmptyCorpus, images_in.string() + " has no records");
      build.d_in = build_d_in ? build_d_in : static_cast<std::uint32_t>(records.front().init_feature.size());
      const auto g = build_graph(records, build);
      save_graph(g, graph_out);
      err << "graph: " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
      return 0;
    }
    if (cmd_train->parsed()) {
      const auto g = load_graph(train_graph);
      train_cfg.encoder.dims = {g.d_in(), hidden, hidden};
      train_cfg.optimizer = sgd ? OptimizerKind::kSgd : OptimizerKind::kAdam;
      auto result = train(g, train_cfg, [&](std::uint32_t epoch, double loss) {
        err << "epoch " << epoch << " loss " << loss << '\n';
      });
      save_checkpoint(result.params, result.encoder, weights_out);
      if (!loss_csv.empty()) write_loss_csv(result.report, loss_csv);
      return 0;
    }
    if (cmd_embed->parsed()) {
      const auto g = load_graph(embed_graph);
      const auto [params, enc] = load_checkpoint(embed_weights);
      save_embeddings(embed_all(g, params, enc), embed_out);
      return 0;
    }
    if (cmd_query->parsed() || cmd_predict->parsed()) {
      RetrievalService service;
      service.install(load_snapshot(ArtifactPaths::in(artifacts)));
      HttpReply reply;
      if (cmd_query->parsed()) {
        ordered_json req;
        if (!image_key.empty()) req["image_key"] = image_key;
        if (!feature_file.empty()) req["feature"] = read_feature_file(feature_file);
        req["tags"] = split_tags(raw_tags);
        req["visual_weight"] = visual_weight;
        req["k"] = k;
        req["connectivity"] = connectivity;
        reply = service.search(req.dump());
      } else {
        reply = service.predict_tags(image_key, std::to_string(k));
      }
      if (reply.status != 200) {
        err << "error: " << ordered_json::parse(reply.body).value("message", reply.body) << '\n';
      } else {
        write_json(out, reply.body);
      }
      return exit_for_status(reply.status);
    }
    if (cmd_eval->parsed()) {
      const auto report = eval_report(read_judgments_csv(judgments),
                                      gain == "linear" ? GainVariant::kLinear : GainVariant::kExponential);
      if (report_out.empty()) {
        out << report.dump(2) << '\n';
      } else {
        std::ofstream f(report_out);
        if (!(f << report.dump(2) << '\n')) throw Error(ErrorCode::kIoFailure, "cannot write " + report_out.string());
      }
      return 0;
    }
    if (cmd_serve->parsed()) {
      serve_opts.artifact_dir = artifacts;
      return serve(serve_opts);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidConfig ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace mmg
