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

#include <cmath>

#include "mmg/trainer.hpp"
#include "support/errors.hpp"
#include "support/files.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace mmg;
using mmg::testing::code_of;

namespace {

MultiModalGraph small_graph() {
  const auto data = mmg::testing::make_two_clusters(4, 10, 0, 16);
  return build_graph(data.corpus, mmg::testing::small_build_config());
}

TrainConfig small_config() {
  TrainConfig t = mmg::testing::small_train_config();
  t.epochs = 3;
  return t;
}

}  // namespace

TEST_CASE("defaults follow the published training setup") {
  const TrainConfig t;
  CHECK(t.epochs == 50);
  CHECK(t.batch_size == 512);
  CHECK(t.learning_rate == 1e-5);
  CHECK(t.optimizer == OptimizerKind::kAdam);
  CHECK(t.adam_beta1 == 0.9);
  CHECK(t.adam_beta2 == 0.999);
  CHECK(t.adam_epsilon == 1e-8);
  CHECK(t.encoder.dropout == doctest::Approx(0.2));
}

TEST_CASE("Adam with a zero gradient leaves parameters unchanged") {
  const EncoderDims dims{6, 4, 4};
  auto p = init_params<float>(dims, 1);
  const auto before = p;
  Optimizer<float> opt(TrainConfig{}, dims);
  for (int i = 0; i < 3; ++i) opt.step(p, EncoderParams<float>::zeros(dims));
  CHECK(opt.steps() == 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(*p.matrices()[i] == *before.matrices()[i]);
}

TEST_CASE("first Adam step moves each weight by about the learning rate") {
  const EncoderDims dims{3, 2, 2};
  auto p = EncoderParams<float>::zeros(dims);
  auto g = EncoderParams<float>::zeros(dims);
  g.self1(0, 0) = 5.0f;
  g.self1(1, 1) = -0.01f;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  Optimizer<float> opt(cfg, dims);
  opt.step(p, g);
  CHECK(p.self1(0, 0) == doctest::Approx(-0.1).epsilon(1e-5));
  CHECK(p.self1(1, 1) == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(p.self1(2, 0) == 0.0f);
}

TEST_CASE("training is finite, reports every epoch and is reproducible") {
  const MultiModalGraph g = small_graph();
  const TrainConfig cfg = small_config();
  std::vector<std::uint32_t> seen;
  const auto a = train(g, cfg, [&](std::uint32_t epoch, double loss) {
    seen.push_back(epoch);
    CHECK(std::isfinite(loss));
  });
  CHECK(seen == std::vector<std::uint32_t>{1, 2, 3});
  REQUIRE(a.report.epoch_loss.size() == 3);
  CHECK(a.params.all_finite());
  CHECK(a.encoder.fanouts == std::vector<std::uint32_t>{4, 3});

  const auto b = train(g, cfg);
  CHECK(a.report.epoch_loss == b.report.epoch_loss);
  for (std::size_t i = 0; i < 4; ++i) CHECK(*a.params.matrices()[i] == *b.params.matrices()[i]);

  TrainConfig other = cfg;
  other.rng_seed = 4;
  CHECK(train(g, other).params.self1 != a.params.self1);
}

TEST_CASE("loss decreases on the small corpus") {
  TrainConfig cfg = small_config();
  cfg.epochs = 15;
  const auto r = train(small_graph(), cfg);
  CHECK(r.report.epoch_loss.back() < r.report.epoch_loss.front());
}

TEST_CASE("embed_all covers every node with unit rows, deterministically") {
  const MultiModalGraph g = small_graph();
  const auto r = train(g, small_config());
  const auto t = embed_all(g, r.params, r.encoder);
  CHECK(t.size() == g.node_count());
  CHECK(t.dim == 16);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t.ids[i] == NodeId{i});
    CHECK(t.kinds[i] == g.kind(NodeId{i}));
    double n = 0;
    for (float x : t.row(i)) n += static_cast<double>(x) * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-6);
  }
  CHECK(embed_all(g, r.params, r.encoder) == t);
}

TEST_CASE("degenerate graphs and bad configs are rejected") {
  MultiModalGraph isolated(2);
  const std::vector<float> f = {1.0f, 0.0f};
  isolated.add_node("a", NodeKind::kImage, f);
  isolated.add_node("b", NodeKind::kImage, f);
  isolated.freeze();
  TrainConfig cfg = small_config();
  cfg.encoder.dims = {2, 2, 2};
  CHECK(code_of([&] { train(isolated, cfg); }) == ErrorCode::kDegenerateGraph);

  const MultiModalGraph g = small_graph();
  TrainConfig bad = small_config();
  bad.batch_size = 100000;
  CHECK(code_of([&] { train(g, bad); }) == ErrorCode::kInvalidConfig);
  bad = small_config();
  bad.epochs = 0;
  CHECK(code_of([&] { train(g, bad); }) == ErrorCode::kInvalidConfig);
  bad = small_config();
  bad.encoder.dims.d_in = 17;
  CHECK(code_of([&] { train(g, bad); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("loss curve CSV") {
  mmg::testing::TempDir dir;
  TrainReport r;
  r.epoch_loss = {20.5, 15.25};
  write_loss_csv(r, dir / "loss.csv");
  CHECK(mmg::testing::read_text(dir / "loss.csv") == "epoch,mean_loss\n1,20.5\n2,15.25\n");
}
