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
#include <numeric>

#include "mmg/encoder.hpp"
#include "support/errors.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace mmg;
using mmg::testing::code_of;

namespace {

MultiModalGraph onehot_graph(std::size_t n) {
  MultiModalGraph g(static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> f(n, 0.0f);
    f[i] = 1.0f;
    g.add_node("n" + std::to_string(i), NodeKind::kImage, f);
  }
  g.freeze();
  return g;
}

// One root with explicit hop-1 children and per-child hop-2 blocks.
LayeredSample manual_sample(NodeId root, const std::vector<NodeId>& hop1,
                            const std::vector<std::vector<NodeId>>& hop2) {
  LayeredSample s;
  s.roots = {root};
  s.hop1 = hop1;
  s.hop1_offsets.push_back(static_cast<std::uint32_t>(hop1.size()));
  for (std::size_t k = 0; k < hop1.size(); ++k) {
    const auto& block = k < hop2.size() ? hop2[k] : std::vector<NodeId>{};
    s.hop2.insert(s.hop2.end(), block.begin(), block.end());
    s.hop2_offsets.push_back(static_cast<std::uint32_t>(s.hop2.size()));
  }
  return s;
}

EncoderConfig plain(EncoderDims dims) {
  EncoderConfig c;
  c.dims = dims;
  c.dropout = 0.0f;
  c.fanouts = {5, 3};
  return c;
}

long double softplus_ld(long double x) { return std::log1p(std::exp(x)); }

}  // namespace

TEST_CASE("init_params has the documented shapes, bounds and determinism") {
  const EncoderDims dims;
  const auto p = init_params<float>(dims, 42);
  CHECK(p.self1.rows() == 512);
  CHECK(p.self1.cols() == 128);
  CHECK(p.neigh1.rows() == 512);
  CHECK(p.self2.rows() == 256);
  CHECK(p.self2.cols() == 128);
  CHECK(dims.out_width() == 256);
  for (const Mat<float>* m : p.matrices()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m->rows() + m->cols()));
    CHECK(m->cwiseAbs().maxCoeff() <= bound);
    CHECK(m->cwiseAbs().maxCoeff() > 0.9 * bound);
  }
  const auto q = init_params<float>(dims, 42);
  for (std::size_t i = 0; i < 4; ++i) CHECK(*p.matrices()[i] == *q.matrices()[i]);
  CHECK(init_params<float>(dims, 43).self1 != p.self1);
}

TEST_CASE("config validation") {
  EncoderConfig c;
  CHECK_NOTHROW(c.validate());
  c.dropout = 1.0f;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidConfig);
  c.dropout = 0.2f;
  c.fanouts = {5};
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("empty neighborhood passes only the self path") {
  MultiModalGraph g(4);
  const std::vector<float> x = {1.0f, -2.0f, 3.0f, 0.0f};
  const NodeId a = g.add_node("a", NodeKind::kImage, x);
  g.freeze();

  const EncoderDims dims{4, 4, 4};
  auto p = EncoderParams<double>::zeros(dims);
  p.self1.setIdentity();
  p.self2.setIdentity();  // 8 x 4, keeps the self block of layer 1
  p.neigh1.setRandom();
  p.neigh2.setRandom();
  const std::vector<NodeId> roots = {a};
  const std::vector<std::uint32_t> fan = {5, 3};
  const auto s = truncated_sample(AdjacencyView::full(g), roots, fan, {});
  const auto c = forward(p, plain(dims), g, s, Mode::kInfer);

  RowVec<double> expected = RowVec<double>::Zero(8);
  expected(0) = 1.0;
  expected(2) = 3.0;
  expected /= std::sqrt(10.0);
  REQUIRE(c.z.cols() == 8);
  CHECK((c.z.row(0) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mean of two neighbors") {
  Mat<double> src(2, 3);
  src << 2, 0, 0, 0, 2, 0;
  const std::vector<std::int64_t> rows = {0, 1};
  RowVec<double> out(3);
  CHECK(detail::mean_rows(src, rows, 0, 2, out.data()) == 2);
  CHECK(out(0) == 1.0);
  CHECK(out(1) == 1.0);
  CHECK(out(2) == 0.0);

  // The same mean through the encoder's neighbor block.
  MultiModalGraph g(3);
  const NodeId r = g.add_node("r", NodeKind::kImage, std::vector<float>{0, 0, 1});
  const NodeId u = g.add_node("u", NodeKind::kImage, std::vector<float>{2, 0, 0});
  const NodeId v = g.add_node("v", NodeKind::kImage, std::vector<float>{0, 2, 0});
  g.freeze();
  const EncoderDims dims{3, 3, 3};
  auto p = EncoderParams<double>::zeros(dims);
  p.neigh1.setIdentity();
  const auto c = forward(p, plain(dims), g, manual_sample(r, {u, v}, {}), Mode::kInfer);
  CHECK(c.h1_root(0, 3) == 1.0);
  CHECK(c.h1_root(0, 4) == 1.0);
  CHECK(c.h1_root(0, 5) == 0.0);
}

TEST_CASE("output is invariant to neighbor order") {
  mmg::testing::GradCheckConfig gc;
  const MultiModalGraph g = mmg::testing::gradcheck_graph(gc);
  const auto p = init_params<double>(gc.dims, 5);
  const auto cfg = plain(gc.dims);
  auto id = [](std::uint64_t i) { return NodeId{i}; };

  const auto a = manual_sample(id(0), {id(1), id(2), id(3)},
                               {{id(4), id(5)}, {id(6)}, {id(7), id(8), id(19)}});
  const auto b = manual_sample(id(0), {id(3), id(1), id(2)},
                               {{id(19), id(7), id(8)}, {id(5), id(4)}, {id(6)}});
  const auto za = forward(p, cfg, g, a, Mode::kInfer).z;
  const auto zb = forward(p, cfg, g, b, Mode::kInfer).z;
  CHECK((za - zb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("outputs are 256 wide, unit norm, and deterministic without dropout") {
  const auto data = mmg::testing::make_two_clusters(3, 10, 0);
  const MultiModalGraph g = build_graph(data.corpus, mmg::testing::two_cluster_build_config());
  EncoderConfig cfg;
  const auto p = init_params<float>(cfg.dims, 9);
  std::vector<NodeId> roots;
  for (std::uint64_t i = 0; i < g.node_count(); ++i) roots.push_back(NodeId{i});
  const auto s = truncated_sample(AdjacencyView::full(g), roots, cfg.fanouts, {});

  const auto z = forward(p, cfg, g, s, Mode::kInfer).z;
  REQUIRE(z.cols() == 256);
  for (Eigen::Index r = 0; r < z.rows(); ++r) CHECK(std::abs(z.row(r).norm() - 1.0f) < 1e-6f);
  CHECK(forward(p, cfg, g, s, Mode::kInfer).z == z);

  // Inference ignores dropout; training applies it reproducibly per rng state.
  Rng r1(1), r2(1), r3(2);
  const auto t1 = forward(p, cfg, g, s, Mode::kTrain, &r1).z;
  const auto t2 = forward(p, cfg, g, s, Mode::kTrain, &r2).z;
  const auto t3 = forward(p, cfg, g, s, Mode::kTrain, &r3).z;
  CHECK(t1 == t2);
  CHECK(t1 != t3);
  CHECK(t1 != z);
  CHECK(code_of([&] { forward(p, cfg, g, s, Mode::kTrain); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("dropout mask keeps roughly 80 percent with inverted scaling") {
  Rng rng(17);
  Mat<double> mask;
  detail::dropout_mask(mask, 200, 500, 0.2, rng);
  const double kept = static_cast<double>((mask.array() > 0.0).count()) / static_cast<double>(mask.size());
  CHECK(std::abs(kept - 0.8) < 0.005);
  CHECK(std::abs(mask.mean() - 1.0) < 0.01);
}

TEST_CASE("forward rejects mismatched features") {
  const MultiModalGraph g = onehot_graph(3);
  const auto p = init_params<double>({4, 2, 2}, 1);
  const auto s = manual_sample(NodeId{0}, {NodeId{1}}, {});
  CHECK(code_of([&] { forward(p, plain({4, 2, 2}), g, s, Mode::kInfer); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("pair loss closed forms") {
  std::vector<float> e1(256, 0.0f), e2(256, 0.0f), e3(256, 0.0f);
  e1[0] = 1.0f;
  e2[1] = 1.0f;
  e3[2] = 1.0f;
  CHECK(pair_loss(e1, e2, {std::span<const float>(e3)}) == doctest::Approx(1.386294).epsilon(1e-6));

  double previous = pair_loss(e1, e1, {});
  for (float scale : {2.0f, 5.0f, 10.0f}) {
    std::vector<float> u(256, 0.0f);
    u[0] = scale;
    const double j = pair_loss(u, u, {});
    CHECK(j >= 0.0);
    CHECK(j < previous);
    previous = j;
  }
  CHECK(previous < 1e-40);

  std::vector<float> bad = e1;
  bad[3] = std::nanf("");
  CHECK(code_of([&] { pair_loss(bad, e2, {}); }) == ErrorCode::kNonFiniteInput);
  CHECK(code_of([&] { pair_loss(e1, std::vector<float>(3), {}); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("pair loss matches an extended-precision direct formula") {
  Rng rng(8);
  std::normal_distribution<float> n(0.0f, 0.3f);
  for (int trial = 0; trial < 20; ++trial) {
    auto draw = [&] {
      std::vector<float> v(256);
      for (auto& x : v) x = n(rng);
      return v;
    };
    const auto u = draw(), v = draw();
    std::vector<std::vector<float>> negs;
    for (int q = 0; q < 1 + trial % 5; ++q) negs.push_back(draw());
    std::vector<std::span<const float>> views(negs.begin(), negs.end());

    auto dot = [](const std::vector<float>& a, const std::vector<float>& b) {
      long double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
      return s;
    };
    long double j = -std::log(1.0L / (1.0L + std::exp(-dot(u, v))));
    for (const auto& z : negs) j -= std::log(1.0L / (1.0L + std::exp(dot(u, z))));
    CHECK(pair_loss(u, v, views) == doctest::Approx(static_cast<double>(j)).epsilon(1e-12));
  }
}

TEST_CASE("batch loss and its embedding gradient") {
  const std::size_t B = 4, Q = 3;
  Rng rng(12);
  std::normal_distribution<double> n(0.0, 0.4);
  Mat<double> z(2 * B + Q, 6);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);

  long double expected = 0;
  for (std::size_t i = 0; i < B; ++i) {
    expected += softplus_ld(-static_cast<long double>(z.row(i).dot(z.row(B + i))));
    for (std::size_t q = 0; q < Q; ++q) {
      expected += softplus_ld(static_cast<long double>(z.row(i).dot(z.row(2 * B + q))));
    }
  }
  expected /= B;
  Mat<double> dz;
  CHECK(batch_loss<double>(z, B, Q, &dz) == doctest::Approx(static_cast<double>(expected)).epsilon(1e-13));

  const double h = 1e-6;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Mat<double> zp = z, zm = z;
    zp.data()[i] += h;
    zm.data()[i] -= h;
    const double numeric = (batch_loss<double>(zp, B, Q, nullptr) - batch_loss<double>(zm, B, Q, nullptr)) / (2 * h);
    CHECK(std::abs(numeric - dz.data()[i]) < 1e-8);
  }
  CHECK(code_of([&] { batch_loss<double>(z, B + 1, Q, nullptr); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("gradient vanishes at a saturated optimum") {
  const std::size_t B = 2, Q = 2;
  Mat<double> z = Mat<double>::Zero(2 * B + Q, 4);
  for (std::size_t i = 0; i < B; ++i) {
    z(i, 0) = 40.0;
    z(B + i, 0) = 40.0;
  }
  for (std::size_t q = 0; q < Q; ++q) z(2 * B + q, 0) = -40.0;
  Mat<double> dz;
  CHECK(batch_loss<double>(z, B, Q, &dz) == 0.0);
  CHECK(dz.cwiseAbs().maxCoeff() == 0.0);

  mmg::testing::GradCheckConfig gc;
  const MultiModalGraph g = mmg::testing::gradcheck_graph(gc);
  const auto p = init_params<double>(gc.dims, 3);
  std::vector<NodeId> roots;
  for (std::uint64_t i = 0; i < 2 * B + Q; ++i) roots.push_back(NodeId{i});
  const auto s = truncated_sample(AdjacencyView::full(g), roots, gc.fanouts, {});
  const auto c = forward(p, plain(gc.dims), g, s, Mode::kTrain);
  const Mat<double> zero = Mat<double>::Zero(c.z.rows(), c.z.cols());
  const auto grad = backward(p, plain(gc.dims), c, zero);
  for (const Mat<double>* m : grad.matrices()) CHECK(m->cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a duplicated neighbor contributes twice through the mean") {
  const MultiModalGraph g = onehot_graph(3);
  const NodeId r{0}, a{1}, b{2};
  const EncoderDims dims{3, 4, 4};
  const auto p = init_params<double>(dims, 21);
  const auto cfg = plain(dims);
  const auto c = forward(p, cfg, g, manual_sample(r, {a, a, b}, {}), Mode::kInfer);
  Mat<double> dz(1, 8);
  dz << 0.3, -0.1, 0.7, 0.2, -0.4, 0.5, 0.1, -0.6;
  const auto grad = backward(p, cfg, c, dz);
  REQUIRE(grad.neigh1.row(b.value).norm() > 0.0);
  CHECK((grad.neigh1.row(a.value) - 2.0 * grad.neigh1.row(b.value)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(grad.neigh1.row(r.value).norm() == 0.0);
}

TEST_CASE("analytic gradient matches central differences on the toy graph") {
  const mmg::testing::GradCheckConfig gc;
  const auto rep = mmg::testing::run_gradient_check(gc);
  CHECK(rep.nodes == 20);
  CHECK(rep.tags == 2);
  CHECK(rep.coordinates == 4 * 32 * 16);
  CHECK(rep.kink_crossings == 0);
  CHECK(rep.failures == 0);
  CHECK(rep.worst_ratio < 1e-4);
}
