#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "getnet/errors.hpp"
#include "getnet/random.hpp"
#include "getnet/synthgen.hpp"
#include "getnet/unmixing.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace getnet;

namespace {

EndmemberSet make_set(std::initializer_list<std::initializer_list<double>> columns) {
  const auto m = static_cast<Eigen::Index>(columns.size());
  const auto b = static_cast<Eigen::Index>(columns.begin()->size());
  EndmemberSet e;
  e.matrix.resize(b, m);
  Eigen::Index j = 0;
  for (const auto& col : columns) {
    Eigen::Index i = 0;
    for (double v : col) e.matrix(i++, j) = v;
    ++j;
  }
  return e;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_simplex(Rng& rng, std::size_t m) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = -std::log(1.0 - uniform01(rng));
  return w / w.sum();
}

void expect_on_simplex(const Eigen::VectorXd& w, double tol = 1e-12) {
  EXPECT_GE(w.minCoeff(), 0.0);
  EXPECT_LE(w.maxCoeff(), 1.0 + tol);
  EXPECT_NEAR(w.sum(), 1.0, tol);
}

}  // namespace

TEST(Atgp, ThreePixelTieBreak) {
  Eigen::MatrixXd px(2, 3);
  px << 1, 0, 0.5, 0, 1, 0.5;
  const EndmemberSet e = atgp(px, 2);
  EXPECT_EQ(e.source_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(e.matrix.col(0), px.col(0));
  EXPECT_EQ(e.matrix.col(1), px.col(1));
}

TEST(Atgp, SingleEndmemberIsMaxNorm) {
  Rng rng(3);
  Eigen::MatrixXd px = Eigen::MatrixXd::NullaryExpr(5, 40, [&] { return uniform01(rng); });
  Eigen::Index best;
  px.colwise().norm().maxCoeff(&best);
  EXPECT_EQ(atgp(px, 1).source_indices, (std::vector<std::size_t>{static_cast<std::size_t>(best)}));
}

TEST(Atgp, EqualPixelsAreDegenerate) {
  const Eigen::MatrixXd px = Eigen::MatrixXd::Constant(3, 10, 0.4);
  EXPECT_THROW(atgp(px, 2), DegeneracyError);
}

TEST(Atgp, ShuffleStable) {
  Rng rng(17);
  const Eigen::MatrixXd px = Eigen::MatrixXd::NullaryExpr(8, 60, [&] { return uniform01(rng); });
  const EndmemberSet ref = atgp(px, 4);
  std::vector<Eigen::Index> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd shuffled(8, 60);
  for (Eigen::Index j = 0; j < 60; ++j) shuffled.col(j) = px.col(perm[static_cast<std::size_t>(j)]);
  const EndmemberSet s = atgp(shuffled, 4);
  for (std::size_t k = 0; k < 4; ++k)
    EXPECT_EQ(static_cast<std::size_t>(perm[s.source_indices[k]]), ref.source_indices[k]);
}

TEST(Nnls, Examples) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_TRUE(nnls(eye, vec({0.3, 0.7})).isApprox(vec({0.3, 0.7}), 1e-15));
  const Eigen::VectorXd clamped = nnls(eye, vec({-0.5, 1.0}));
  EXPECT_EQ(clamped(0), 0.0);
  EXPECT_NEAR(clamped(1), 1.0, 1e-15);
}

TEST(Nnls, MatchesGridOracleInsideCone) {
  Rng rng(23);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(6, 3, [&] { return uniform(rng, 0.1, 1.0); });
    a += Eigen::MatrixXd::Identity(6, 3);
    Eigen::VectorXd x(3);
    x << uniform(rng, 0.1, 1), uniform(rng, 0.1, 1), 0.0;
    const Eigen::VectorXd y = a * x;
    const Eigen::VectorXd got = nnls(a, y);
    const Eigen::VectorXd grid = oracle::nnls_grid(a, y, 2.0, 7);
    EXPECT_LE((got - grid).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(Nnls, MatchesExhaustiveOracleAndKkt) {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index p = 3 + static_cast<Eigen::Index>(uniform_index(rng, 8));
    const Eigen::Index q = 1 + static_cast<Eigen::Index>(uniform_index(rng, 5));
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(p, q, [&] { return standard_normal(rng); });
    const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(p, [&] { return standard_normal(rng); });
    const Eigen::VectorXd x = nnls(a, y);
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_NEAR((a * x - y).norm(), (a * oracle::nnls_exhaustive(a, y) - y).norm(), 1e-9);
    // KKT: gradient nonnegative, zero on the support
    const Eigen::VectorXd g = a.transpose() * (a * x - y);
    for (Eigen::Index j = 0; j < q; ++j) {
      EXPECT_GE(g(j), -1e-8 * y.norm());
      if (x(j) > 0) EXPECT_LE(std::abs(g(j)), 1e-8 * y.norm());
    }
  }
}

TEST(Nnls, IterationCap) {
  Rng rng(31);
  const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(10, 6, [&] { return uniform01(rng); });
  const Eigen::VectorXd y = a * Eigen::VectorXd::Constant(6, 0.5);
  EXPECT_THROW(nnls(a, y, 1), ConvergenceError);
}

TEST(Fcls, Examples) {
  const EndmemberSet eye = make_set({{1, 0}, {0, 1}});
  const AbundanceVector a = fcls(eye, vec({0.3, 0.7}));
  EXPECT_EQ(a.kind, AbundanceKind::linear);
  EXPECT_NEAR(a.values(0), 0.3, 1e-9);
  EXPECT_NEAR(a.values(1), 0.7, 1e-9);

  const EndmemberSet x = make_set({{0.8, 0.2}, {0.2, 0.8}});
  const AbundanceVector mid = fcls(x, vec({0.5, 0.5}));
  EXPECT_NEAR(mid.values(0), 0.5, 1e-9);
  EXPECT_NEAR(mid.values(1), 0.5, 1e-9);

  const Eigen::VectorXd outside = vec({1.0, 0.0});
  const AbundanceVector o = fcls(x, outside);
  expect_on_simplex(o.values);
  EXPECT_LE((o.values - oracle::simplex_grid2(x.matrix, outside, 1e-3)).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(Fcls, MatchesSimplexOracleOnRandomProblems) {
  Rng rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    EndmemberSet e;
    e.matrix = Eigen::MatrixXd::NullaryExpr(8, 3, [&] { return uniform(rng, 0.05, 1.0); });
    Eigen::VectorXd pixel = e.matrix * random_simplex(rng, 3);
    for (Eigen::Index i = 0; i < pixel.size(); ++i) pixel(i) += 0.05 * standard_normal(rng);
    const AbundanceVector w = fcls(e, pixel);
    expect_on_simplex(w.values);
    EXPECT_LE((w.values - oracle::simplex_grid(e.matrix, pixel, 1e-3)).cwiseAbs().maxCoeff(), 2e-3)
        << "trial " << trial;
  }
}

TEST(Fcls, ZeroPixelIsDegenerateOrValid) {
  const EndmemberSet eye = make_set({{1, 0}, {0, 1}});
  // the sum-to-one row keeps the solution away from zero
  expect_on_simplex(fcls(eye, vec({0.0, 0.0})).values);
  EXPECT_THROW(fcls(eye, vec({1.0, 2.0, 3.0})), ShapeError);
}

TEST(BfmForward, Examples) {
  const EndmemberSet x = make_set({{1, 0.5}, {0.2, 1}});
  const Eigen::VectorXd r = bfm_forward(x, vec({0.5, 0.5}));
  EXPECT_NEAR(r(0), 0.65, 1e-15);
  EXPECT_NEAR(r(1), 0.875, 1e-15);
  EXPECT_EQ(bfm_forward(x, vec({1.0, 0.0})), x.matrix.col(0));

  const EndmemberSet single = make_set({{0.3, 0.6, 0.9}});
  EXPECT_EQ(bfm_forward(single, vec({0.7})), 0.7 * single.matrix.col(0));

  Rng rng(41);
  EndmemberSet e;
  e.matrix = Eigen::MatrixXd::NullaryExpr(6, 4, [&] { return uniform01(rng); });
  const Eigen::VectorXd w = random_simplex(rng, 4);
  EXPECT_LE((bfm_forward(e, w) - oracle::bfm(e.matrix, w)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BfmUnmix, SelfInversion) {
  const EndmemberSet x = make_set({{1, 0.5, 0.2, 0.1}, {0.2, 1, 0.3, 0.6}});
  const Eigen::VectorXd pixel = bfm_forward(x, vec({0.5, 0.5}));
  const AbundanceVector w = bfm_unmix(x, pixel, fcls(x, pixel));
  EXPECT_EQ(w.kind, AbundanceKind::nonlinear);
  EXPECT_NEAR(w.values(0), 0.5, 1e-4);
  EXPECT_NEAR(w.values(1), 0.5, 1e-4);
  expect_on_simplex(w.values);
}

TEST(BfmUnmix, VertexCase) {
  const EndmemberSet x = make_set({{1, 0.5, 0.2, 0.1}, {0.2, 1, 0.3, 0.6}, {0.4, 0.4, 0.9, 0.2}});
  const Eigen::VectorXd pixel = x.matrix.col(0);
  const AbundanceVector w = bfm_unmix(x, pixel, fcls(x, pixel));
  EXPECT_NEAR(w.values(0), 1.0, 1e-4);
  EXPECT_NEAR(w.values(1), 0.0, 1e-4);
  EXPECT_NEAR(w.values(2), 0.0, 1e-4);
}

TEST(BfmUnmix, RandomRecoveryBeatsFcls) {
  const EndmemberSet e = gen_endmembers(3, 16, 5);
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd truth = random_simplex(rng, 3);
    const Eigen::VectorXd pixel = bfm_forward(e, truth);
    const AbundanceVector lin = fcls(e, pixel);
    std::vector<double> trace;
    const AbundanceVector w = bfm_unmix(e, pixel, lin, {}, &trace);
    expect_on_simplex(w.values);
    EXPECT_LE((w.values - truth).cwiseAbs().maxCoeff(), 1e-2) << "trial " << trial;
    EXPECT_LE((bfm_forward(e, w.values) - pixel).norm(), (e.matrix * lin.values - pixel).norm());
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]);
  }
}

TEST(ProjectToSimplex, KnownCases) {
  EXPECT_TRUE(project_to_simplex(vec({0.2, 0.3, 0.5})).isApprox(vec({0.2, 0.3, 0.5})));
  EXPECT_TRUE(project_to_simplex(vec({2.0, 0.0})).isApprox(vec({1.0, 0.0})));
  EXPECT_TRUE(project_to_simplex(vec({1.0, 1.0})).isApprox(vec({0.5, 0.5})));
  Rng rng(47);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(5, [&] { return 3 * standard_normal(rng); });
    expect_on_simplex(project_to_simplex(v), 1e-12);
  }
}

TEST(Cubes, PureAndConstantPixels) {
  const EndmemberSet e = make_set({{1, 0, 0.2}, {0, 1, 0.3}, {0.1, 0.1, 1}});
  HyperCube pure(2, 2, 3);
  const std::size_t which[4] = {0, 1, 2, 0};
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t k = 0; k < 3; ++k) pure.data[k * 4 + p] = static_cast<float>(e.matrix(k, which[p]));
  const AbundanceCube lin = fcls_cube(e, pure);
  const AbundanceCube non = bfm_cube(e, pure, &lin);
  for (const AbundanceCube* c : {&lin, &non})
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(c->at(p, k), k == which[p] ? 1.0 : 0.0, 1e-4);

  HyperCube flat(3, 3, 3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t p = 0; p < 9; ++p) flat.data[k * 9 + p] = 0.3f + 0.1f * static_cast<float>(k);
  const AbundanceCube f = fcls_cube(e, flat);
  for (std::size_t p = 1; p < 9; ++p)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(f.at(p, k), f.at(0, k));
}

TEST(Cubes, SyntheticLinearSceneRecovery) {
  SceneConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.seed = 3;
  const Scene s = gen_scene(cfg);
  const AbundanceCube a = fcls_cube(s.endmembers, s.pair.time1);
  a.validate();
  double err = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) err += std::abs(a.data[i] - s.abundances1.data[i]);
  EXPECT_LE(err / static_cast<double>(a.data.size()), 1e-3);
}

TEST(Cubes, AbundanceCubeCubeRoundTrip) {
  AbundanceCube a;
  a.height = 2;
  a.width = 3;
  a.m = 2;
  a.kind = AbundanceKind::nonlinear;
  for (std::size_t p = 0; p < 6; ++p) {
    a.data.push_back(0.25 * static_cast<double>(p % 5));
    a.data.push_back(1.0 - a.data.back());
  }
  const AbundanceCube back = AbundanceCube::from_cube(a.to_cube(), AbundanceKind::nonlinear);
  EXPECT_EQ(back.data, a.data);
}

TEST(Endmembers, TextRoundTrip) {
  testing_support::ScratchDir dir;
  const EndmemberSet e = gen_endmembers(4, 12, 9);
  write_endmembers(e, dir / "e.txt");
  const EndmemberSet back = read_endmembers(dir / "e.txt");
  EXPECT_EQ(back.matrix, e.matrix);
}
