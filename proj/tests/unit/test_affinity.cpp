#include <gtest/gtest.h>

#include <cmath>

#include "getnet/affinity.hpp"
#include "getnet/errors.hpp"
#include "getnet/random.hpp"
#include "oracles.hpp"

using namespace getnet;

namespace {

AbundanceCube abundance(std::size_t h, std::size_t w, std::size_t m, AbundanceKind kind, Rng& rng) {
  AbundanceCube a;
  a.height = h;
  a.width = w;
  a.m = m;
  a.kind = kind;
  for (std::size_t p = 0; p < h * w; ++p) {
    double sum = 0;
    std::vector<double> v(m);
    for (double& x : v) sum += (x = uniform01(rng));
    for (double x : v) a.data.push_back(x / sum);
  }
  return a;
}

StackedCube random_stacked(std::size_t h, std::size_t w, std::size_t b, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  HyperCube c(h, w, b);
  for (float& v : c.data) v = static_cast<float>(uniform(rng, 0.05, 1.0));
  return stack_sources(c, abundance(h, w, m, AbundanceKind::linear, rng),
                       abundance(h, w, m, AbundanceKind::nonlinear, rng));
}

}  // namespace

TEST(StackSources, LayoutAndErrors) {
  HyperCube c(1, 1, 2);
  c.data = {0.3f, 0.7f};
  AbundanceCube lin{1, 1, 1, AbundanceKind::linear, {1.0}};
  AbundanceCube non{1, 1, 1, AbundanceKind::nonlinear, {1.0}};
  const StackedCube s = stack_sources(c, lin, non);
  ASSERT_EQ(s.n(), 4u);
  EXPECT_DOUBLE_EQ(s.data[0], static_cast<double>(0.3f));
  EXPECT_DOUBLE_EQ(s.data[1], static_cast<double>(0.7f));
  EXPECT_EQ(s.data[2], 1.0);
  EXPECT_EQ(s.data[3], 1.0);

  EXPECT_THROW(stack_sources(c, non, non), ShapeError);
  AbundanceCube empty{1, 1, 0, AbundanceKind::linear, {}};
  AbundanceCube empty_n{1, 1, 0, AbundanceKind::nonlinear, {}};
  EXPECT_THROW(stack_sources(c, empty, empty_n), ShapeError);

  Rng rng(1);
  HyperCube big(3, 4, 5);
  const AbundanceCube l = abundance(3, 4, 2, AbundanceKind::linear, rng);
  const AbundanceCube nl = abundance(3, 4, 2, AbundanceKind::nonlinear, rng);
  const StackedCube t = stack_sources(big, l, nl);
  for (std::size_t p = 0; p < 12; ++p)
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ(t.pixel(p)[5 + k], l.at(p, k));
      EXPECT_EQ(t.pixel(p)[5 + 2 + k], nl.at(p, k));
    }
}

TEST(RegionOf, SevenBySevenGrid) {
  const RegionLayout l{3, 2};
  EXPECT_EQ(l.region_of(0, 0), Region::A);
  EXPECT_EQ(l.region_of(0, 4), Region::C);
  EXPECT_EQ(l.region_of(4, 4), Region::B);
  EXPECT_EQ(l.region_of(3, 3), Region::B);
  EXPECT_EQ(l.region_of(3, 5), Region::D);
  EXPECT_EQ(l.region_of(5, 3), Region::D);
  EXPECT_EQ(l.region_of(5, 5), Region::E);
  EXPECT_EQ(l.region_of(6, 2), Region::C);
  EXPECT_EQ(l.region_of(2, 2), Region::A);
  EXPECT_THROW(l.region_of(7, 0), ShapeError);
}

TEST(RegionOf, PartitionCounts) {
  for (std::size_t b : {1u, 3u, 8u})
    for (std::size_t m : {1u, 2u, 4u}) {
      const RegionLayout l{b, m};
      std::size_t counts[5] = {};
      for (std::size_t i = 0; i < l.n(); ++i)
        for (std::size_t j = 0; j < l.n(); ++j) ++counts[static_cast<int>(l.region_of(i, j))];
      EXPECT_EQ(counts[0], b * b);
      EXPECT_EQ(counts[1], m * m);
      EXPECT_EQ(counts[2], 2 * b * 2 * m);
      EXPECT_EQ(counts[3], 2 * m * m);
      EXPECT_EQ(counts[4], m * m);
      EXPECT_EQ(counts[0] + counts[1] + counts[2] + counts[3] + counts[4], l.n() * l.n());
    }
}

TEST(MixedAffinity, TwoByTwoExample) {
  const std::vector<double> p{2, 4};
  const MixedAffinityMatrix k = mixed_affinity(p, p, RegionLayout{2, 0});
  EXPECT_EQ(k(0, 0), 1.0);
  EXPECT_EQ(k(0, 1), 1.5);
  EXPECT_EQ(k(1, 0), 0.0);
  EXPECT_EQ(k(1, 1), 1.0);
}

TEST(MixedAffinity, FlooredDenominator) {
  const RegionLayout l{1, 1};
  const std::vector<double> p1{0.5, 0.2, 0.1};
  const std::vector<double> p2{0.5, 0.0, -1e-9};
  const MixedAffinityMatrix k = mixed_affinity(p1, p2, l, 1e-6);
  for (double v : k.values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_DOUBLE_EQ(k(1, 1), 1.0 - 0.2 / 1e-6);   // sign(0) = +
  EXPECT_DOUBLE_EQ(k(2, 2), 1.0 - (0.1 + 1e-9) / -1e-6);
}

TEST(MixedAffinity, MatchesNaiveOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + uniform_index(rng, 10), m = 1 + uniform_index(rng, 4);
    std::vector<double> p1(b + 2 * m), p2(b + 2 * m);
    for (double& v : p1) v = uniform(rng, -1, 1);
    for (double& v : p2) v = uniform01(rng) < 0.1 ? 0.0 : uniform(rng, -1, 1);
    const MixedAffinityMatrix k = mixed_affinity(p1, p2, RegionLayout{b, m});
    EXPECT_EQ(k.values, oracle::affinity(p1, p2, b, kAffinityEps));
  }
}

// The three structural properties checked over 1000 random stacked pairs.
TEST(MixedAffinity, Properties) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = 1 + uniform_index(rng, 40), m = 1 + uniform_index(rng, 6);
    const RegionLayout l{b, m};
    const std::size_t n = l.n();
    std::vector<double> p1(n), p2(n);
    for (double& v : p1) v = uniform(rng, 0.0, 1.0);
    for (double& v : p2) v = uniform01(rng) < 0.05 ? 0.0 : uniform(rng, 0.0, 1.0);
    const MixedAffinityMatrix k = mixed_affinity(p1, p2, l);
    const MixedAffinityMatrix same = mixed_affinity(p1, p1, l);
    const double s = uniform(rng, 0.1, 10.0);
    std::vector<double> q1(n), q2(n);
    for (std::size_t i = 0; i < n; ++i) {
      q1[i] = s * p1[i];
      q2[i] = s * p2[i];
    }
    const MixedAffinityMatrix scaled = mixed_affinity(q1, q2, l);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const bool c = l.region_of(i, j) == Region::C;
        if (c) {
          ASSERT_EQ(k(i, j), 0.0);
          continue;
        }
        ASSERT_TRUE(std::isfinite(k(i, j)));
        if (i == j && std::abs(p1[j]) >= kAffinityEps) ASSERT_EQ(same(i, j), 1.0);
        if (std::abs(p2[j]) >= kAffinityEps && std::abs(q2[j]) >= kAffinityEps)
          ASSERT_NEAR(scaled(i, j), k(i, j), 1e-12 * std::max(1.0, std::abs(k(i, j))));
      }
  }
}

TEST(AffinityBatch, ConsistencyWithLoop) {
  const StackedCube s1 = random_stacked(4, 4, 5, 2, 1);
  const StackedCube s2 = random_stacked(4, 4, 5, 2, 2);
  EXPECT_TRUE(affinity_batch(s1, s2, std::vector<std::size_t>{}).empty());
  std::vector<std::size_t> all(16);
  for (std::size_t i = 0; i < 16; ++i) all[i] = i;
  const auto batch = affinity_batch(s1, s2, all);
  ASSERT_EQ(batch.size(), 16u);
  for (std::size_t p = 0; p < 16; ++p) {
    std::vector<double> a(s1.pixel(p).begin(), s1.pixel(p).end()), b(s2.pixel(p).begin(), s2.pixel(p).end());
    EXPECT_EQ(batch[p].values, oracle::affinity(a, b, 5, kAffinityEps));
  }
  EXPECT_THROW(affinity_batch(s1, s2, std::vector<std::size_t>{16}), ShapeError);

  const StackedPairSource src(s1, s2);
  std::vector<float> buf(src.side() * src.side());
  src.fill(9, buf);
  for (std::size_t i = 0; i < buf.size(); ++i) EXPECT_EQ(buf[i], static_cast<float>(batch[9].values[i]));
}
