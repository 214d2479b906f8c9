#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "typr/errors.hpp"
#include "typr/fusion.hpp"

using namespace typr;
using typr::testing::random_unit;
using typr::testing::unit_embedding;

namespace {

Embedding vec(std::initializer_list<float> values, Modality m = Modality::Image) {
  Eigen::VectorXf v(static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), v.data());
  return Embedding{v, m, "test"};
}

}  // namespace

TEST(Cosine, IdentityOrthogonalityAndHandArithmetic) {
  std::mt19937_64 rng(1);
  const Embedding e = unit_embedding(random_unit(rng, 32));
  EXPECT_NEAR(cosine(e, e), 1.0, 1e-6);
  EXPECT_NEAR(cosine(vec({1, 0, 0}), vec({0, 1, 0})), 0.0, 1e-6);
  EXPECT_NEAR(cosine(vec({0.6f, 0.8f}), vec({1, 0})), 0.6, 1e-6);
}

TEST(Cosine, RejectsMismatchAndZero) {
  EXPECT_THROW(cosine(vec({1, 0}), vec({1, 0, 0})), InvalidInput);
  EXPECT_THROW(cosine(vec({0, 0}), vec({1, 0})), InvalidInput);
}

TEST(Fuse, SumOfIdenticalInputsKeepsDirection) {
  std::mt19937_64 rng(2);
  const Embedding e = unit_embedding(random_unit(rng, 16));
  const Embedding f = fuse(e, e, FusionStrategy::Sum);
  EXPECT_EQ(f.modality, Modality::Fused);
  EXPECT_LT((f.vector - e.vector).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(Fuse, SumOfOrthogonalIsDiagonal) {
  const Embedding f = fuse(vec({1, 0}), vec({0, 1}, Modality::Text), FusionStrategy::Sum);
  EXPECT_NEAR(f.vector[0], 1.0 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(f.vector[1], 1.0 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(f.vector.cast<double>().norm(), 1.0, 1e-6);
}

TEST(Fuse, SumIsSymmetricBitForBit) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Embedding a = unit_embedding(random_unit(rng, 64));
    const Embedding b = unit_embedding(random_unit(rng, 64));
    EXPECT_EQ(fuse(a, b, FusionStrategy::Sum).vector, fuse(b, a, FusionStrategy::Sum).vector);
  }
}

TEST(Fuse, AntipodalSumIsDegenerate) {
  EXPECT_THROW(fuse(vec({1, 0}), vec({-1, 0}), FusionStrategy::Sum), DegenerateFusion);
}

TEST(Fuse, RejectsMismatchedDims) {
  EXPECT_THROW(fuse(vec({1, 0}), vec({1, 0, 0}), FusionStrategy::Sum), InvalidInput);
  EXPECT_THROW(fuse(vec({1, 0}), vec({1, 0, 0}), FusionStrategy::Concat), InvalidInput);
}

TEST(Fuse, ConcatIsUnitAndDoubleWidth) {
  const Embedding f = fuse(vec({0.6f, 0.8f}), vec({1, 0}), FusionStrategy::Concat);
  ASSERT_EQ(f.dim(), 4);
  EXPECT_NEAR(f.vector.cast<double>().norm(), 1.0, 1e-6);
  EXPECT_NEAR(f.vector[0], 0.6 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(f.vector[2], 1.0 / std::sqrt(2.0), 1e-7);
}

TEST(Fuse, InputsAreRenormalizedFirst) {
  const Embedding f = fuse(vec({3, 0}), vec({0, 1}), FusionStrategy::Sum);
  EXPECT_NEAR(f.vector[0], f.vector[1], 1e-7);
}

TEST(Fuse, ConcatCosineIsMeanOfHalves) {
  std::mt19937_64 rng(4);
  for (int dim : {8, 256}) {
    for (int i = 0; i < 1000; ++i) {
      const Embedding a1 = unit_embedding(random_unit(rng, dim)), a2 = unit_embedding(random_unit(rng, dim));
      const Embedding b1 = unit_embedding(random_unit(rng, dim)), b2 = unit_embedding(random_unit(rng, dim));
      const double lhs = cosine(fuse(a1, a2, FusionStrategy::Concat), fuse(b1, b2, FusionStrategy::Concat));
      const double rhs = (cosine(a1, b1) + cosine(a2, b2)) / 2.0;
      ASSERT_NEAR(lhs, rhs, 1e-6) << "dim " << dim << " pair " << i;
    }
  }
}

TEST(Fuse, OutputsAreUnitNorm) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Embedding a = unit_embedding(random_unit(rng, 48)), b = unit_embedding(random_unit(rng, 48));
    for (auto s : {FusionStrategy::Sum, FusionStrategy::Concat})
      ASSERT_NEAR(fuse(a, b, s).vector.cast<double>().norm(), 1.0, 1e-6);
  }
}

TEST(Cosine, RankingInvariantUnderPositiveScaling) {
  std::mt19937_64 rng(6);
  std::vector<Eigen::VectorXf> pool;
  for (int i = 0; i < 200; ++i) pool.push_back(random_unit(rng, 24));
  auto ranking = [&](const Eigen::VectorXf& q) {
    std::vector<double> s;
    for (const auto& p : pool) s.push_back(cosine(q, p));
    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s[a] > s[b]; });
    return order;
  };
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXf q = random_unit(rng, 24);
    const auto base = ranking(q);
    for (float lambda : {0.001f, 0.5f, 3.0f, 1000.0f}) EXPECT_EQ(ranking(q * lambda), base);
  }
}

TEST(Fusion, ParseNames) {
  EXPECT_EQ(parse_fusion("sum"), FusionStrategy::Sum);
  EXPECT_EQ(parse_fusion("concat"), FusionStrategy::Concat);
  EXPECT_THROW(parse_fusion("max"), InvalidInput);
}
