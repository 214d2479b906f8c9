#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"
#include "typr/errors.hpp"
#include "typr/knn.hpp"

using namespace typr;
using typr::testing::random_unit;

namespace {

KnnIndex random_index(std::mt19937_64& rng, int n, int dim, std::uint64_t first_id = 1) {
  KnnIndex::Matrix m(dim, n);
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < n; ++i) {
    m.col(i) = random_unit(rng, dim);
    ids.push_back(first_id + static_cast<std::uint64_t>(i));
  }
  return build_index(std::move(ids), std::move(m), "rand");
}

// Every score, a full sort, then the first k.
std::vector<std::uint64_t> naive_top_k(const KnnIndex& index, const Eigen::VectorXf& q, int k) {
  std::vector<std::pair<double, std::uint64_t>> all;
  for (std::size_t c = 0; c < index.size(); ++c) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < index.dim(); ++d)
      s += static_cast<double>(index.vectors()(d, static_cast<Eigen::Index>(c))) * static_cast<double>(q[d]);
    all.emplace_back(s, index.ids()[c]);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::uint64_t> out;
  for (int i = 0; i < k && i < static_cast<int>(all.size()); ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
  return out;
}

std::vector<std::uint64_t> ids_of(const ResultList& r) {
  std::vector<std::uint64_t> out;
  for (const auto& h : r.hits) out.push_back(h.id);
  return out;
}

Embedding emb(std::initializer_list<float> v) {
  Eigen::VectorXf x(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), x.data());
  return Embedding{x, Modality::Image, "m"};
}

}  // namespace

TEST(BuildIndex, OrthonormalFixture) {
  const std::vector<IndexEntry> entries{{1, emb({1, 0, 0})}, {2, emb({0, 1, 0})}, {3, emb({0, 0, 1})}};
  const KnnIndex index = build_index(entries);
  EXPECT_EQ(index.size(), 3u);
  EXPECT_EQ(index.dim(), 3);
  EXPECT_EQ(index.model_id(), "m");
}

TEST(BuildIndex, DuplicateIdIsNamed) {
  const std::vector<IndexEntry> entries{{7, emb({1, 0})}, {3, emb({0, 1})}, {7, emb({0.6f, 0.8f})}};
  try {
    build_index(entries);
    FAIL();
  } catch (const BuildError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos) << e.what();
  }
}

TEST(BuildIndex, RejectsNonUnitAndMixedDims) {
  EXPECT_THROW(build_index(std::vector<IndexEntry>{{1, emb({1, 0})}, {2, emb({0.5f, 0})}}), BuildError);
  EXPECT_THROW(build_index(std::vector<IndexEntry>{{1, emb({1, 0})}, {2, emb({1, 0, 0})}}), BuildError);
  EXPECT_THROW(build_index(std::vector<IndexEntry>{}), BuildError);
  EXPECT_NO_THROW(build_index(std::vector<IndexEntry>{{1, emb({1.00005f, 0})}}));
}

TEST(Search, HandArithmeticExample) {
  const std::vector<IndexEntry> entries{{1, emb({1, 0})}, {2, emb({0, 1})}, {3, emb({0.6f, 0.8f})}};
  const KnnIndex index = build_index(entries);
  const ResultList r = search(index, emb({1, 0}), 2);
  ASSERT_EQ(r.hits.size(), 2u);
  EXPECT_EQ(r.hits[0].id, 1u);
  EXPECT_NEAR(r.hits[0].score, 1.0, 1e-6);
  EXPECT_EQ(r.hits[1].id, 3u);
  EXPECT_NEAR(r.hits[1].score, 0.6, 1e-6);
}

TEST(Search, SelfRetrieval) {
  std::mt19937_64 rng(11);
  const KnnIndex index = random_index(rng, 300, 32);
  const Eigen::VectorXf v7 = index.vectors().col(6);
  const ResultList r = search(index, std::span<const float>(v7.data(), 32), 3);
  EXPECT_EQ(r.hits[0].id, 7u);
  EXPECT_NEAR(r.hits[0].score, 1.0, 1e-6);
}

TEST(Search, TiesGoToLowerId) {
  const std::vector<IndexEntry> entries{{9, emb({0, 1})}, {4, emb({0, 1})}, {6, emb({1, 0})}};
  const KnnIndex index = build_index(entries);
  const ResultList r = search(index, emb({0, 1}), 3);
  EXPECT_EQ(ids_of(r), (std::vector<std::uint64_t>{4, 9, 6}));
  EXPECT_EQ(r.hits[0].score, r.hits[1].score);
}

TEST(Search, KLargerThanPoolAndValidation) {
  const std::vector<IndexEntry> entries{{1, emb({1, 0})}, {2, emb({0, 1})}};
  const KnnIndex index = build_index(entries);
  EXPECT_EQ(search(index, emb({1, 0}), 10).hits.size(), 2u);
  EXPECT_THROW(search(index, emb({1, 0}), 0), InvalidInput);
  EXPECT_THROW(search(index, emb({1, 0, 0}), 1), InvalidInput);
}

TEST(Search, MatchesNaiveOracle) {
  std::mt19937_64 rng(12);
  const KnnIndex index = random_index(rng, 5000, 64);
  for (int q = 0; q < 100; ++q) {
    const Eigen::VectorXf query = random_unit(rng, 64);
    const auto expected = naive_top_k(index, query, 10);
    ASSERT_EQ(ids_of(search(index, std::span<const float>(query.data(), 64), 10)), expected) << q;
  }
}

TEST(Search, ParallelEqualsSequentialWithManyTies) {
  // Quantized vectors produce many bit-equal scores.
  std::mt19937_64 rng(13);
  const int n = 20000, dim = 4;
  KnnIndex::Matrix m(dim, n);
  std::vector<std::uint64_t> ids;
  const std::vector<Eigen::Vector4f> palette{{1, 0, 0, 0}, {0, 1, 0, 0}, {0.6f, 0.8f, 0, 0}, {0, 0, 0.8f, 0.6f}};
  for (int i = 0; i < n; ++i) {
    m.col(i) = palette[rng() % palette.size()];
    ids.push_back(static_cast<std::uint64_t>((i * 7919) % n) + 1);
  }
  const KnnIndex index = build_index(std::move(ids), std::move(m), "q");
  for (const auto& q : palette) {
    const Eigen::VectorXf qv = q;
    const auto seq = search(index, std::span<const float>(qv.data(), dim), 50, 1);
    for (unsigned t : {2u, 3u, 8u, 0u}) EXPECT_EQ(search(index, std::span<const float>(qv.data(), dim), 50, t), seq);
    EXPECT_EQ(ids_of(seq), naive_top_k(index, qv, 50));
  }
}

TEST(Search, BatchKeepsQueryOrder) {
  std::mt19937_64 rng(14);
  const KnnIndex index = random_index(rng, 1000, 16);
  std::vector<Embedding> queries;
  for (int i = 0; i < 40; ++i) queries.push_back(typr::testing::unit_embedding(random_unit(rng, 16)));
  const auto batch = search_batch(index, queries, 5, 4);
  ASSERT_EQ(batch.size(), queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) EXPECT_EQ(batch[i], search(index, queries[i], 5));
}

TEST(Search, ScoresNonIncreasing) {
  std::mt19937_64 rng(15);
  const KnnIndex index = random_index(rng, 2000, 8);
  const Eigen::VectorXf q = random_unit(rng, 8);
  const ResultList r = search(index, std::span<const float>(q.data(), 8), 100, 4);
  for (std::size_t i = 1; i < r.hits.size(); ++i) EXPECT_TRUE(ranks_before(r.hits[i - 1], r.hits[i]));
}

TEST(BuildIndex, SneakerCatalogueScale) {
  // Product count of the largest catalogue in the experiments.
  std::mt19937_64 rng(16);
  const int n = 139567, dim = 256;
  KnnIndex::Matrix m(dim, n);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) m(d, i) = g(rng);
    m.col(i).normalize();
  }
  std::vector<std::uint64_t> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  const KnnIndex index = build_index(std::move(ids), std::move(m), "scale");
  EXPECT_EQ(index.size(), static_cast<std::size_t>(n));
  const Eigen::VectorXf q = index.vectors().col(n - 1);
  EXPECT_EQ(search(index, std::span<const float>(q.data(), dim), 1, 0).hits[0].id, static_cast<std::uint64_t>(n));
}
