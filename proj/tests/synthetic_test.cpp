#include <gtest/gtest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "typr/errors.hpp"
#include "typr/image.hpp"
#include "typr/synthetic.hpp"

using namespace typr;

namespace {

const Listing& product(const Dataset& d, std::uint64_t id) { return d.products.at(static_cast<std::size_t>(id - 1)); }

}  // namespace

TEST(Synthetic, SmallestCorpusPairsQueryWithTruth) {
  SyntheticCorpusSpec spec;
  spec.n_queries = 1;
  spec.n_products = 1;
  const Dataset d = generate_synthetic_corpus(spec);
  ASSERT_EQ(d.queries.size(), 1u);
  ASSERT_EQ(d.products.size(), 1u);
  EXPECT_EQ(d.queries[0].truth_id, d.products[0].id);
  EXPECT_EQ(d.queries[0].title, d.products[0].title);
  EXPECT_FALSE(d.queries[0].title.empty());
}

TEST(Synthetic, TruthsShareTitleAndClass) {
  const Dataset d = generate_synthetic_corpus(SyntheticCorpusSpec{});
  ASSERT_EQ(d.queries.size(), 200u);
  ASSERT_EQ(d.products.size(), 2000u);
  std::set<std::uint64_t> truths;
  for (const auto& q : d.queries) {
    ASSERT_TRUE(q.truth_id);
    truths.insert(*q.truth_id);
    const Listing& p = product(d, *q.truth_id);
    EXPECT_EQ(p.title, q.title);
    EXPECT_EQ(synthetic_class_of(p), synthetic_class_of(q));
    EXPECT_GE(q.id, 1'000'000u);
    // The query photo is a separate draw, not a copy.
    EXPECT_FALSE(*p.image == *q.image);
  }
  EXPECT_EQ(truths.size(), 200u);
}

TEST(Synthetic, TitlesAreUniqueAndIdsDense) {
  const Dataset d = generate_synthetic_corpus(SyntheticCorpusSpec{});
  std::set<std::string> titles;
  for (std::size_t i = 0; i < d.products.size(); ++i) {
    EXPECT_EQ(d.products[i].id, i + 1);
    titles.insert(d.products[i].title);
  }
  EXPECT_EQ(titles.size(), d.products.size());
}

TEST(Synthetic, EveryQueryHasManySameClassDistractors) {
  const Dataset d = generate_synthetic_corpus(SyntheticCorpusSpec{});
  std::map<int, int> per_class;
  for (const auto& p : d.products) ++per_class[synthetic_class_of(p)];
  for (const auto& q : d.queries) EXPECT_GE(per_class[synthetic_class_of(q)] - 1, 100);
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  typr::testing::TempDir a("synth"), b("synth");
  SyntheticCorpusSpec spec;
  spec.n_queries = 10;
  spec.n_products = 50;
  spec.image_size = 32;
  Dataset da = generate_synthetic_corpus(spec);
  Dataset db = generate_synthetic_corpus(spec);
  write_dataset(da, a.path());
  write_dataset(db, b.path());
  for (const auto* name : {"queries.jsonl", "products.jsonl"}) EXPECT_EQ(read_file(a / name), read_file(b / name));
  for (std::size_t i = 0; i < da.products.size(); ++i)
    EXPECT_EQ(read_file(da.products[i].image_path), read_file(db.products[i].image_path));
  EXPECT_TRUE(std::filesystem::exists(a / "images"));

  spec.seed = 1;
  const Dataset other = generate_synthetic_corpus(spec);
  EXPECT_FALSE(*other.products[0].image == *da.products[0].image && other.products[0].title == da.products[0].title);
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticCorpusSpec spec;
  spec.n_products = 100;
  spec.n_queries = 101;
  EXPECT_THROW(generate_synthetic_corpus(spec), ConfigError);
  spec = {};
  spec.title_slots = {{"A", "B"}, {"C"}};
  spec.n_queries = 1;
  spec.n_products = 3;
  EXPECT_EQ(spec.title_capacity(), 2u);
  EXPECT_THROW(generate_synthetic_corpus(spec), ConfigError);
  spec = {};
  spec.n_classes = 11;
  EXPECT_THROW(generate_synthetic_corpus(spec), ConfigError);
  spec = {};
  spec.shape_contrast = 1.5;
  EXPECT_THROW(generate_synthetic_corpus(spec), ConfigError);
}
