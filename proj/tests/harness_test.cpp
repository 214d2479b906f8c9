#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "typr/errors.hpp"
#include "typr/fusion.hpp"
#include "typr/harness.hpp"
#include "typr/report.hpp"
#include "typr/synthetic.hpp"

using namespace typr;

namespace {

QueryOutcome outcome_with_truth_at(int rank, std::uint64_t truth = 100) {
  QueryOutcome o;
  o.truth_id = truth;
  for (int r = 1; r <= 10; ++r)
    o.results.hits.push_back({r == rank ? truth : static_cast<std::uint64_t>(r), 1.0 - r * 0.01});
  return o;
}

Dataset small_corpus(int queries = 12, int products = 60, std::uint64_t seed = 0) {
  SyntheticCorpusSpec spec;
  spec.n_queries = queries;
  spec.n_products = products;
  spec.image_size = 64;
  spec.seed = seed;
  return generate_synthetic_corpus(spec);
}

std::vector<Listing> without_titles(std::vector<Listing> listings) {
  for (auto& l : listings) l.title.clear();
  return listings;
}

// Straight-line embedding of one listing, without the harness.
Embedding oracle_embed(const Listing& l, Mode mode, const RenderSpec& spec, const EncoderHandle& img,
                       const EncoderHandle& txt) {
  const Image source = *l.image;
  const Image input = is_rendered(mode) ? render_text(source, l.title, spec, typr::testing::shipped_font()).image : source;
  Embedding e = embed_image_reference(img, input);
  if (const auto f = fusion_of(mode)) e = fuse(e, embed_text_reference(txt, l.title), *f);
  return e;
}

}  // namespace

TEST(AccAtK, HandComputedRanks) {
  const std::vector<QueryOutcome> outcomes{outcome_with_truth_at(1), outcome_with_truth_at(2),
                                           outcome_with_truth_at(5), outcome_with_truth_at(1)};
  EXPECT_DOUBLE_EQ(acc_at_k(outcomes, 1), 0.5);
  EXPECT_DOUBLE_EQ(acc_at_k(outcomes, 3), 0.75);
  EXPECT_DOUBLE_EQ(acc_at_k(outcomes, 5), 1.0);
  EXPECT_THROW(acc_at_k(outcomes, 0), InvalidInput);
  EXPECT_THROW(acc_at_k(std::span<const QueryOutcome>{}, 1), InvalidInput);
}

TEST(AccAtK, MonotoneInKAndBounded) {
  std::mt19937_64 rng(21);
  std::vector<QueryOutcome> outcomes;
  for (int i = 0; i < 300; ++i) outcomes.push_back(outcome_with_truth_at(static_cast<int>(rng() % 12)));
  double previous = 0.0;
  for (int k = 1; k <= 12; ++k) {
    const double a = acc_at_k(outcomes, k);
    EXPECT_GE(a, previous);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    previous = a;
  }
}

TEST(Modes, NamesAndLetters) {
  EXPECT_EQ(parse_mode("A"), Mode::RawSum);
  EXPECT_EQ(parse_mode("B"), Mode::RenderedImageOnly);
  EXPECT_EQ(parse_mode("C"), Mode::RenderedSum);
  for (Mode m : all_modes()) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("D"), InvalidInput);
}

TEST(Modes, RawImageOnlyIsTheImageEncoder) {
  const Dataset d = small_corpus();
  RunContext context;
  const ExperimentConfig c;
  for (const auto& l : d.products) {
    const Embedding e = embed_listing(l, Mode::RawImageOnly, c.render_spec, c.image_encoder, c.text_encoder, context);
    EXPECT_EQ(e.vector, embed_image_reference(c.image_encoder, *l.image).vector);
  }
}

TEST(Modes, EmptyTitlesCollapseRenderedOntoRaw) {
  const Dataset d = small_corpus();
  const auto products = without_titles(d.products);
  RunContext context;
  const ExperimentConfig c;
  for (const auto& [rendered, raw] : {std::pair{Mode::RenderedImageOnly, Mode::RawImageOnly},
                                      std::pair{Mode::RenderedSum, Mode::RawSum},
                                      std::pair{Mode::RenderedConcat, Mode::RawConcat}}) {
    const auto a = embed_listings(products, rendered, c.render_spec, c.image_encoder, c.text_encoder, context);
    const auto b = embed_listings(products, raw, c.render_spec, c.image_encoder, c.text_encoder, context);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].vector, b[i].vector) << to_string(rendered);
  }
}

TEST(Modes, HarnessMatchesStraightLineOracle) {
  const Dataset d = small_corpus(10, 50, 3);
  ExperimentConfig base;
  base.k_values = {1, 3, 50};
  for (Mode mode : all_modes()) {
    ExperimentConfig config = base;
    config.mode = mode;
    const MetricsReport report = run_experiment(config, d.queries, d.products);

    std::vector<Embedding> p;
    for (const auto& l : d.products)
      p.push_back(oracle_embed(l, mode, config.render_spec, config.image_encoder, config.text_encoder));
    for (std::size_t qi = 0; qi < d.queries.size(); ++qi) {
      const Listing& q = d.queries[qi];
      const Embedding qe = oracle_embed(q, mode, config.render_spec, config.image_encoder, config.text_encoder);
      std::vector<std::pair<double, std::uint64_t>> scored;
      for (std::size_t j = 0; j < p.size(); ++j) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < qe.dim(); ++t)
          s += static_cast<double>(qe.vector[t]) * static_cast<double>(p[j].vector[t]);
        scored.emplace_back(s, d.products[j].id);
      }
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      int rank = 0;
      for (std::size_t r = 0; r < scored.size(); ++r)
        if (scored[r].second == *q.truth_id) rank = static_cast<int>(r) + 1;
      EXPECT_EQ(report.ranks[qi].rank, rank) << to_string(mode) << " query " << q.id;
    }
    EXPECT_DOUBLE_EQ(report.acc(50), 1.0);
  }
}

TEST(Experiment, MissingTruthFailsBeforeEmbedding) {
  Dataset d = small_corpus(4, 20);
  d.queries[2].truth_id.reset();
  // No pixels: embedding would fail differently if it were attempted.
  for (auto& p : d.products) p.image.reset();
  try {
    run_experiment(ExperimentConfig{}, d.queries, d.products);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("truth_id"), std::string::npos) << e.what();
  }
  d = small_corpus(4, 20);
  d.queries[0].truth_id = 999;
  EXPECT_THROW(run_experiment(ExperimentConfig{}, d.queries, d.products), ConfigError);
}

TEST(Experiment, ReportIsDeterministicAndThreadIndependent) {
  const Dataset d = small_corpus(20, 100);
  ExperimentConfig c;
  c.mode = Mode::RenderedSum;
  c.threads = 1;
  const auto one = run_experiment(c, d.queries, d.products);
  c.threads = 4;
  const auto four = run_experiment(c, d.queries, d.products);
  EXPECT_EQ(one.to_json().dump(), four.to_json().dump());
  EXPECT_EQ(one.fingerprint, four.fingerprint);
  EXPECT_FALSE(one.to_json().contains("wall_ms"));
  EXPECT_TRUE(one.to_json(true).dump() != one.to_json().dump());
}

TEST(Experiment, FingerprintTracksConfig) {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.render_spec.color = named_color("red");
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  b = a;
  b.k_values = {3, 1, 1};
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
}

TEST(Experiment, ConfigJsonRoundTrip) {
  ExperimentConfig c;
  c.mode = Mode::RenderedConcat;
  c.render_spec.font_size_ratio = 0.5;
  c.render_spec.location = Location::Top;
  c.render_spec.color = named_color("orange");
  c.k_values = {1, 5};
  c.seed = 9;
  const ExperimentConfig back = ExperimentConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.fingerprint(), c.fingerprint());
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json{{"mode", "rendered_sum"}, {"k", {0}}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json{{"render", {{"font_size_ratio", 0}}}}), ConfigError);
}

TEST(Sweep, FourRatiosTwoModesIsEightCells) {
  FactorGrid grid;
  grid.ratios = {0.25, 0.5, 0.75, 1.0};
  const auto cells = expand_grid(ExperimentConfig{}, grid);
  ASSERT_EQ(cells.size(), 8u);
  std::set<std::pair<double, Mode>> seen;
  for (const auto& c : cells) seen.insert({c.spec.font_size_ratio, c.mode});
  EXPECT_EQ(seen.size(), 8u);
}

TEST(Sweep, FullGridIsTheCartesianProduct) {
  const auto cells = expand_grid(ExperimentConfig{}, FactorGrid::full());
  EXPECT_EQ(cells.size(), 4u * 5u * 3u * 2u);
}

TEST(Sweep, ColorCellsDifferOnlyInColor) {
  ExperimentConfig base;
  base.render_spec.location = Location::Bottom;
  base.render_spec.font_size_ratio = 0.75;
  FactorGrid grid;
  grid.colors = {named_color("red"), named_color("blue")};
  grid.modes = {Mode::RenderedImageOnly};
  const auto cells = expand_grid(base, grid);
  ASSERT_EQ(cells.size(), 2u);
  RenderSpec a = cells[0].spec, b = cells[1].spec;
  EXPECT_NE(a.color, b.color);
  a.color = b.color;
  EXPECT_EQ(a, b);
}

TEST(Sweep, InvalidCellsAreRejectedUpFront) {
  FactorGrid grid;
  grid.ratios = {0.5, 1.5};
  EXPECT_THROW(expand_grid(ExperimentConfig{}, grid), ConfigError);
  grid.ratios = {0.5};
  grid.modes = {Mode::RawSum};
  EXPECT_THROW(expand_grid(ExperimentConfig{}, grid), ConfigError);
  EXPECT_EQ(FactorGrid::from_json(FactorGrid::full().to_json()).to_json(), FactorGrid::full().to_json());
}

TEST(Sweep, ReportsOneRowPerCell) {
  const Dataset d = small_corpus(5, 30);
  FactorGrid grid;
  grid.ratios = {0.5, 1.0};
  RunContext context;
  const auto reports = factor_sweep(ExperimentConfig{}, grid, d.queries, d.products, context);
  ASSERT_EQ(reports.size(), 4u);
  const std::string csv = reports_to_csv(reports);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2);  // header + one line per (cell, k)
}
