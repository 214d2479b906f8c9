#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "typr/cli.hpp"
#include "typr/image.hpp"
#include "typr/knn.hpp"
#include "typr/synthetic.hpp"

using namespace typr;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "typr");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_json(const std::filesystem::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

std::filesystem::path small_corpus(const typr::testing::TempDir& dir, bool drop_titles = false) {
  SyntheticCorpusSpec spec;
  spec.n_queries = 8;
  spec.n_products = 40;
  spec.image_size = 64;
  Dataset d = generate_synthetic_corpus(spec);
  if (drop_titles)
    for (auto& l : d.products) {
      l.title.clear();
      l.raw_text.reset();
    }
  write_dataset(d, dir / "corpus");
  return dir / "corpus";
}

}  // namespace

TEST(Cli, RenderExitCodes) {
  typr::testing::TempDir dir("cli");
  write_png(Image(200, 120, {240, 240, 240}), dir / "in.png");
  const auto ok = run({"render", "--image", (dir / "in.png").string(), "--text", "Nike Dunk Low", "--out",
                       (dir / "out.png").string(), "--color", "red"});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  const json j = json::parse(ok.out);
  EXPECT_GT(j["font_size"].get<int>(), 1);
  EXPECT_TRUE(j["bbox"].is_object());
  EXPECT_EQ(read_image(dir / "out.png").width(), 200);

  const auto bad_ratio = run({"render", "--image", (dir / "in.png").string(), "--text", "x", "--out",
                              (dir / "o2.png").string(), "--ratio", "0"});
  EXPECT_EQ(bad_ratio.code, kExitUsage);
  EXPECT_NE(bad_ratio.err.find("font_size_ratio"), std::string::npos) << bad_ratio.err;

  const auto bad_font = run({"render", "--image", (dir / "in.png").string(), "--text", "x", "--out",
                             (dir / "o3.png").string(), "--font", (dir / "missing.ttf").string()});
  EXPECT_EQ(bad_font.code, kExitRuntime);

  EXPECT_EQ(run({"render", "--text", "x"}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, EmbedEmptyTitlesMatchesRawAndCaches) {
  typr::testing::TempDir dir("cli");
  const auto corpus = small_corpus(dir, true);
  const std::string manifest = (corpus / "products.jsonl").string();
  const std::string cache = (dir / "cache").string();
  const auto rendered = run({"embed", "--manifest", manifest, "--mode", "rendered_image_only", "--out-store",
                             (dir / "b.typf").string(), "--cache-root", cache, "--json"});
  ASSERT_EQ(rendered.code, kExitOk) << rendered.err;
  const auto raw = run({"embed", "--manifest", manifest, "--mode", "raw_image_only", "--out-store",
                        (dir / "raw.typf").string(), "--json"});
  ASSERT_EQ(raw.code, kExitOk) << raw.err;
  EXPECT_TRUE(load_index(dir / "b.typf") == load_index(dir / "raw.typf"));

  const json first = json::parse(rendered.out);
  EXPECT_EQ(first["count"], 40);
  EXPECT_EQ(first["computed"], 40);
  const auto again = run({"embed", "--manifest", manifest, "--mode", "rendered_image_only", "--out-store",
                          (dir / "b2.typf").string(), "--cache-root", cache, "--json"});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  const json second = json::parse(again.out);
  EXPECT_EQ(second["computed"], 0);
  EXPECT_EQ(second["sha256"], first["sha256"]);
}

TEST(Cli, EmbedWithUnreachableEncoderIsRuntimeFailure) {
  typr::testing::TempDir dir("cli");
  const auto corpus = small_corpus(dir);
  const auto r = run({"embed", "--manifest", (corpus / "products.jsonl").string(), "--encoder",
                      "http://127.0.0.1:1", "--out-store", (dir / "x.typf").string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_FALSE(std::filesystem::exists(dir / "x.typf"));
}

TEST(Cli, EvalOnSyntheticConfig) {
  typr::testing::TempDir dir("cli");
  write_json(dir / "run.json", {{"synthetic", {{"n_queries", 10}, {"n_products", 50}, {"image_size", 64}}},
                                {"experiment", {{"mode", "C"}, {"k", {1, 3}}}},
                                {"output_dir", "out"}});
  const auto r = run({"eval", "--config", (dir / "run.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("Acc@1"), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "out/report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out/report.csv"));

  const auto j = run({"eval", "--config", (dir / "run.json").string(), "--json", "--mode", "B"});
  ASSERT_EQ(j.code, kExitOk) << j.err;
  const json parsed = json::parse(j.out);
  EXPECT_EQ(parsed["reports"][0]["config"]["mode"], "rendered_image_only");
}

TEST(Cli, EvalWithMissingTruthIsUsageError) {
  typr::testing::TempDir dir("cli");
  const auto corpus = small_corpus(dir);
  {
    std::ifstream in(corpus / "queries.jsonl");
    std::ostringstream edited;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      json rec = json::parse(line);
      if (first) rec.erase("truth_id");
      first = false;
      edited << rec.dump() << '\n';
    }
    std::ofstream(corpus / "queries.jsonl") << edited.str();
  }
  write_json(dir / "run.json", {{"queries", "corpus/queries.jsonl"}, {"products", "corpus/products.jsonl"}});
  const auto r = run({"eval", "--config", (dir / "run.json").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("truth_id"), std::string::npos) << r.err;
  EXPECT_EQ(run({"eval", "--config", (dir / "nope.json").string()}).code, kExitUsage);
}

TEST(Cli, SweepOverFourRatiosEmitsEightRows) {
  typr::testing::TempDir dir("cli");
  write_json(dir / "run.json", {{"synthetic", {{"n_queries", 5}, {"n_products", 30}, {"image_size", 64}}},
                                {"experiment", {{"k", {1}}}},
                                {"grid", {{"ratios", {0.25, 0.5, 0.75, 1.0}}}}});
  const auto r = run({"sweep", "--config", (dir / "run.json").string(), "--json", "--out-dir",
                      (dir / "o").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["reports"].size(), 8u);
  std::ifstream csv(dir / "o/sweep.csv");
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  EXPECT_EQ(lines, 1 + 8);

  write_json(dir / "bad.json", {{"grid", {{"ratios", {2.0}}}}});
  EXPECT_EQ(run({"sweep", "--config", (dir / "bad.json").string()}).code, kExitUsage);
}

TEST(Cli, SynthJsonOutput) {
  typr::testing::TempDir dir("cli");
  const auto r = run({"synth", "--out", (dir / "s").string(), "--queries", "3", "--products", "9", "--image-size",
                      "32", "--json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["products"], 9);
  EXPECT_TRUE(std::filesystem::exists(dir / "s/products.jsonl"));
}
