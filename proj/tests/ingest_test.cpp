#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "typr/diagnostics.hpp"
#include "typr/errors.hpp"
#include "typr/ingest.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen templates.
#include <httplib.h>

using namespace typr;
using nlohmann::json;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InvalidInput& e) {
    return e.what();
  }
  ADD_FAILURE() << "no InvalidInput";
  return {};
}

// Independent truncation: walk words and keep those that fit.
std::string truncation_oracle(const std::string& text, std::size_t budget) {
  std::istringstream words(text);
  std::string word, out;
  while (words >> word) {
    const std::size_t need = out.empty() ? word.size() : out.size() + 1 + word.size();
    if (need > budget) break;
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

class FixedSummarizer final : public Summarizer {
 public:
  explicit FixedSummarizer(std::string reply, bool fail = false) : reply_(std::move(reply)), fail_(fail) {}
  std::string summarize(const ManifestRecord&, std::size_t) const override {
    ++calls;
    if (fail_) throw std::runtime_error("model offline");
    return reply_;
  }
  mutable int calls = 0;

 private:
  std::string reply_;
  bool fail_;
};

class CaptureWarnings {
 public:
  CaptureWarnings() {
    previous_ = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~CaptureWarnings() { set_warning_sink(previous_); }
  std::vector<std::string> messages;

 private:
  WarningSink previous_;
};

void write_text_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST(Manifest, ParsesTwoRecords) {
  std::istringstream in(
      R"({"id": 1, "image": "a.png", "title": "Nike Dunk Low"})"
      "\n\n"
      R"({"id": 2, "image": "b.jpg", "description": "Red shoe", "attributes": {"brand": "Nike", "size": "42"}, "truth_id": 1})"
      "\n");
  const auto records = parse_manifest(in);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].id, 1u);
  EXPECT_EQ(records[0].title, "Nike Dunk Low");
  EXPECT_FALSE(records[0].truth_id);
  EXPECT_EQ(records[1].image, "b.jpg");
  EXPECT_EQ(records[1].truth_id, 1u);
  ASSERT_TRUE(records[1].attributes);
  EXPECT_EQ(*records[1].attributes, (Attributes{{"brand", "Nike"}, {"size", "42"}}));
}

TEST(Manifest, MalformedLineIsCitedByNumber) {
  std::istringstream in(
      R"({"id": 1, "image": "a.png", "title": "x"})"
      "\n"
      R"({"id": 2, "image": "b.png", "title": "y"})"
      "\n"
      R"({"id": 3, "image": )"
      "\n");
  const std::string msg = message_of([&] { parse_manifest(in); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Manifest, FieldErrors) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in);
  };
  EXPECT_NE(message_of([&] { parse(R"({"image": "a.png"})"); }).find("missing 'id'"), std::string::npos);
  EXPECT_NE(message_of([&] { parse(R"({"id": 1})"); }).find("'image'"), std::string::npos);
  EXPECT_NE(message_of([&] { parse(R"({"id": -4, "image": "a"})"); }).find("non-negative"), std::string::npos);
  EXPECT_NE(message_of([&] { parse(R"([1, 2])"); }).find("object"), std::string::npos);
  EXPECT_NE(message_of([&] { parse(R"({"id": 1, "image": "a", "attributes": [1]})"); }).find("attributes"),
            std::string::npos);
  const std::string dup = message_of([&] {
    parse("{\"id\": 5, \"image\": \"a\", \"title\": \"t\"}\n{\"id\": 5, \"image\": \"b\", \"title\": \"u\"}\n");
  });
  EXPECT_NE(dup.find("duplicate id 5"), std::string::npos) << dup;
  EXPECT_NE(dup.find("line 2"), std::string::npos) << dup;
}

TEST(Manifest, SneakerDatasetScale) {
  // Query count of the sneaker evaluation set.
  std::ostringstream text;
  for (int i = 1; i <= 1986; ++i)
    text << json{{"id", i}, {"image", "q/" + std::to_string(i) + ".jpg"}, {"title", "Shoe " + std::to_string(i)},
                 {"truth_id", 100000 + i}}
                .dump()
         << '\n';
  std::istringstream in(text.str());
  const auto records = parse_manifest(in);
  ASSERT_EQ(records.size(), 1986u);
  EXPECT_EQ(records.back().truth_id, 101986u);
}

TEST(DeriveTitle, ShortTitleIsVerbatim) {
  ManifestRecord r;
  r.id = 1;
  r.title = "Nike Dunk Low";
  FixedSummarizer never("unused");
  EXPECT_EQ(derive_title(r, &never, 120), "Nike Dunk Low");
  EXPECT_EQ(never.calls, 0);
}

TEST(DeriveTitle, LongDescriptionIsTruncatedAtAWordBoundary) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> words{"leather", "upper", "with", "a", "cushioned", "midsole", "and", "rubber"};
  std::string description;
  while (description.size() < 900) {
    if (!description.empty()) description += ' ';
    description += words[rng() % words.size()];
  }
  ManifestRecord r;
  r.id = 2;
  r.description = description;
  const std::string title = derive_title(r, nullptr, 120);
  EXPECT_LE(title.size(), 120u);
  EXPECT_EQ(title, truncation_oracle(description, 120));
  EXPECT_EQ(description.rfind(title, 0), 0u);
}

TEST(DeriveTitle, TruncationProperties) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int w = 0; w < n; ++w) {
      if (w) text += std::string(1 + rng() % 2, ' ');
      text += std::string(1 + rng() % 12, static_cast<char>('a' + rng() % 26));
    }
    const std::size_t budget = 1 + rng() % 80;
    const std::string out = truncate_at_whitespace(text, budget);
    EXPECT_LE(out.size(), budget);
    EXPECT_EQ(text.rfind(out, 0), 0u);
    if (!out.empty()) {
      EXPECT_NE(out.back(), ' ');
    }
    if (text.size() <= budget) {
      EXPECT_EQ(out, text.substr(0, text.find_last_not_of(' ') + 1));
    }
  }
}

TEST(DeriveTitle, LongWordIsCutOnACodepointBoundary) {
  const std::string word = "ééééé";  // 10 bytes
  const std::string out = truncate_at_whitespace(word, 5);
  EXPECT_EQ(out, "éé");
}

TEST(DeriveTitle, AttributesOnly) {
  ManifestRecord r;
  r.attributes = Attributes{{"brand", "Nike"}, {"color", "red"}};
  EXPECT_EQ(derive_title(r, nullptr, 120), "brand: Nike; color: red");
}

TEST(DeriveTitle, NoTextIsInvalid) {
  ManifestRecord r;
  r.id = 9;
  EXPECT_THROW(derive_title(r, nullptr, 120), InvalidInput);
}

TEST(DeriveTitle, ExplicitEmptyTitleIsKept) {
  ManifestRecord r;
  r.title = "";
  EXPECT_EQ(derive_title(r, nullptr, 120), "");
}

TEST(DeriveTitle, SummarizerIsUsedForLongText) {
  ManifestRecord r;
  r.description = std::string(900, 'x');
  FixedSummarizer s("SUMMARY");
  EXPECT_EQ(derive_title(r, &s, 120), "SUMMARY");
  EXPECT_EQ(s.calls, 1);
}

TEST(DeriveTitle, SummarizerFailureFallsBackWithWarning) {
  CaptureWarnings warnings;
  ManifestRecord r;
  r.id = 31;
  r.description = "alpha beta gamma delta";
  FixedSummarizer s("", true);
  EXPECT_EQ(derive_title(r, &s, 12), "alpha beta");
  ASSERT_EQ(warnings.messages.size(), 1u);
  EXPECT_NE(warnings.messages[0].find("31"), std::string::npos);
}

TEST(HttpSummarizer, SpeaksJsonOverHttp) {
  httplib::Server server;
  json seen;
  server.Post("/summarize", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(R"({"summary": "SUMMARY"})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpSummarizer summarizer("http://127.0.0.1:" + std::to_string(port) + "/summarize", 5000);
  ManifestRecord r;
  r.title = std::string(200, 'a');
  r.attributes = Attributes{{"brand", "Nike"}};
  EXPECT_EQ(derive_title(r, &summarizer, 120), "SUMMARY");
  EXPECT_EQ(seen["budget"], 120);
  EXPECT_EQ(seen["attributes"]["brand"], "Nike");

  server.stop();
  t.join();
}

TEST(LoadManifest, ResolvesRelativeImagesAndRoundTrips) {
  typr::testing::TempDir dir("ingest");
  std::filesystem::create_directories(dir / "img");
  write_png(Image(8, 8, {1, 2, 3}), dir / "img/1.png");
  write_png(Image(8, 8, {4, 5, 6}), dir / "img/2.png");
  write_text_file(dir / "m.jsonl",
                  "{\"id\": 1, \"image\": \"img/1.png\", \"title\": \"one\"}\n"
                  "{\"id\": 2, \"image\": \"img/2.png\", \"description\": \"two\", \"truth_id\": 1}\n");
  const auto listings = load_manifest(dir / "m.jsonl");
  ASSERT_EQ(listings.size(), 2u);
  EXPECT_EQ(listings[0].image_path, dir / "img/1.png");
  EXPECT_EQ(listings[1].title, "two");
  EXPECT_EQ(listings[1].truth_id, 1u);

  std::filesystem::create_directories(dir / "copy");
  write_manifest(dir / "copy/m.jsonl", listings);
  const auto again = load_manifest(dir / "copy/m.jsonl");
  ASSERT_EQ(again.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(again[i].id, listings[i].id);
    EXPECT_EQ(again[i].title, listings[i].title);
    EXPECT_EQ(again[i].truth_id, listings[i].truth_id);
    EXPECT_EQ(std::filesystem::canonical(again[i].image_path), std::filesystem::canonical(listings[i].image_path));
  }
}

TEST(LoadManifest, MissingImageOrFileFails) {
  typr::testing::TempDir dir("ingest");
  write_text_file(dir / "m.jsonl", "{\"id\": 1, \"image\": \"nope.png\", \"title\": \"t\"}\n");
  EXPECT_NE(message_of([&] { load_manifest(dir / "m.jsonl"); }).find("image not found"), std::string::npos);
  EXPECT_THROW(load_manifest(dir / "absent.jsonl"), InvalidInput);
}

TEST(ImageStore, DecodesOnceAndHashesContent) {
  typr::testing::TempDir dir("ingest");
  write_png(Image(5, 4, {9, 9, 9}), dir / "a.png");
  Listing l;
  l.image_path = dir / "a.png";
  ImageStore store;
  const auto first = store.load(l);
  EXPECT_EQ(first.get(), store.load(l).get());
  EXPECT_EQ(first->width(), 5);
  const auto bytes = read_file(dir / "a.png");
  EXPECT_EQ(store.content_hash(l), sha256_hex(bytes));
}
