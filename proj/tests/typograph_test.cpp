#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "support.hpp"
#include "typr/cache.hpp"
#include "typr/diagnostics.hpp"
#include "typr/errors.hpp"
#include "typr/typograph.hpp"

using namespace typr;
using typr::testing::shipped_font;

namespace {

// Recorded from the bundled DejaVu Sans and checked by eye: black, centered,
// size capped at floor(224 / 6).
constexpr int kGoldenNikeDunkSize = 37;
constexpr const char* kGoldenNikeDunkHash = "e14a9843ca4e50bbbb9d379b0065482b5293a16356ecd4701e11964438df4345";

class FnMeasurer final : public TextMeasurer {
 public:
  explicit FnMeasurer(std::function<int(std::size_t len, int size)> width) : width_(std::move(width)) {}
  TextExtent measure(std::string_view text, int size) const override {
    if (text.empty()) return {0, 0};
    return {width_(text.size(), size), size};
  }

 private:
  std::function<int(std::size_t, int)> width_;
};

// Exhaustive scan over every admissible size.
int linear_scan_max_size(const TextMeasurer& m, int width, std::string_view text) {
  int best = 1;
  const double budget = 0.9 * width;
  for (int s = 1; s <= width / 6; ++s)
    if (m.measure(text, s).width <= budget) best = s;
  return best;
}

Image noise_image(int w, int h, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Image img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

void expect_unchanged_outside(const Image& before, const RenderedImage& after) {
  ASSERT_EQ(before.width(), after.image.width());
  ASSERT_EQ(before.height(), after.image.height());
  for (int y = 0; y < before.height(); ++y)
    for (int x = 0; x < before.width(); ++x)
      if (!after.text_bbox || !after.text_bbox->contains(x, y)) {
        ASSERT_EQ(before.pixel(x, y), after.image.pixel(x, y)) << "pixel (" << x << "," << y << ")";
      }
}

}  // namespace

TEST(MaxFontSize, MonospaceMockFitsNinety) {
  FnMeasurer mono([](std::size_t len, int s) { return static_cast<int>(std::floor(0.6 * s * len)); });
  EXPECT_EQ(get_max_font_size(mono, 600, 100, "abcdefghij"), 90);
  EXPECT_EQ(linear_scan_max_size(mono, 600, "abcdefghij"), 90);
}

TEST(MaxFontSize, EmptyTextReturnsUpperBound) {
  FnMeasurer mono([](std::size_t len, int s) { return static_cast<int>(0.6 * s * len); });
  EXPECT_EQ(get_max_font_size(mono, 600, 100, ""), 100);
}

TEST(MaxFontSize, NothingFitsClampsToOne) {
  FnMeasurer wide([](std::size_t, int s) { return 1000 * s; });
  EXPECT_EQ(get_max_font_size(wide, 600, 100, "x"), 1);
}

TEST(MaxFontSize, RejectsDegenerateGeometry) {
  FnMeasurer mono([](std::size_t len, int s) { return static_cast<int>(len) * s; });
  EXPECT_THROW(get_max_font_size(mono, 5, 100, "x"), InvalidGeometry);
  EXPECT_THROW(get_max_font_size(mono, 600, 0, "x"), InvalidGeometry);
  EXPECT_EQ(get_max_font_size(mono, 6, 1, ""), 1);
}

TEST(MaxFontSize, MatchesLinearScanOnRandomMonotoneMeasurers) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 2000; ++trial) {
    const int width = std::uniform_int_distribution<int>(6, 2048)(rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(0, 300)(rng);
    const double slope = std::uniform_real_distribution<double>(0.01, 3.0)(rng);
    const int offset = std::uniform_int_distribution<int>(0, 50)(rng);
    const int step = std::uniform_int_distribution<int>(1, 7)(rng);
    // Staircase widths: monotone but with plateaus, which stress the
    // upper-midpoint choice.
    FnMeasurer m([=](std::size_t n, int s) {
      return offset + static_cast<int>(std::floor(slope * static_cast<double>(n) * ((s / step) * step)));
    });
    const std::string text(len, 'a');
    ASSERT_EQ(get_max_font_size(m, width, 100, text), linear_scan_max_size(m, width, text))
        << "W=" << width << " len=" << len << " slope=" << slope << " offset=" << offset << " step=" << step;
  }
}

TEST(Anchor, CenterTopBottomExamples) {
  EXPECT_EQ(compute_anchor(100, 100, 60, 10, Location::Center, 0.05), (Anchor{20, 45}));
  EXPECT_EQ(compute_anchor(100, 100, 60, 10, Location::Top, 0.05), (Anchor{20, 5}));
  EXPECT_EQ(compute_anchor(100, 100, 60, 10, Location::Bottom, 0.05), (Anchor{20, 85}));
}

TEST(Anchor, ClampsIntoImage) {
  EXPECT_EQ(compute_anchor(100, 100, 140, 10, Location::Center, 0.05).x, 0);
  EXPECT_EQ(compute_anchor(100, 20, 60, 30, Location::Bottom, 0.05).y, 0);
  EXPECT_EQ(compute_anchor(100, 20, 60, 19, Location::Top, 0.4).y, 1);
  EXPECT_EQ(compute_anchor(100, 100, 60, 10, Location::Bottom, 0.0).y, 90);
}

TEST(RenderSpec, ValidatesRanges) {
  RenderSpec s;
  EXPECT_NO_THROW(s.validate());
  s.font_size_ratio = 0.0;
  EXPECT_THROW(s.validate(), InvalidInput);
  s.font_size_ratio = 1.01;
  EXPECT_THROW(s.validate(), InvalidInput);
  s = {};
  s.max_width_fraction = 0.0;
  EXPECT_THROW(s.validate(), InvalidInput);
  s = {};
  s.margin_fraction = 0.5;
  EXPECT_THROW(s.validate(), InvalidInput);
  s.margin_fraction = 0.0;
  EXPECT_NO_THROW(s.validate());
}

TEST(RenderSpec, NamedColorsAndLocations) {
  EXPECT_EQ(named_color("red"), (Rgb{255, 0, 0}));
  EXPECT_EQ(named_color("orange"), (Rgb{255, 165, 0}));
  EXPECT_EQ(named_color("blue"), (Rgb{0, 0, 255}));
  EXPECT_EQ(named_color("green"), (Rgb{0, 128, 0}));
  EXPECT_EQ(named_color("black"), (Rgb{0, 0, 0}));
  EXPECT_EQ(parse_color("#10a0ff"), (Rgb{0x10, 0xa0, 0xff}));
  EXPECT_EQ(color_name({0, 128, 0}), "green");
  EXPECT_EQ(color_name({1, 2, 3}), "#010203");
  EXPECT_THROW(parse_color("mauve"), InvalidInput);
  EXPECT_EQ(parse_location("middle"), Location::Center);
  EXPECT_EQ(parse_location("TOP"), Location::Top);
  EXPECT_THROW(parse_location("left"), InvalidInput);
}

TEST(Font, MissingFileIsConfigError) { EXPECT_THROW(FontFace::load("/nonexistent/font.ttf"), ConfigError); }

TEST(Font, ShippedFontIsMonotoneInSize) {
  const auto& font = shipped_font();
  for (std::string text : {"iiiiil1!", "NIKE DUNK", "W", "Jordan 1 Retro High OG", "ffi fl ., ;", "AVAVAV To"}) {
    TextExtent previous{};
    for (int s = 1; s <= 400; ++s) {
      const TextExtent e = font.measure(text, s);
      ASSERT_GE(e.width, previous.width) << text << " at " << s;
      ASSERT_GE(e.height, previous.height) << text << " at " << s;
      previous = e;
    }
  }
  EXPECT_EQ(font.measure("", 40).width, 0);
}

TEST(Font, Utf8Decoding) {
  EXPECT_EQ(decode_utf8("a\xc3\xa9"), (std::vector<char32_t>{U'a', U'é'}));
  EXPECT_EQ(decode_utf8("\xff" "b"), (std::vector<char32_t>{0xFFFD, U'b'}));
  EXPECT_EQ(decode_utf8("\xe2\x82"), (std::vector<char32_t>{0xFFFD}));
}

TEST(Render, EmptyTextIsIdentity) {
  const Image img = noise_image(64, 48, 1);
  const RenderedImage out = render_text(img, "", RenderSpec{}, shipped_font());
  EXPECT_EQ(out.image, img);
  EXPECT_FALSE(out.text_bbox.has_value());
}

TEST(Render, RedTextStaysInsideBox) {
  const Image img(224, 224);
  RenderSpec spec;
  spec.color = named_color("red");
  const RenderedImage out = render_text(img, "NIKE DUNK", spec, shipped_font());
  ASSERT_TRUE(out.text_bbox.has_value());
  expect_unchanged_outside(img, out);
  bool found = false;
  for (int y = out.text_bbox->y; y < out.text_bbox->y + out.text_bbox->h && !found; ++y)
    for (int x = out.text_bbox->x; x < out.text_bbox->x + out.text_bbox->w; ++x)
      if (out.image.pixel(x, y) == Rgb{255, 0, 0}) {
        found = true;
        break;
      }
  EXPECT_TRUE(found);
}

TEST(Render, AppliesRatioToMaxSize) {
  const Image img(300, 120);
  const int max_size = get_max_font_size(shipped_font(), 300, 120, "Gazelle");
  for (double ratio : {0.25, 0.5, 0.75, 1.0}) {
    RenderSpec spec;
    spec.font_size_ratio = ratio;
    const RenderedImage out = render_text(img, "Gazelle", spec, shipped_font());
    EXPECT_EQ(out.applied_font_size, std::max(1, static_cast<int>(std::floor(ratio * max_size))));
    EXPECT_EQ(out.applied_spec, spec);
  }
}

TEST(Render, RandomRendersAreLocalAndFitWidth) {
  std::mt19937_64 rng(77);
  const std::vector<std::string> words{"NIKE", "DUNK", "Low", "retro", "GAZELLE", "x", "Tote bag", "0.5 oz", "é"};
  const std::vector<Location> where{Location::Top, Location::Center, Location::Bottom};
  for (int trial = 0; trial < 60; ++trial) {
    const int w = std::uniform_int_distribution<int>(6, 320)(rng);
    const int h = std::uniform_int_distribution<int>(1, 200)(rng);
    std::string text;
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) text += (i ? " " : "") + words[rng() % words.size()];
    RenderSpec spec;
    spec.font_size_ratio = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    spec.location = where[rng() % where.size()];
    spec.color = {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                  static_cast<std::uint8_t>(rng())};
    const Image img = noise_image(w, h, rng());
    const RenderedImage out = render_text(img, text, spec, shipped_font());
    expect_unchanged_outside(img, out);
    ASSERT_TRUE(out.text_bbox.has_value());
    const auto& box = *out.text_bbox;
    EXPECT_GE(box.x, 0);
    EXPECT_GE(box.y, 0);
    EXPECT_LE(box.x + box.w, w);
    EXPECT_LE(box.y + box.h, h);
    if (!out.overflowed) {
      EXPECT_LE(shipped_font().measure(text, out.applied_font_size).width, 0.9 * w);
    }
  }
}

TEST(Render, OverflowRendersAtSizeOneWithWarning) {
  std::vector<std::string> warnings;
  auto previous = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  const Image img(12, 12);
  const RenderedImage out = render_text(img, "a very long title that cannot fit", RenderSpec{}, shipped_font());
  set_warning_sink(previous);
  EXPECT_EQ(out.applied_font_size, 1);
  EXPECT_TRUE(out.overflowed);
  EXPECT_EQ(warnings.size(), 1u);
  expect_unchanged_outside(img, out);
}

TEST(Render, Deterministic) {
  const Image img = noise_image(200, 150, 9);
  RenderSpec spec;
  spec.location = Location::Bottom;
  const auto a = render_text(img, "Samba OG", spec, shipped_font());
  const auto b = render_text(img, "Samba OG", spec, shipped_font());
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.text_bbox, b.text_bbox);
}

TEST(Render, GoldenNikeDunk) {
  const Image img(224, 224);
  const RenderedImage out = render_text(img, "NIKE DUNK", RenderSpec{}, shipped_font());
  EXPECT_EQ(out.applied_font_size, kGoldenNikeDunkSize);
  EXPECT_EQ(sha256_hex(out.image.bytes()), kGoldenNikeDunkHash);
}
