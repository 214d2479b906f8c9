#include "typr/typograph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "typr/diagnostics.hpp"
#include "typr/errors.hpp"

namespace typr {
namespace {

struct NamedColor {
  std::string_view name;
  Rgb rgb;
};

constexpr std::array<NamedColor, 5> kNamedColors{{
    {"red", {255, 0, 0}},
    {"orange", {255, 165, 0}},
    {"blue", {0, 0, 255}},
    {"green", {0, 128, 0}},
    {"black", {0, 0, 0}},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Guards floor() against products like 0.95 * 100 landing a hair below 95.
int floor_px(double v) { return static_cast<int>(std::floor(v + 1e-9)); }

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Location location) {
  switch (location) {
    case Location::Top: return "top";
    case Location::Center: return "center";
    case Location::Bottom: return "bottom";
  }
  return "center";
}

Location parse_location(std::string_view name) {
  const std::string n = lower(name);
  if (n == "top") return Location::Top;
  if (n == "center" || n == "middle") return Location::Center;
  if (n == "bottom") return Location::Bottom;
  throw InvalidInput("unknown text location '" + std::string(name) + "'");
}

Rgb named_color(std::string_view name) {
  const std::string n = lower(name);
  for (const auto& c : kNamedColors)
    if (c.name == n) return c.rgb;
  throw InvalidInput("unknown color '" + std::string(name) + "'");
}

std::string color_name(Rgb color) {
  for (const auto& c : kNamedColors)
    if (c.rgb == color) return std::string(c.name);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", color.r, color.g, color.b);
  return buf;
}

Rgb parse_color(std::string_view text) {
  if (!text.empty() && text.front() == '#') {
    if (text.size() != 7) throw InvalidInput("color must be #rrggbb: '" + std::string(text) + "'");
    unsigned r = 0, g = 0, b = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "#%2x%2x%2x", &r, &g, &b) != 3)
      throw InvalidInput("color must be #rrggbb: '" + s + "'");
    return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  return named_color(text);
}

void RenderSpec::validate() const {
  if (!(font_size_ratio > 0.0 && font_size_ratio <= 1.0))
    throw InvalidInput("font_size_ratio must be in (0, 1], got " + fmt_double(font_size_ratio));
  if (!(max_width_fraction > 0.0 && max_width_fraction <= 1.0))
    throw InvalidInput("max_width_fraction must be in (0, 1], got " + fmt_double(max_width_fraction));
  if (!(margin_fraction >= 0.0 && margin_fraction < 0.5))
    throw InvalidInput("margin_fraction must be in [0, 0.5), got " + fmt_double(margin_fraction));
}

std::string RenderSpec::canonical() const {
  return "ratio=" + fmt_double(font_size_ratio) + ";color=" + color_name(color) +
         ";location=" + to_string(location) + ";max_width=" + fmt_double(max_width_fraction) +
         ";margin=" + fmt_double(margin_fraction) + ";font=" + font_asset;
}

int get_max_font_size(const TextMeasurer& measurer, int width, int height, std::string_view text,
                      double max_width_fraction) {
  if (width < 6) throw InvalidGeometry("image width " + std::to_string(width) + " < 6: empty font size range");
  if (height < 1) throw InvalidGeometry("image height must be >= 1");

  int hi = width / 6;
  int lo = 1;
  const double width_budget = max_width_fraction * width;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (measurer.measure(text, mid).width <= width_budget) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

Anchor compute_anchor(int width, int height, int text_w, int text_h, Location location,
                      double margin_fraction) {
  Anchor a;
  a.x = std::max(0, floor_px((width - text_w) / 2.0));
  switch (location) {
    case Location::Top: a.y = floor_px(margin_fraction * height); break;
    case Location::Center: a.y = floor_px((height - text_h) / 2.0); break;
    case Location::Bottom: a.y = floor_px((1.0 - margin_fraction) * height - text_h); break;
  }
  a.y = std::clamp(a.y, 0, std::max(0, height - text_h));
  return a;
}

RenderedImage render_text(const Image& image, std::string_view text, const RenderSpec& spec,
                          const FontFace& font) {
  spec.validate();
  const int W = image.width();
  const int H = image.height();
  if (W < 6 || H < 1)
    throw InvalidGeometry("cannot render onto a " + std::to_string(W) + "x" + std::to_string(H) + " image");

  RenderedImage out;
  out.image = image;
  out.applied_spec = spec;
  const int max_size = get_max_font_size(font, W, H, text, spec.max_width_fraction);
  out.applied_font_size = std::max(1, floor_px(spec.font_size_ratio * max_size));
  if (text.empty()) return out;

  if (font.measure(text, out.applied_font_size).width > spec.max_width_fraction * W) {
    out.overflowed = true;
    warn("text does not fit " + fmt_double(spec.max_width_fraction) + " of width " + std::to_string(W) +
         " even at size " + std::to_string(out.applied_font_size) + "; rendering anyway");
  }

  const GlyphCoverage coverage = font.rasterize(text, out.applied_font_size);
  const Anchor anchor = compute_anchor(W, H, coverage.width, coverage.height, spec.location,
                                       spec.margin_fraction);
  const BoundingBox box{anchor.x, anchor.y, std::min(coverage.width, W - anchor.x),
                        std::min(coverage.height, H - anchor.y)};
  out.text_bbox = box;

  const Rgb ink = spec.color;
  auto blend = [](std::uint8_t fg, std::uint8_t bg, unsigned a) {
    return static_cast<std::uint8_t>((fg * a + bg * (255u - a) + 127u) / 255u);
  };
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      const unsigned a = coverage.at(x, y);
      if (a == 0) continue;
      const Rgb bg = out.image.pixel(box.x + x, box.y + y);
      out.image.set_pixel(box.x + x, box.y + y,
                          {blend(ink.r, bg.r, a), blend(ink.g, bg.g, a), blend(ink.b, bg.b, a)});
    }
  }
  return out;
}

}  // namespace typr
