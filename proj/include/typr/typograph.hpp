#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "typr/font.hpp"
#include "typr/image.hpp"

namespace typr {

enum class Location { Top, Center, Bottom };

std::string to_string(Location location);
/// Accepts "top", "center"/"middle", "bottom" (case-insensitive).
Location parse_location(std::string_view name);

/// red, orange, blue, green, black.
Rgb named_color(std::string_view name);
/// Inverse of named_color, or "#rrggbb" for anything else.
std::string color_name(Rgb color);
/// Named color or "#rrggbb".
Rgb parse_color(std::string_view text);

/// Typographic factors for one rendering.
struct RenderSpec {
  double font_size_ratio = 1.0;
  Rgb color{0, 0, 0};
  Location location = Location::Center;
  double max_width_fraction = 0.9;
  double margin_fraction = 0.05;
  std::string font_asset;  // empty = bundled font

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
  /// Stable textual key of every field, used for cache keys and fingerprints.
  std::string canonical() const;

  friend bool operator==(const RenderSpec&, const RenderSpec&) = default;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool contains(int px, int py) const noexcept {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct RenderedImage {
  Image image;
  RenderSpec applied_spec;
  int applied_font_size = 0;
  std::optional<BoundingBox> text_bbox;
  /// True when even size 1 exceeded the width budget.
  bool overflowed = false;
};

/// Largest size in [1, floor(W/6)] whose measured width fits in
/// max_width_fraction * W, found by the upper-midpoint binary search.
/// Returns 1 when nothing fits. Throws InvalidGeometry for W < 6 or H < 1.
int get_max_font_size(const TextMeasurer& measurer, int width, int height, std::string_view text,
                      double max_width_fraction = 0.9);

struct Anchor {
  int x = 0;
  int y = 0;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// Top-left corner of the text box: horizontally centered, vertically per
/// `location`, clamped so the box stays inside the image where possible.
Anchor compute_anchor(int width, int height, int text_w, int text_h, Location location,
                      double margin_fraction);

/// Draws `text` as one line onto a copy of `image`. Pixels outside the
/// returned text_bbox are untouched; empty text returns the input unchanged.
RenderedImage render_text(const Image& image, std::string_view text, const RenderSpec& spec,
                          const FontFace& font);

}  // namespace typr
