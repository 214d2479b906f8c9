#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

namespace typr {

struct TextExtent {
  int width = 0;
  int height = 0;
};

/// Measures the rendered bounding box of a single line of text.
///
/// Implementations must be monotone in font size: for fixed text,
/// measure(t, a).width <= measure(t, b).width whenever a <= b. The font-size
/// search relies on it. Empty text measures {0, 0}.
class TextMeasurer {
 public:
  virtual ~TextMeasurer() = default;
  virtual TextExtent measure(std::string_view text, int font_size) const = 0;
};

/// Anti-aliased coverage of a laid-out line, sized exactly to its layout box.
struct GlyphCoverage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> alpha;  // row-major, width * height

  std::uint8_t at(int x, int y) const noexcept {
    return alpha[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                 static_cast<std::size_t>(x)];
  }
};

/// A TrueType face. Font size is the pixel distance from descender to
/// ascender, and metrics are unhinted so widths scale linearly with size.
///
/// The layout box of a line spans from min(pen origin, leftmost ink) to
/// max(final advance, rightmost ink) horizontally and from the ascender to
/// the descender vertically. Ink is clipped to that box.
class FontFace final : public TextMeasurer {
 public:
  /// Throws ConfigError if the file is missing or not a usable font.
  static FontFace load(const std::filesystem::path& path);

  TextExtent measure(std::string_view text, int font_size) const override;
  GlyphCoverage rasterize(std::string_view text, int font_size) const;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  struct Impl;
  explicit FontFace(std::shared_ptr<const Impl> impl, std::filesystem::path path);

  std::shared_ptr<const Impl> impl_;
  std::filesystem::path path_;
};

/// Path of the bundled font, overridable through TYPR_FONT.
std::filesystem::path default_font_path();

/// Decodes UTF-8 into code points; malformed sequences become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);

}  // namespace typr
