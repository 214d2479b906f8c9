#include "typr/font.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#define STB_TRUETYPE_IMPLEMENTATION
#define STBTT_STATIC
#include "stb_truetype.h"

#include "typr/errors.hpp"
#include "typr/image.hpp"

namespace typr {

struct FontFace::Impl {
  std::vector<std::uint8_t> data;
  stbtt_fontinfo info{};
  int ascent = 0;
  int descent = 0;  // negative, font units
};

namespace {

struct PlacedGlyph {
  int glyph;
  long pen;  // font units from the line origin
};

/// Line layout in font units.
struct Layout {
  std::vector<PlacedGlyph> glyphs;
  long left = 0;   // <= 0
  long right = 0;  // >= final advance
};

Layout layout_line(const stbtt_fontinfo& info, std::string_view text) {
  Layout layout;
  long pen = 0;
  int previous = 0;
  long ink_left = 0;
  long ink_right = 0;
  for (char32_t cp : decode_utf8(text)) {
    const int glyph = stbtt_FindGlyphIndex(&info, static_cast<int>(cp));
    if (previous != 0) pen += stbtt_GetGlyphKernAdvance(&info, previous, glyph);
    layout.glyphs.push_back({glyph, pen});
    if (!stbtt_IsGlyphEmpty(&info, glyph)) {
      int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
      if (stbtt_GetGlyphBox(&info, glyph, &x0, &y0, &x1, &y1)) {
        ink_left = std::min(ink_left, pen + x0);
        ink_right = std::max(ink_right, pen + x1);
      }
    }
    int advance = 0, bearing = 0;
    stbtt_GetGlyphHMetrics(&info, glyph, &advance, &bearing);
    pen += advance;
    previous = glyph;
  }
  layout.left = std::min(0L, ink_left);
  layout.right = std::max(pen, ink_right);
  return layout;
}

// Both bounds are monotone in `scale`, hence the extent is monotone in size.
struct PixelBox {
  long left;    // floor(layout.left * scale) <= 0
  long right;   // ceil(layout.right * scale)
  long top;     // ceil(ascent * scale)
  long bottom;  // floor(descent * scale) <= 0
};

PixelBox pixel_box(const Layout& layout, int ascent, int descent, double scale) {
  return {static_cast<long>(std::floor(static_cast<double>(layout.left) * scale)),
          static_cast<long>(std::ceil(static_cast<double>(layout.right) * scale)),
          static_cast<long>(std::ceil(static_cast<double>(ascent) * scale)),
          static_cast<long>(std::floor(static_cast<double>(descent) * scale))};
}

}  // namespace

FontFace::FontFace(std::shared_ptr<const Impl> impl, std::filesystem::path path)
    : impl_(std::move(impl)), path_(std::move(path)) {}

FontFace FontFace::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("font asset not found: " + path.string());
  auto impl = std::make_shared<Impl>();
  try {
    impl->data = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read font asset: ") + e.what());
  }
  const int offset = stbtt_GetFontOffsetForIndex(impl->data.data(), 0);
  if (offset < 0 || !stbtt_InitFont(&impl->info, impl->data.data(), offset))
    throw ConfigError("not a usable TrueType font: " + path.string());
  int line_gap = 0;
  stbtt_GetFontVMetrics(&impl->info, &impl->ascent, &impl->descent, &line_gap);
  if (impl->ascent - impl->descent <= 0)
    throw ConfigError("font has degenerate vertical metrics: " + path.string());
  return FontFace(std::move(impl), path);
}

TextExtent FontFace::measure(std::string_view text, int font_size) const {
  if (text.empty() || font_size <= 0) return {};
  const double scale = static_cast<double>(font_size) / (impl_->ascent - impl_->descent);
  const Layout layout = layout_line(impl_->info, text);
  const PixelBox box = pixel_box(layout, impl_->ascent, impl_->descent, scale);
  return {static_cast<int>(box.right - box.left), static_cast<int>(box.top - box.bottom)};
}

GlyphCoverage FontFace::rasterize(std::string_view text, int font_size) const {
  GlyphCoverage out;
  if (text.empty() || font_size <= 0) return out;

  const auto& info = impl_->info;
  const double scale = static_cast<double>(font_size) / (impl_->ascent - impl_->descent);
  const Layout layout = layout_line(info, text);
  const PixelBox box = pixel_box(layout, impl_->ascent, impl_->descent, scale);
  out.width = static_cast<int>(box.right - box.left);
  out.height = static_cast<int>(box.top - box.bottom);
  out.alpha.assign(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height), 0);

  const double origin_x = static_cast<double>(-box.left);
  const int baseline = static_cast<int>(box.top);
  const float fscale = static_cast<float>(scale);
  std::vector<unsigned char> scratch;

  for (const PlacedGlyph& g : layout.glyphs) {
    if (stbtt_IsGlyphEmpty(&info, g.glyph)) continue;
    const double gx = origin_x + static_cast<double>(g.pen) * scale;
    const double ix = std::floor(gx);
    const float shift = static_cast<float>(gx - ix);
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    stbtt_GetGlyphBitmapBoxSubpixel(&info, g.glyph, fscale, fscale, shift, 0.0f, &x0, &y0, &x1, &y1);
    const int w = x1 - x0;
    const int h = y1 - y0;
    if (w <= 0 || h <= 0) continue;
    scratch.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    stbtt_MakeGlyphBitmapSubpixel(&info, scratch.data(), w, h, w, fscale, fscale, shift, 0.0f, g.glyph);

    const int left = static_cast<int>(ix) + x0;
    const int top = baseline + y0;
    for (int y = 0; y < h; ++y) {
      const int oy = top + y;
      if (oy < 0 || oy >= out.height) continue;
      for (int x = 0; x < w; ++x) {
        const int ox = left + x;
        if (ox < 0 || ox >= out.width) continue;
        auto& dst = out.alpha[static_cast<std::size_t>(oy) * static_cast<std::size_t>(out.width) +
                              static_cast<std::size_t>(ox)];
        dst = std::max<std::uint8_t>(dst, scratch[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                                  static_cast<std::size_t>(x)]);
      }
    }
  }
  return out;
}

std::filesystem::path default_font_path() {
  if (const char* env = std::getenv("TYPR_FONT"); env != nullptr && *env != '\0') return env;
  return TYPR_DEFAULT_FONT;
}

std::vector<char32_t> decode_utf8(std::string_view text) {
  constexpr char32_t kReplacement = 0xFFFD;
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      extra = 1;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      extra = 2;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      extra = 3;
      cp = lead & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(extra) >= text.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto c = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
      if ((c & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (c & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

}  // namespace typr
