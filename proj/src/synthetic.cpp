#include "typr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "typr/errors.hpp"
#include "typr/ingest.hpp"
#include "typr/rng.hpp"

namespace typr {
namespace {

constexpr std::uint64_t kQueryIdBase = 1'000'000;

enum class Shape { Disc, Square, Triangle, Diamond, Ring, Cross, HBar, VBar, Ellipse, Frame };
constexpr int kShapeCount = 10;

constexpr std::array<Rgb, kShapeCount> kClassColors{{
    {70, 110, 170}, {170, 80, 70}, {80, 150, 90}, {150, 120, 60}, {120, 80, 150},
    {60, 140, 150}, {160, 100, 130}, {100, 100, 100}, {140, 150, 70}, {90, 90, 160},
}};

// Short words keep titles under ten characters, so the rendered text reaches
// the height cap instead of the width limit.
const std::vector<std::vector<std::string>>& default_vocabulary() {
  static const std::vector<std::vector<std::string>> slots{
    {"NIKE","PUMA","VANS","FILA","ASICS","KENZO","ARC","LEVI","RAY","AVIA","BALI","CAT","DC","ECCO","FRYE","GAP",
     "HOKA","IZOD","JACK","KAPA","LACO","MUJI","NEW","ONI","PONY","QIAN","ROXY","SAXX","TEVA","UGG","VOLC","WOLF",
     "XERO","YAK","ZARA","ALDO","BOSS","CHUB","DIOR","ERGO","FOX","GANT","HUGO","INCA","JOE","KOIO","LOEW","MIU"},
    {"DUNK","AIR","MAX","GEL","PRO","LOW","HI","MID","RUN","TOTE","BAG","CAP","OG","SB","ZIP","TEE",
     "POLO","JET","SKY","FLEX","KNIT","VAPE","EDGE","FLUX","GLOW","HALO","ICON","JADE","KITE","LUX","MINT","NOVA",
     "ONYX","PEAK","QUAD","RIFT","SAGE","TIDE","UNO","VIBE","WAVE","XL","YARD","ZEN","ARCH","BOLT","CORE","DASH"}
  };
  return slots;
}

bool inside(Shape shape, double dx, double dy, double r) {
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  switch (shape) {
    case Shape::Disc: return dx * dx + dy * dy <= r * r;
    case Shape::Square: return ax <= 0.8 * r && ay <= 0.8 * r;
    case Shape::Triangle: return dy <= 0.8 * r && dy >= -0.9 * r && ax <= (dy + 0.9 * r) * 0.55;
    case Shape::Diamond: return ax + ay <= r;
    case Shape::Ring: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.36 * r * r;
    }
    case Shape::Cross: return (ax <= 0.25 * r && ay <= r) || (ay <= 0.25 * r && ax <= r);
    case Shape::HBar: return ax <= r && ay <= 0.35 * r;
    case Shape::VBar: return ay <= r && ax <= 0.35 * r;
    case Shape::Ellipse: return (dx * dx) / (r * r) + (dy * dy) / (0.3 * r * r) <= 1.0;
    case Shape::Frame: return ax <= 0.85 * r && ay <= 0.85 * r && (ax >= 0.6 * r || ay >= 0.6 * r);
  }
  return false;
}

std::uint8_t jitter_channel(std::uint8_t base, int amount, SplitMix64& rng) {
  const auto v = static_cast<std::int64_t>(base) + rng.between(-amount, amount);
  return static_cast<std::uint8_t>(std::clamp<std::int64_t>(v, 0, 255));
}

std::shared_ptr<const Image> draw_item(int cls, const SyntheticCorpusSpec& spec, SplitMix64& rng) {
  const int n = spec.image_size;
  const auto bg_level = static_cast<std::uint8_t>(243 + rng.between(-spec.background_jitter, spec.background_jitter));
  Image img(n, n, {bg_level, bg_level, bg_level});
  const Rgb cls_color = kClassColors[static_cast<std::size_t>(cls)];
  const auto toward = [&](std::uint8_t c) {
    return static_cast<std::uint8_t>(std::lround(bg_level + spec.shape_contrast * (c - bg_level)));
  };
  const Rgb base{toward(cls_color.r), toward(cls_color.g), toward(cls_color.b)};
  const Rgb ink{jitter_channel(base.r, spec.color_jitter, rng), jitter_channel(base.g, spec.color_jitter, rng),
                jitter_channel(base.b, spec.color_jitter, rng)};
  const double cx = n / 2.0 + static_cast<double>(rng.between(-spec.position_jitter, spec.position_jitter));
  const double cy = n / 2.0 + static_cast<double>(rng.between(-spec.position_jitter, spec.position_jitter));
  const double radius = spec.shape_radius * n * (1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter));
  const auto shape = static_cast<Shape>(cls);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (inside(shape, x + 0.5 - cx, y + 0.5 - cy, radius)) img.set_pixel(x, y, ink);
  return std::make_shared<const Image>(std::move(img));
}

std::string title_for(std::uint64_t index, const std::vector<std::vector<std::string>>& slots) {
  std::string title;
  for (const auto& slot : slots) {
    const auto size = static_cast<std::uint64_t>(slot.size());
    if (!title.empty()) title += ' ';
    title += slot[static_cast<std::size_t>(index % size)];
    index /= size;
  }
  return title;
}

}  // namespace

std::uint64_t SyntheticCorpusSpec::title_capacity() const {
  const auto& slots = title_slots.empty() ? default_vocabulary() : title_slots;
  std::uint64_t capacity = 1;
  for (const auto& slot : slots) {
    if (slot.empty()) return 0;
    capacity *= slot.size();
  }
  return slots.empty() ? 0 : capacity;
}

int synthetic_class_count() { return kShapeCount; }

int synthetic_class_of(const Listing& listing) {
  if (!listing.raw_text || !listing.raw_text->attributes) throw InvalidInput("listing carries no synthetic class");
  for (const auto& [k, v] : *listing.raw_text->attributes)
    if (k == "class") return std::stoi(v);
  throw InvalidInput("listing carries no synthetic class");
}

Dataset generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.n_queries < 1) throw ConfigError("synthetic corpus needs n_queries >= 1");
  if (spec.n_products < spec.n_queries) throw ConfigError("synthetic corpus needs n_products >= n_queries");
  if (spec.n_classes < 1 || spec.n_classes > kShapeCount)
    throw ConfigError("n_classes must be in [1, " + std::to_string(kShapeCount) + "], got " +
                      std::to_string(spec.n_classes));
  if (spec.image_size < 16) throw ConfigError("image_size must be >= 16");
  if (!(spec.shape_contrast >= 0.0 && spec.shape_contrast <= 1.0)) throw ConfigError("shape_contrast must be in [0, 1]");
  if (!(spec.shape_radius > 0.0 && spec.shape_radius <= 0.5)) throw ConfigError("shape_radius must be in (0, 0.5]");
  if (spec.position_jitter < 0 || spec.color_jitter < 0 || !(spec.scale_jitter >= 0.0 && spec.scale_jitter < 1.0))
    throw ConfigError("jitter amounts must be non-negative (scale_jitter < 1)");
  if (spec.background_jitter < 0 || spec.background_jitter > 12) throw ConfigError("background_jitter must be in [0, 12]");
  if (spec.title_capacity() < static_cast<std::uint64_t>(spec.n_products))
    throw ConfigError("title vocabulary yields " + std::to_string(spec.title_capacity()) +
                      " titles, fewer than the " + std::to_string(spec.n_products) + " products requested");
  const auto& slots = spec.title_slots.empty() ? default_vocabulary() : spec.title_slots;

  SplitMix64 rng(mix64(spec.seed ^ 0x7379'6e74'6865'7469ULL));

  // Distinct titles: a seeded partial Fisher-Yates over the title space.
  const std::uint64_t capacity = spec.title_capacity();
  std::vector<std::uint64_t> title_index(static_cast<std::size_t>(capacity));
  std::iota(title_index.begin(), title_index.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.n_products); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(capacity - i));
    std::swap(title_index[i], title_index[j]);
  }

  // Product slots in id order; the first n_queries slots (after shuffling)
  // become ground truths.
  std::vector<std::uint64_t> product_ids(static_cast<std::size_t>(spec.n_products));
  std::iota(product_ids.begin(), product_ids.end(), 1);
  for (std::size_t i = product_ids.size(); i > 1; --i) std::swap(product_ids[i - 1], product_ids[rng.below(i)]);

  auto make_listing = [&](std::uint64_t id, int cls, const std::string& title) {
    Listing l;
    l.id = id;
    l.title = title;
    l.image = draw_item(cls, spec, rng);
    l.raw_text = RawText{title, std::nullopt, Attributes{{"class", std::to_string(cls)}}};
    return l;
  };

  Dataset out;
  std::vector<Listing> products(static_cast<std::size_t>(spec.n_products));
  for (int q = 0; q < spec.n_queries; ++q) {
    const int cls = q % spec.n_classes;
    const std::string title = title_for(title_index[static_cast<std::size_t>(q)], slots);
    const std::uint64_t truth = product_ids[static_cast<std::size_t>(q)];
    Listing query = make_listing(kQueryIdBase + static_cast<std::uint64_t>(q), cls, title);
    query.truth_id = truth;
    out.queries.push_back(std::move(query));
    products[static_cast<std::size_t>(truth - 1)] = make_listing(truth, cls, title);
  }
  for (int j = spec.n_queries; j < spec.n_products; ++j) {
    const int cls = spec.distractors == DistractorPolicy::RoundRobin
                        ? j % spec.n_classes
                        : static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_classes)));
    const std::uint64_t id = product_ids[static_cast<std::size_t>(j)];
    products[static_cast<std::size_t>(id - 1)] =
        make_listing(id, cls, title_for(title_index[static_cast<std::size_t>(j)], slots));
  }
  out.products = std::move(products);
  return out;
}

void write_dataset(Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  auto write_images = [&](std::vector<Listing>& listings, const char* prefix) {
    for (auto& l : listings) {
      if (!l.image) continue;
      l.image_path = dir / "images" / (std::string(prefix) + std::to_string(l.id) + ".png");
      write_png(*l.image, l.image_path);
    }
  };
  write_images(dataset.queries, "q");
  write_images(dataset.products, "p");
  write_manifest(dir / "queries.jsonl", dataset.queries);
  write_manifest(dir / "products.jsonl", dataset.products);
}

}  // namespace typr
