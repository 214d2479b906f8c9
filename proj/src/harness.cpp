#include "typr/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <unordered_set>

#include "typr/config.hpp"
#include "typr/errors.hpp"
#include "typr/parallel.hpp"

namespace typr {

using nlohmann::ordered_json;

namespace {

constexpr std::size_t kChunk = 32;

const std::vector<std::pair<Mode, std::string_view>>& mode_names() {
  static const std::vector<std::pair<Mode, std::string_view>> names{
      {Mode::RawImageOnly, "raw_image_only"},           {Mode::RawSum, "raw_sum"},
      {Mode::RawConcat, "raw_concat"},                   {Mode::RenderedImageOnly, "rendered_image_only"},
      {Mode::RenderedSum, "rendered_sum"},               {Mode::RenderedConcat, "rendered_concat"}};
  return names;
}

std::vector<std::uint8_t> serialize_embedding(const Embedding& e) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(e.modality));
  const auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put32(static_cast<std::uint32_t>(e.model_id.size()));
  out.insert(out.end(), e.model_id.begin(), e.model_id.end());
  put32(static_cast<std::uint32_t>(e.dim()));
  for (Eigen::Index i = 0; i < e.dim(); ++i) put32(std::bit_cast<std::uint32_t>(e.vector(i)));
  return out;
}

std::optional<Embedding> deserialize_embedding(std::span<const std::uint8_t> in) {
  std::size_t pos = 0;
  const auto get32 = [&](std::uint32_t& v) {
    if (in.size() - pos < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return true;
  };
  if (in.empty() || in[0] > 2) return std::nullopt;
  Embedding e;
  e.modality = static_cast<Modality>(in[0]);
  pos = 1;
  std::uint32_t len = 0;
  if (!get32(len) || in.size() - pos < len) return std::nullopt;
  e.model_id.assign(reinterpret_cast<const char*>(in.data() + pos), len);
  pos += len;
  std::uint32_t dim = 0;
  if (!get32(dim) || dim == 0 || (in.size() - pos) != 4ULL * dim) return std::nullopt;
  e.vector.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    std::uint32_t bits = 0;
    get32(bits);
    e.vector(i) = std::bit_cast<float>(bits);
  }
  return e;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

struct EmbedResult {
  std::optional<Embedding> embedding;
  std::string error;
};

// Image halves for a span of listings, batched per chunk, cache-aware.
std::vector<Embedding> embed_image_halves(std::span<const Listing> listings, Mode mode, const RenderSpec& spec,
                                          const EncoderHandle& handle, RunContext& ctx, unsigned threads) {
  const bool rendered = is_rendered(mode);
  const ImageEncoder& encoder = ctx.image_encoder(handle);
  const FontFace* font = rendered ? &ctx.font_for(spec) : nullptr;
  const std::string prefix = "img|" + handle.fingerprint() + "|" + (rendered ? spec.canonical() : "raw") + "|";

  std::vector<Embedding> out(listings.size());
  const std::size_t chunks = (listings.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(listings.size(), begin + kChunk);
    std::vector<std::size_t> pending;
    std::vector<std::string> keys;
    std::vector<Image> prepared;
    std::vector<std::shared_ptr<const Image>> raw;
    for (std::size_t i = begin; i < end; ++i) {
      const Listing& l = listings[i];
      std::string key = prefix + ctx.images().content_hash(l);
      if (rendered) key += "|" + sha256_hex(l.title);
      if (auto hit = ctx.embeddings().find(key)) {
        out[i] = std::move(*hit);
        continue;
      }
      auto image = ctx.images().load(l);
      if (rendered) {
        prepared.push_back(render_text(*image, l.title, spec, *font).image);
      } else {
        raw.push_back(std::move(image));
      }
      pending.push_back(i);
      keys.push_back(std::move(key));
    }
    if (pending.empty()) return;
    std::vector<const Image*> batch;
    if (rendered) {
      for (const auto& img : prepared) batch.push_back(&img);
    } else {
      for (const auto& img : raw) batch.push_back(img.get());
    }
    auto embeddings = encoder.embed_images(batch);
    for (std::size_t p = 0; p < pending.size(); ++p) {
      ctx.embeddings().store(keys[p], embeddings[p]);
      out[pending[p]] = std::move(embeddings[p]);
    }
  });
  return out;
}

std::vector<Embedding> embed_text_halves(std::span<const Listing> listings, const EncoderHandle& handle,
                                         RunContext& ctx, unsigned threads) {
  const TextEncoder& encoder = ctx.text_encoder(handle);
  const std::string prefix = "txt|" + handle.fingerprint() + "|";
  std::vector<Embedding> out(listings.size());
  const std::size_t chunks = (listings.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(listings.size(), begin + kChunk);
    std::vector<std::size_t> pending;
    std::vector<std::string> keys;
    std::vector<std::string> texts;
    for (std::size_t i = begin; i < end; ++i) {
      std::string key = prefix + listings[i].title;
      if (auto hit = ctx.embeddings().find(key)) {
        out[i] = std::move(*hit);
        continue;
      }
      pending.push_back(i);
      keys.push_back(std::move(key));
      texts.push_back(listings[i].title);
    }
    if (pending.empty()) return;
    auto embeddings = encoder.embed_texts(texts);
    for (std::size_t p = 0; p < pending.size(); ++p) {
      ctx.embeddings().store(keys[p], embeddings[p]);
      out[pending[p]] = std::move(embeddings[p]);
    }
  });
  return out;
}

std::vector<EmbedResult> embed_many(std::span<const Listing> listings, Mode mode, const RenderSpec& spec,
                                    const EncoderHandle& image_handle, const EncoderHandle& text_handle,
                                    RunContext& ctx, unsigned threads) {
  auto images = embed_image_halves(listings, mode, spec, image_handle, ctx, threads);
  std::vector<EmbedResult> out(listings.size());
  const auto strategy = fusion_of(mode);
  if (!strategy) {
    for (std::size_t i = 0; i < images.size(); ++i) out[i].embedding = std::move(images[i]);
    return out;
  }
  const auto texts = embed_text_halves(listings, text_handle, ctx, threads);
  for (std::size_t i = 0; i < listings.size(); ++i) {
    try {
      out[i].embedding = fuse(images[i], texts[i], *strategy);
    } catch (const DegenerateFusion& e) {
      out[i].error = "listing " + std::to_string(listings[i].id) + ": " + e.what();
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Mode mode) {
  for (const auto& [m, name] : mode_names())
    if (m == mode) return std::string(name);
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "A" || name == "a") return Mode::RawSum;
  if (name == "B" || name == "b") return Mode::RenderedImageOnly;
  if (name == "C" || name == "c") return Mode::RenderedSum;
  for (const auto& [m, n] : mode_names())
    if (n == name) return m;
  throw InvalidInput("unknown mode '" + std::string(name) + "'");
}

bool is_rendered(Mode mode) noexcept {
  return mode == Mode::RenderedImageOnly || mode == Mode::RenderedSum || mode == Mode::RenderedConcat;
}

std::optional<FusionStrategy> fusion_of(Mode mode) noexcept {
  switch (mode) {
    case Mode::RawSum:
    case Mode::RenderedSum: return FusionStrategy::Sum;
    case Mode::RawConcat:
    case Mode::RenderedConcat: return FusionStrategy::Concat;
    default: return std::nullopt;
  }
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes{Mode::RawImageOnly,      Mode::RawSum,      Mode::RawConcat,
                                       Mode::RenderedImageOnly, Mode::RenderedSum, Mode::RenderedConcat};
  return modes;
}

void ExperimentConfig::validate() const {
  try {
    render_spec.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (k_values.empty()) throw ConfigError("k_values must not be empty");
  for (int k : k_values)
    if (k < 1) throw ConfigError("k values must be >= 1");
  if (image_encoder.kind == EncoderKind::ReferenceText) throw ConfigError("image encoder cannot be a text encoder");
  if (fusion_of(mode) && text_encoder.kind == EncoderKind::ReferenceImage)
    throw ConfigError("text encoder cannot be an image encoder");
}

ordered_json ExperimentConfig::to_json() const {
  std::vector<int> ks = k_values;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  ordered_json j{{"mode", to_string(mode)}};
  if (is_rendered(mode)) j["render"] = render_spec_to_json(render_spec);
  j["image_encoder"] = encoder_to_json(image_encoder);
  if (fusion_of(mode)) j["text_encoder"] = encoder_to_json(text_encoder);
  j["k"] = ks;
  j["seed"] = seed;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("render")) c.render_spec = render_spec_from_json(j["render"], c.render_spec);
    if (j.contains("image_encoder")) c.image_encoder = encoder_from_json(j["image_encoder"], c.image_encoder);
    if (j.contains("text_encoder")) c.text_encoder = encoder_from_json(j["text_encoder"], c.text_encoder);
    if (j.contains("k")) c.k_values = j["k"].get<std::vector<int>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::fingerprint() const { return sha256_hex(to_json().dump()); }

double acc_at_k(std::span<const QueryOutcome> outcomes, int k) {
  if (outcomes.empty()) throw InvalidInput("acc_at_k: empty query set");
  if (k < 1) throw InvalidInput("acc_at_k: k must be >= 1");
  std::size_t found = 0;
  for (const auto& o : outcomes) {
    const auto& hits = o.results.hits;
    const auto limit = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < limit; ++r) {
      if (hits[r].id == o.truth_id) {
        ++found;
        break;
      }
    }
  }
  return static_cast<double>(found) / static_cast<double>(outcomes.size());
}

double MetricsReport::acc(int k) const {
  for (const auto& [kk, a] : accuracy)
    if (kk == k) return a;
  throw InvalidInput("report has no Acc@" + std::to_string(k));
}

ordered_json MetricsReport::to_json(bool include_timing) const {
  ordered_json acc_json = ordered_json::object();
  for (const auto& [k, a] : accuracy) acc_json["acc@" + std::to_string(k)] = a;
  ordered_json ranks_json = ordered_json::array();
  for (const auto& r : ranks)
    ranks_json.push_back(ordered_json{{"query_id", r.query_id}, {"truth_id", r.truth_id}, {"rank", r.rank}});
  ordered_json j{{"fingerprint", fingerprint}, {"config", config},     {"n_queries", n_queries},
                 {"n_products", n_products},   {"accuracy", acc_json}, {"failed_queries", failed_queries},
                 {"ranks", ranks_json}};
  if (include_timing)
    j["wall_ms"] = ordered_json{{"embed", wall.embed_ms}, {"search", wall.search_ms}, {"total", wall.total_ms}};
  return j;
}

// ---------------------------------------------------------------------------

std::optional<Embedding> EmbeddingCache::find(const std::string& key) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (disk_) {
    if (auto bytes = disk_->get(key)) {
      if (auto e = deserialize_embedding(*bytes)) {
        std::lock_guard lock(mutex_);
        memory_.emplace(key, *e);
        return e;
      }
    }
  }
  return std::nullopt;
}

void EmbeddingCache::store(const std::string& key, const Embedding& embedding) {
  if (disk_) disk_->put(key, serialize_embedding(embedding));
  std::lock_guard lock(mutex_);
  memory_.insert_or_assign(key, embedding);
  ++computed_;
}

RunContext::RunContext(std::shared_ptr<ContentCache> disk_cache) : embeddings_(std::move(disk_cache)) {}

const FontFace& RunContext::font_for(const RenderSpec& spec) {
  const std::filesystem::path path =
      spec.font_asset.empty() ? default_font_path() : std::filesystem::path(spec.font_asset);
  std::lock_guard lock(mutex_);
  auto& slot = fonts_[path.string()];
  if (!slot) slot = std::make_unique<FontFace>(FontFace::load(path));
  return *slot;
}

const ImageEncoder& RunContext::image_encoder(const EncoderHandle& handle) {
  std::lock_guard lock(mutex_);
  auto& slot = image_encoders_[handle.fingerprint()];
  if (!slot) slot = make_image_encoder(handle);
  return *slot;
}

const TextEncoder& RunContext::text_encoder(const EncoderHandle& handle) {
  std::lock_guard lock(mutex_);
  auto& slot = text_encoders_[handle.fingerprint()];
  if (!slot) slot = make_text_encoder(handle);
  return *slot;
}

Embedding embed_listing_image(const Listing& listing, Mode mode, const RenderSpec& spec,
                              const EncoderHandle& image_encoder, RunContext& context) {
  return std::move(embed_image_halves(std::span(&listing, 1), mode, spec, image_encoder, context, 1).front());
}

Embedding embed_listing(const Listing& listing, Mode mode, const RenderSpec& spec, const EncoderHandle& image_encoder,
                        const EncoderHandle& text_encoder, RunContext& context) {
  auto result = embed_many(std::span(&listing, 1), mode, spec, image_encoder, text_encoder, context, 1);
  if (!result.front().embedding) throw DegenerateFusion(result.front().error);
  return std::move(*result.front().embedding);
}

std::vector<Embedding> embed_listings(std::span<const Listing> listings, Mode mode, const RenderSpec& spec,
                                      const EncoderHandle& image_encoder, const EncoderHandle& text_encoder,
                                      RunContext& context, unsigned threads) {
  auto results = embed_many(listings, mode, spec, image_encoder, text_encoder, context, threads);
  std::vector<Embedding> out;
  out.reserve(results.size());
  for (auto& r : results) {
    if (!r.embedding) throw DegenerateFusion(r.error);
    out.push_back(std::move(*r.embedding));
  }
  return out;
}

MetricsReport run_experiment(const ExperimentConfig& config, std::span<const Listing> queries,
                             std::span<const Listing> products, RunContext& context) {
  config.validate();
  if (queries.empty()) throw ConfigError("query set is empty");
  if (products.empty()) throw ConfigError("product set is empty");
  std::unordered_set<std::uint64_t> product_ids;
  for (const auto& p : products)
    if (!product_ids.insert(p.id).second) throw ConfigError("duplicate product id " + std::to_string(p.id));
  for (const auto& q : queries) {
    if (!q.truth_id) throw ConfigError("query " + std::to_string(q.id) + " has no truth_id");
    if (!product_ids.contains(*q.truth_id))
      throw ConfigError("query " + std::to_string(q.id) + ": truth id " + std::to_string(*q.truth_id) +
                        " is not in the product set");
  }

  const auto start = std::chrono::steady_clock::now();
  MetricsReport report;
  report.config = config.to_json();
  report.fingerprint = config.fingerprint();
  report.n_queries = queries.size();
  report.n_products = products.size();

  auto product_embeddings = embed_many(products, config.mode, config.render_spec, config.image_encoder,
                                       config.text_encoder, context, config.threads);
  std::vector<IndexEntry> entries;
  entries.reserve(products.size());
  for (std::size_t i = 0; i < products.size(); ++i) {
    if (!product_embeddings[i].embedding) throw DegenerateFusion(product_embeddings[i].error);
    entries.push_back({products[i].id, std::move(*product_embeddings[i].embedding)});
  }
  const KnnIndex index = build_index(entries);

  auto query_embeddings = embed_many(queries, config.mode, config.render_spec, config.image_encoder,
                                     config.text_encoder, context, config.threads);
  report.wall.embed_ms = elapsed_ms(start);

  const auto search_start = std::chrono::steady_clock::now();
  const int max_k = *std::max_element(config.k_values.begin(), config.k_values.end());
  std::vector<Embedding> searchable;
  std::vector<std::size_t> searchable_at;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (query_embeddings[q].embedding) {
      searchable.push_back(std::move(*query_embeddings[q].embedding));
      searchable_at.push_back(q);
    } else {
      ++report.failed_queries;
    }
  }
  auto found = search_batch(index, searchable, max_k, config.threads);
  report.wall.search_ms = elapsed_ms(search_start);

  std::vector<QueryOutcome> outcomes(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) outcomes[q].truth_id = *queries[q].truth_id;
  for (std::size_t s = 0; s < searchable_at.size(); ++s) outcomes[searchable_at[s]].results = std::move(found[s]);

  std::vector<int> ks = config.k_values;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (int k : ks) report.accuracy.emplace_back(k, acc_at_k(outcomes, k));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    QueryRank r{queries[q].id, outcomes[q].truth_id, 0};
    const auto& hits = outcomes[q].results.hits;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      if (hits[i].id == r.truth_id) {
        r.rank = static_cast<int>(i) + 1;
        break;
      }
    }
    report.ranks.push_back(r);
  }
  report.wall.total_ms = elapsed_ms(start);
  return report;
}

MetricsReport run_experiment(const ExperimentConfig& config, std::span<const Listing> queries,
                             std::span<const Listing> products) {
  RunContext context;
  return run_experiment(config, queries, products, context);
}

// ---------------------------------------------------------------------------

FactorGrid FactorGrid::full() {
  FactorGrid g;
  g.ratios = {0.25, 0.5, 0.75, 1.0};
  g.colors = {named_color("red"), named_color("blue"), named_color("green"), named_color("orange"),
              named_color("black")};
  g.locations = {Location::Top, Location::Center, Location::Bottom};
  return g;
}

FactorGrid FactorGrid::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("factor grid must be a JSON object");
  FactorGrid g;
  try {
    if (j.contains("ratios")) g.ratios = j["ratios"].get<std::vector<double>>();
    if (j.contains("colors"))
      for (const auto& c : j["colors"]) g.colors.push_back(parse_color(c.get<std::string>()));
    if (j.contains("locations"))
      for (const auto& l : j["locations"]) g.locations.push_back(parse_location(l.get<std::string>()));
    if (j.contains("modes")) {
      g.modes.clear();
      for (const auto& m : j["modes"]) g.modes.push_back(parse_mode(m.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed factor grid: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("invalid factor grid: ") + e.what());
  }
  return g;
}

ordered_json FactorGrid::to_json() const {
  ordered_json j{{"ratios", ratios}, {"colors", ordered_json::array()}, {"locations", ordered_json::array()},
                 {"modes", ordered_json::array()}};
  for (const auto& c : colors) j["colors"].push_back(color_name(c));
  for (const auto& l : locations) j["locations"].push_back(to_string(l));
  for (const auto& m : modes) j["modes"].push_back(to_string(m));
  return j;
}

std::vector<SweepCell> expand_grid(const ExperimentConfig& base, const FactorGrid& grid) {
  const RenderSpec& b = base.render_spec;
  const auto ratios = grid.ratios.empty() ? std::vector<double>{b.font_size_ratio} : grid.ratios;
  const auto colors = grid.colors.empty() ? std::vector<Rgb>{b.color} : grid.colors;
  const auto locations = grid.locations.empty() ? std::vector<Location>{b.location} : grid.locations;
  if (grid.modes.empty()) throw ConfigError("factor grid has no modes");

  std::vector<SweepCell> cells;
  for (double ratio : ratios) {
    for (Rgb color : colors) {
      for (Location location : locations) {
        RenderSpec spec = b;
        spec.font_size_ratio = ratio;
        spec.color = color;
        spec.location = location;
        try {
          spec.validate();
        } catch (const InvalidInput& e) {
          throw ConfigError(std::string("invalid sweep cell: ") + e.what());
        }
        for (Mode mode : grid.modes) {
          if (!is_rendered(mode)) throw ConfigError("sweep mode " + to_string(mode) + " does not render text");
          cells.push_back({spec, mode});
        }
      }
    }
  }
  return cells;
}

std::vector<MetricsReport> factor_sweep(const ExperimentConfig& base, const FactorGrid& grid,
                                        std::span<const Listing> queries, std::span<const Listing> products,
                                        RunContext& context) {
  const auto cells = expand_grid(base, grid);
  std::vector<MetricsReport> reports;
  reports.reserve(cells.size());
  for (const auto& cell : cells) {
    ExperimentConfig config = base;
    config.render_spec = cell.spec;
    config.mode = cell.mode;
    reports.push_back(run_experiment(config, queries, products, context));
  }
  return reports;
}

}  // namespace typr
