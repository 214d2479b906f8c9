#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "typr/cache.hpp"
#include "typr/embedding.hpp"
#include "typr/encoders.hpp"
#include "typr/font.hpp"
#include "typr/fusion.hpp"
#include "typr/ingest.hpp"
#include "typr/knn.hpp"
#include "typr/listing.hpp"
#include "typr/typograph.hpp"

namespace typr {

/// The six retrieval configurations per model. RawSum/RawConcat are
/// inference mode A, RenderedImageOnly is B, RenderedSum/RenderedConcat are C.
enum class Mode { RawImageOnly, RawSum, RawConcat, RenderedImageOnly, RenderedSum, RenderedConcat };

std::string to_string(Mode mode);
/// Accepts the snake_case names ("rendered_sum") and the letters "A", "B", "C"
/// (A = raw_sum, B = rendered_image_only, C = rendered_sum).
Mode parse_mode(std::string_view name);
bool is_rendered(Mode mode) noexcept;
std::optional<FusionStrategy> fusion_of(Mode mode) noexcept;
const std::vector<Mode>& all_modes();

struct ExperimentConfig {
  Mode mode = Mode::RenderedImageOnly;
  RenderSpec render_spec;
  EncoderHandle image_encoder = EncoderHandle::reference_image();
  EncoderHandle text_encoder = EncoderHandle::reference_text();
  std::vector<int> k_values{1, 3};
  std::uint64_t seed = 0;
  unsigned threads = 0;  // not part of the fingerprint; results do not depend on it

  void validate() const;
  nlohmann::ordered_json to_json() const;
  /// Inverse of to_json; also reads "threads". Unknown keys are ignored so
  /// the object can sit inside a larger run file. Throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// SHA-256 of to_json().dump().
  std::string fingerprint() const;
};

struct QueryOutcome {
  ResultList results;
  std::uint64_t truth_id = 0;
};

/// Fraction of queries whose truth is among the first k hits.
/// Throws InvalidInput for an empty set or k < 1.
double acc_at_k(std::span<const QueryOutcome> outcomes, int k);

struct QueryRank {
  std::uint64_t query_id = 0;
  std::uint64_t truth_id = 0;
  /// 1-based rank of the truth within the retrieved hits; 0 if not retrieved.
  int rank = 0;
};

struct WallClock {
  double embed_ms = 0.0;
  double search_ms = 0.0;
  double total_ms = 0.0;
};

struct MetricsReport {
  std::string fingerprint;
  nlohmann::ordered_json config;
  std::vector<std::pair<int, double>> accuracy;  // (k, Acc@k) ascending k
  std::vector<QueryRank> ranks;
  std::size_t n_queries = 0;
  std::size_t n_products = 0;
  std::size_t failed_queries = 0;  // degenerate fusion; counted as misses
  WallClock wall;

  double acc(int k) const;
  /// Timing is excluded unless asked for, so reports of identical runs are
  /// byte-identical.
  nlohmann::ordered_json to_json(bool include_timing = false) const;
};

/// In-memory embedding memo shared across runs (e.g. sweep cells), with an
/// optional on-disk ContentCache behind it.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::shared_ptr<ContentCache> disk = nullptr) : disk_(std::move(disk)) {}

  std::optional<Embedding> find(const std::string& key) const;
  void store(const std::string& key, const Embedding& embedding);

  std::size_t computed() const noexcept { return computed_; }

 private:
  std::shared_ptr<ContentCache> disk_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, Embedding> memory_;
  std::size_t computed_ = 0;
};

/// Long-lived state for a sequence of runs: encoders, decoded images, fonts
/// and embedding caches.
class RunContext {
 public:
  RunContext(std::shared_ptr<ContentCache> disk_cache = nullptr);

  const FontFace& font_for(const RenderSpec& spec);
  ImageStore& images() noexcept { return images_; }
  EmbeddingCache& embeddings() noexcept { return embeddings_; }
  const ImageEncoder& image_encoder(const EncoderHandle& handle);
  const TextEncoder& text_encoder(const EncoderHandle& handle);

 private:
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<FontFace>> fonts_;
  std::map<std::string, std::unique_ptr<ImageEncoder>> image_encoders_;
  std::map<std::string, std::unique_ptr<TextEncoder>> text_encoders_;
  ImageStore images_;
  EmbeddingCache embeddings_;
};

/// The image half of a listing's embedding under `mode`: g(i), or g(i-hat)
/// with the title rendered per `spec`. The source image is never modified.
Embedding embed_listing_image(const Listing& listing, Mode mode, const RenderSpec& spec,
                              const EncoderHandle& image_encoder, RunContext& context);

/// Full per-mode embedding: image-only modes return the image half; fused
/// modes fuse it with the encoded title.
Embedding embed_listing(const Listing& listing, Mode mode, const RenderSpec& spec, const EncoderHandle& image_encoder,
                        const EncoderHandle& text_encoder, RunContext& context);

/// Embeds products, builds the index, embeds queries, searches max(k) and
/// reports Acc@k. Throws ConfigError before any embedding if a query lacks
/// a truth id or its truth is not among the products.
/// Batched embed_listing over many listings, in input order. Throws
/// DegenerateFusion naming the first listing that cannot be fused.
std::vector<Embedding> embed_listings(std::span<const Listing> listings, Mode mode, const RenderSpec& spec,
                                      const EncoderHandle& image_encoder, const EncoderHandle& text_encoder,
                                      RunContext& context, unsigned threads = 0);

MetricsReport run_experiment(const ExperimentConfig& config, std::span<const Listing> queries,
                             std::span<const Listing> products, RunContext& context);
MetricsReport run_experiment(const ExperimentConfig& config, std::span<const Listing> queries,
                             std::span<const Listing> products);

/// Factor values to sweep. An empty list keeps the base config's value.
/// The cells are the Cartesian product ratios x colors x locations x modes.
struct FactorGrid {
  std::vector<double> ratios;
  std::vector<Rgb> colors;
  std::vector<Location> locations;
  std::vector<Mode> modes{Mode::RenderedImageOnly, Mode::RenderedSum};

  /// The sweep used in the experiments: {25,50,75,100}% x 5 colors x 3 locations.
  static FactorGrid full();
  static FactorGrid from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct SweepCell {
  RenderSpec spec;
  Mode mode;
};

/// Expands and validates every cell. Throws ConfigError on an invalid cell.
std::vector<SweepCell> expand_grid(const ExperimentConfig& base, const FactorGrid& grid);

std::vector<MetricsReport> factor_sweep(const ExperimentConfig& base, const FactorGrid& grid,
                                        std::span<const Listing> queries, std::span<const Listing> products,
                                        RunContext& context);

}  // namespace typr
