#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "typr/cache.hpp"
#include "typr/image.hpp"
#include "typr/listing.hpp"

namespace typr {

/// One line of a JSON Lines manifest:
///   {"id": 12, "image": "img/12.png", "title": "...", "description": "...",
///    "attributes": {"brand": "Nike"}, "truth_id": 7}
/// Only id and image are required; truth_id marks a query's ground truth.
struct ManifestRecord {
  std::uint64_t id = 0;
  std::string image;
  std::optional<std::string> title;
  std::optional<std::string> description;
  std::optional<Attributes> attributes;
  std::optional<std::uint64_t> truth_id;
};

/// Condenses listing text into a title-length summary.
class Summarizer {
 public:
  virtual ~Summarizer() = default;
  /// Throws on failure; derive_title falls back to truncation.
  virtual std::string summarize(const ManifestRecord& record, std::size_t char_budget) const = 0;
};

/// POSTs {title, description, attributes, budget} to `endpoint` and reads
/// {"summary": "..."}.
class HttpSummarizer final : public Summarizer {
 public:
  explicit HttpSummarizer(std::string endpoint, int timeout_ms = 30000);
  std::string summarize(const ManifestRecord& record, std::size_t char_budget) const override;

 private:
  std::string base_;
  std::string path_;
  int timeout_ms_;
};

constexpr std::size_t kDefaultTitleBudget = 120;

/// Longest prefix of at most `budget` bytes ending at a word boundary, with
/// trailing whitespace removed. A single word longer than the budget is cut
/// at the budget (on a UTF-8 boundary).
std::string truncate_at_whitespace(std::string_view text, std::size_t budget);

/// "k: v; k: v" in manifest order.
std::string join_attributes(const Attributes& attributes);

/// Title used as the listing's text input. Throws InvalidInput when the
/// record has no title, description or attributes. Summarizer failures are
/// reported through warn() and fall back to truncation.
std::string derive_title(const ManifestRecord& record, const Summarizer* summarizer,
                         std::size_t char_budget = kDefaultTitleBudget);

/// Parses JSON Lines. Blank lines are skipped. Throws InvalidInput citing
/// the 1-based line number on malformed lines or duplicate ids.
std::vector<ManifestRecord> parse_manifest(std::istream& in);

/// Parses, resolves image paths relative to the manifest's directory (they
/// must exist), and derives titles. Nothing is returned on error.
std::vector<Listing> load_manifest(const std::filesystem::path& path, const Summarizer* summarizer = nullptr,
                                   std::size_t char_budget = kDefaultTitleBudget);

/// Writes listings as a manifest whose image paths are relative to `path`.
void write_manifest(const std::filesystem::path& path, const std::vector<Listing>& listings);

/// Decodes listing images once per path and memoizes their content hashes.
/// Safe for concurrent use; each key is computed once under its own lock.
class ImageStore {
 public:
  std::shared_ptr<const Image> load(const Listing& listing);
  /// SHA-256 of the listing's image content (file bytes or raw pixels).
  std::string content_hash(const Listing& listing);

 private:
  struct Slot {
    std::mutex mutex;
    std::shared_ptr<const Image> image;
    std::string hash;
  };
  std::shared_ptr<Slot> slot_for(const std::string& key);

  std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace typr
