#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "typr/image.hpp"

namespace typr {

using Attributes = std::vector<std::pair<std::string, std::string>>;

/// Text kept alongside the derived title for later summarization.
struct RawText {
  std::optional<std::string> title;
  std::optional<std::string> description;
  std::optional<Attributes> attributes;
};

/// A product or a query: image plus title text.
struct Listing {
  std::uint64_t id = 0;
  std::filesystem::path image_path;
  std::string title;
  std::optional<RawText> raw_text;
  /// Ground-truth product for queries.
  std::optional<std::uint64_t> truth_id;
  /// Decoded image held in memory (synthetic corpora); takes precedence
  /// over image_path when set.
  std::shared_ptr<const Image> image;
};

struct Dataset {
  std::vector<Listing> queries;
  std::vector<Listing> products;
};

}  // namespace typr
