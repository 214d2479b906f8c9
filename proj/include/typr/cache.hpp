#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace typr {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Content-addressed blob store: each key maps to a file named by the
/// SHA-256 of the key under `root`, sharded by the first two hex digits.
/// Writes go through a temp file and rename, so readers never observe a
/// torn entry. Concurrent get_or_compute calls for one key run the
/// computation once.
class ContentCache {
 public:
  explicit ContentCache(std::filesystem::path root);

  std::optional<std::vector<std::uint8_t>> get(std::string_view key) const;
  void put(std::string_view key, std::span<const std::uint8_t> value) const;

  std::vector<std::uint8_t> get_or_compute(std::string_view key,
                                           const std::function<std::vector<std::uint8_t>()>& compute) const;

  std::filesystem::path path_for(std::string_view key) const;
  const std::filesystem::path& root() const noexcept { return root_; }

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<std::mutex> lock_for(const std::string& digest) const;

  std::filesystem::path root_;
  mutable std::mutex map_mutex_;
  mutable std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

/// Cache root from TYPR_CACHE_ROOT when set, otherwise `fallback`.
std::optional<std::filesystem::path> cache_root_from_env(std::optional<std::filesystem::path> fallback);

}  // namespace typr
