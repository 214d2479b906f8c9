#include "typr/cache.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <thread>

#include <openssl/sha.h>

#include "typr/errors.hpp"
#include "typr/image.hpp"

namespace typr {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out += kHex[c >> 4];
    out += kHex[c & 15];
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ContentCache::ContentCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path ContentCache::path_for(std::string_view key) const {
  const std::string digest = sha256_hex(key);
  return root_ / digest.substr(0, 2) / digest;
}

std::optional<std::vector<std::uint8_t>> ContentCache::get(std::string_view key) const {
  const auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void ContentCache::put(std::string_view key, std::span<const std::uint8_t> value) const {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter.fetch_add(1));
  write_file(tmp, value);
  std::filesystem::rename(tmp, path);
}

std::shared_ptr<std::mutex> ContentCache::lock_for(const std::string& digest) const {
  std::lock_guard lock(map_mutex_);
  auto& slot = key_locks_[digest];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

std::vector<std::uint8_t> ContentCache::get_or_compute(
    std::string_view key, const std::function<std::vector<std::uint8_t>()>& compute) const {
  auto key_lock = lock_for(sha256_hex(key));
  std::lock_guard guard(*key_lock);
  if (auto cached = get(key)) {
    std::lock_guard lock(map_mutex_);
    ++hits_;
    return std::move(*cached);
  }
  auto value = compute();
  put(key, value);
  std::lock_guard lock(map_mutex_);
  ++misses_;
  return value;
}

std::size_t ContentCache::hits() const {
  std::lock_guard lock(map_mutex_);
  return hits_;
}

std::size_t ContentCache::misses() const {
  std::lock_guard lock(map_mutex_);
  return misses_;
}

std::optional<std::filesystem::path> cache_root_from_env(std::optional<std::filesystem::path> fallback) {
  if (const char* env = std::getenv("TYPR_CACHE_ROOT"); env != nullptr && *env != '\0')
    return std::filesystem::path(env);
  return fallback;
}

}  // namespace typr
