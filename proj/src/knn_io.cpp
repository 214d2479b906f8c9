#include <bit>
#include <cstring>

#include "typr/errors.hpp"
#include "typr/image.hpp"
#include "typr/knn.hpp"

namespace typr {
namespace {

constexpr char kMagic[4] = {'T', 'Y', 'P', 'F'};
constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(u & 0xFF));
      if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
    }
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }
  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_index(const KnnIndex& index) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le<std::uint16_t>(kVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(index.dim()));
  w.le<std::uint64_t>(index.size());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(index.model_id().size()));
  w.bytes(index.model_id().data(), index.model_id().size());
  const auto ids = index.ids();
  const float* data = index.vectors().data();
  const auto dim = static_cast<std::size_t>(index.dim());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    w.le<std::uint64_t>(ids[j]);
    for (std::size_t d = 0; d < dim; ++d) w.f32(data[j * dim + d]);
  }
  return w.take();
}

KnnIndex deserialize_index(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("bad magic", 0);
  r.take(sizeof kMagic, "magic");
  const auto version_at = r.offset();
  const auto version = r.le<std::uint16_t>("version");
  if (version != kVersion)
    throw FormatError("unsupported store version " + std::to_string(version), version_at);
  const auto dim_at = r.offset();
  const auto dim = r.le<std::uint32_t>("dim");
  if (dim == 0) throw FormatError("dim must be >= 1", dim_at);
  const auto count_at = r.offset();
  const auto count = r.le<std::uint64_t>("count");
  if (count == 0) throw FormatError("count must be >= 1", count_at);
  const auto name_len = r.le<std::uint32_t>("model_id length");
  const auto name = r.take(name_len, "model_id");
  std::string model_id(name.begin(), name.end());

  const std::uint64_t record = 8 + 4ULL * dim;
  if (count > r.remaining() / record)
    throw FormatError("truncated file: header declares " + std::to_string(count) + " records of " +
                          std::to_string(record) + " bytes, " + std::to_string(r.remaining()) +
                          " bytes remain",
                      r.offset() + (r.remaining() / record) * record);

  std::vector<std::uint64_t> ids(count);
  KnnIndex::Matrix vectors(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  float* out = vectors.data();
  for (std::uint64_t j = 0; j < count; ++j) {
    ids[j] = r.le<std::uint64_t>("record id");
    for (std::uint32_t d = 0; d < dim; ++d) out[j * dim + d] = r.f32("record vector");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last record", r.offset());

  try {
    return build_index(std::move(ids), std::move(vectors), std::move(model_id));
  } catch (const BuildError& e) {
    throw FormatError(std::string("invalid store contents: ") + e.what(), sizeof kMagic + 2 + 4 + 8 + 4 + name_len);
  }
}

void save_index(const KnnIndex& index, const std::filesystem::path& path) {
  write_file(path, serialize_index(index));
}

KnnIndex load_index(const std::filesystem::path& path) { return deserialize_index(read_file(path)); }

}  // namespace typr
