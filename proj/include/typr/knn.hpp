#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "typr/embedding.hpp"

namespace typr {

struct Hit {
  std::uint64_t id = 0;
  double score = 0.0;
  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Hits by descending score; equal scores by ascending id.
struct ResultList {
  std::vector<Hit> hits;
  friend bool operator==(const ResultList&, const ResultList&) = default;
};

/// Strict ranking order used everywhere: higher score first, then lower id.
constexpr bool ranks_before(const Hit& a, const Hit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

struct IndexEntry {
  std::uint64_t id = 0;
  Embedding embedding;
};

/// Immutable candidate pool: one f32 column per entry (dim x count).
class KnnIndex {
 public:
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;

  const Matrix& vectors() const noexcept { return vectors_; }
  std::span<const std::uint64_t> ids() const noexcept { return ids_; }
  Eigen::Index dim() const noexcept { return vectors_.rows(); }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& model_id() const noexcept { return model_id_; }

  friend bool operator==(const KnnIndex& a, const KnnIndex& b) {
    return a.ids_ == b.ids_ && a.model_id_ == b.model_id_ && a.vectors_.rows() == b.vectors_.rows() &&
           a.vectors_.cols() == b.vectors_.cols() && a.vectors_ == b.vectors_;
  }

 private:
  friend KnnIndex build_index(std::vector<std::uint64_t>, Matrix, std::string);

  std::vector<std::uint64_t> ids_;
  Matrix vectors_;
  std::string model_id_;
};

/// Validates (non-empty, unique ids, unit norm within 1e-4) and builds.
/// Throws BuildError naming the offending id.
KnnIndex build_index(std::vector<std::uint64_t> ids, KnnIndex::Matrix vectors, std::string model_id);
KnnIndex build_index(std::span<const IndexEntry> entries);

/// Dot product of a stored column with a query, accumulated in double in
/// ascending coordinate order.
double score_candidate(const KnnIndex& index, std::size_t column, std::span<const float> query) noexcept;

/// Exact top-min(k, N). `threads` = 0 uses hardware concurrency; the result
/// does not depend on it. Throws InvalidInput on dim mismatch or k < 1.
ResultList search(const KnnIndex& index, std::span<const float> query, int k, unsigned threads = 1);
ResultList search(const KnnIndex& index, const Embedding& query, int k, unsigned threads = 1);

/// Distributes queries across a worker pool; output order matches input.
std::vector<ResultList> search_batch(const KnnIndex& index, std::span<const Embedding> queries, int k,
                                     unsigned threads = 0);

/// Store layout (little-endian):
///   "TYPF" | version u16 = 1 | dim u32 | count u64 | model_id (u32 length + UTF-8)
///   then count records of { id u64, dim x f32 }.
std::vector<std::uint8_t> serialize_index(const KnnIndex& index);
/// Throws FormatError (with byte offset) on bad magic, version or truncation.
KnnIndex deserialize_index(std::span<const std::uint8_t> bytes);

void save_index(const KnnIndex& index, const std::filesystem::path& path);
KnnIndex load_index(const std::filesystem::path& path);

}  // namespace typr
