#include "typr/knn.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "typr/errors.hpp"
#include "typr/parallel.hpp"

namespace typr {
namespace {

constexpr double kUnitTolerance = 1e-4;

struct WorstOnTop {
  bool operator()(const Hit& a, const Hit& b) const noexcept { return ranks_before(a, b); }
};

std::vector<Hit> scan_range(const KnnIndex& index, std::span<const float> query, std::size_t begin,
                            std::size_t end, std::size_t k) {
  std::priority_queue<Hit, std::vector<Hit>, WorstOnTop> heap;
  const auto ids = index.ids();
  for (std::size_t j = begin; j < end; ++j) {
    const Hit hit{ids[j], score_candidate(index, j, query)};
    if (heap.size() < k) {
      heap.push(hit);
    } else if (ranks_before(hit, heap.top())) {
      heap.pop();
      heap.push(hit);
    }
  }
  std::vector<Hit> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  return out;
}

}  // namespace

KnnIndex build_index(std::vector<std::uint64_t> ids, KnnIndex::Matrix vectors, std::string model_id) {
  if (ids.empty()) throw BuildError("cannot build an empty index");
  if (static_cast<Eigen::Index>(ids.size()) != vectors.cols())
    throw BuildError("index has " + std::to_string(ids.size()) + " ids but " +
                     std::to_string(vectors.cols()) + " vectors");
  if (vectors.rows() < 1) throw BuildError("index vectors must have dim >= 1");

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (!seen.insert(ids[j]).second) throw BuildError("duplicate product id " + std::to_string(ids[j]));
    const double norm = vectors.col(static_cast<Eigen::Index>(j)).cast<double>().norm();
    if (!(std::abs(norm - 1.0) <= kUnitTolerance))
      throw BuildError("vector for id " + std::to_string(ids[j]) + " has norm " + std::to_string(norm) +
                       ", expected 1 within 1e-4");
  }

  KnnIndex index;
  index.ids_ = std::move(ids);
  index.vectors_ = std::move(vectors);
  index.model_id_ = std::move(model_id);
  return index;
}

KnnIndex build_index(std::span<const IndexEntry> entries) {
  if (entries.empty()) throw BuildError("cannot build an empty index");
  const Eigen::Index dim = entries.front().embedding.dim();
  KnnIndex::Matrix vectors(dim, static_cast<Eigen::Index>(entries.size()));
  std::vector<std::uint64_t> ids;
  ids.reserve(entries.size());
  for (std::size_t j = 0; j < entries.size(); ++j) {
    const auto& e = entries[j];
    if (e.embedding.dim() != dim)
      throw BuildError("id " + std::to_string(e.id) + " has dim " + std::to_string(e.embedding.dim()) +
                       ", expected " + std::to_string(dim));
    vectors.col(static_cast<Eigen::Index>(j)) = e.embedding.vector;
    ids.push_back(e.id);
  }
  return build_index(std::move(ids), std::move(vectors), entries.front().embedding.model_id);
}

double score_candidate(const KnnIndex& index, std::size_t column, std::span<const float> query) noexcept {
  const float* v = index.vectors().data() + column * static_cast<std::size_t>(index.dim());
  double acc = 0.0;
  for (std::size_t d = 0; d < query.size(); ++d)
    acc += static_cast<double>(v[d]) * static_cast<double>(query[d]);
  return acc;
}

ResultList search(const KnnIndex& index, std::span<const float> query, int k, unsigned threads) {
  if (k < 1) throw InvalidInput("k must be >= 1");
  if (static_cast<Eigen::Index>(query.size()) != index.dim())
    throw InvalidInput("query dim " + std::to_string(query.size()) + " != index dim " +
                       std::to_string(index.dim()));
  const std::size_t n = index.size();
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), n);

  // Small pools are not worth the thread start-up.
  const std::size_t parts = n < 4096 ? 1 : std::min<std::size_t>(resolve_threads(threads), n / 1024);
  std::vector<std::vector<Hit>> partial(parts);
  parallel_for(parts, static_cast<unsigned>(parts), [&](std::size_t p) {
    const std::size_t begin = n * p / parts;
    const std::size_t end = n * (p + 1) / parts;
    partial[p] = scan_range(index, query, begin, end, keep);
  });

  ResultList out;
  for (auto& part : partial) out.hits.insert(out.hits.end(), part.begin(), part.end());
  std::sort(out.hits.begin(), out.hits.end(), ranks_before);
  out.hits.resize(keep);
  return out;
}

ResultList search(const KnnIndex& index, const Embedding& query, int k, unsigned threads) {
  return search(index, std::span<const float>(query.vector.data(), static_cast<std::size_t>(query.dim())), k,
                threads);
}

std::vector<ResultList> search_batch(const KnnIndex& index, std::span<const Embedding> queries, int k,
                                     unsigned threads) {
  std::vector<ResultList> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t q) { out[q] = search(index, queries[q], k, 1); });
  return out;
}

}  // namespace typr
