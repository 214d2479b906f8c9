#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "typr/listing.hpp"

namespace typr {

enum class DistractorPolicy {
  RoundRobin,     // product j gets shape class j mod n_classes
  UniformRandom,  // each distractor draws its class uniformly
};

/// Desk-scale stand-in for a product catalogue. Every query has exactly one
/// ground-truth product that shares its title and shape class; all other
/// products are drawn from the same shape classes with different titles, so
/// raw pixels alone cannot single out the match.
struct SyntheticCorpusSpec {
  int n_queries = 200;
  int n_products = 2000;
  int image_size = 128;
  int n_classes = 10;
  int position_jitter = 2;      // px, uniform in [-j, j] per axis
  double shape_radius = 0.2;    // fraction of image_size
  double scale_jitter = 0.05;   // relative shape size variation
  int color_jitter = 6;         // per-channel, uniform in [-j, j]
  double shape_contrast = 0.25; // 1 = class colour, 0 = invisible on the background
  int background_jitter = 0;    // background grey level 243 +- j
  std::vector<std::vector<std::string>> title_slots;  // empty = built-in vocabulary
  DistractorPolicy distractors = DistractorPolicy::RoundRobin;
  std::uint64_t seed = 0;

  /// Number of distinct titles the vocabulary can produce.
  std::uint64_t title_capacity() const;
};

/// Throws ConfigError when counts are invalid or exceed the palette or
/// vocabulary. Query ids start at 1'000'000; product ids are 1..n_products.
Dataset generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

/// Number of shape classes available to the generator.
int synthetic_class_count();
/// Shape class of a listing produced by generate_synthetic_corpus.
int synthetic_class_of(const Listing& listing);

/// Writes images/<id>.png plus queries.jsonl and products.jsonl under `dir`,
/// and repoints each listing's image_path at its file.
void write_dataset(Dataset& dataset, const std::filesystem::path& dir);

}  // namespace typr
