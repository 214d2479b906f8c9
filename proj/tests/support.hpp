#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "typr/embedding.hpp"
#include "typr/font.hpp"
#include "typr/rng.hpp"

namespace typr::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("typr-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline const FontFace& shipped_font() {
  static const FontFace font = FontFace::load(default_font_path());
  return font;
}

/// Uniform random unit vector from a seeded Gaussian.
inline Eigen::VectorXf random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return (v / v.norm()).cast<float>();
}

inline Embedding unit_embedding(const Eigen::VectorXf& v, std::string model = "test") {
  return Embedding::normalized(v, Modality::Image, std::move(model));
}

}  // namespace typr::testing
