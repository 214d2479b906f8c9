#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "typr/errors.hpp"

namespace typr {

enum class Modality { Image, Text, Fused };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::Image: return "image";
    case Modality::Text: return "text";
    case Modality::Fused: return "fused";
  }
  return "?";
}

/// Unit-norm embedding with provenance. Every producer normalizes at its
/// boundary through `normalized`, so consumers may treat cosine as a dot product.
template <typename Scalar>
struct BasicEmbedding {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector vector;
  Modality modality = Modality::Image;
  std::string model_id;

  Eigen::Index dim() const noexcept { return vector.size(); }

  /// L2-normalizes in double precision. Throws InvalidInput on an empty,
  /// zero or non-finite vector.
  template <typename Derived>
  static BasicEmbedding normalized(const Eigen::MatrixBase<Derived>& raw, Modality modality,
                                   std::string model_id) {
    if (raw.size() == 0) throw InvalidInput("embedding must have dim >= 1");
    const Eigen::VectorXd v = raw.template cast<double>();
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw InvalidInput("cannot normalize a zero or non-finite vector");
    return {(v / norm).template cast<Scalar>(), modality, std::move(model_id)};
  }
};

using Embedding = BasicEmbedding<float>;

}  // namespace typr
