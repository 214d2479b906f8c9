#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

#include "typr/embedding.hpp"
#include "typr/errors.hpp"

namespace typr {

enum class FusionStrategy { Sum, Concat };

std::string to_string(FusionStrategy s);
FusionStrategy parse_fusion(std::string_view name);

/// Cosine similarity accumulated in double. Throws InvalidInput on a size
/// mismatch or a zero vector.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  if (u.size() != v.size())
    throw InvalidInput("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                       std::to_string(v.size()));
  const auto ud = u.template cast<double>();
  const auto vd = v.template cast<double>();
  const double nu = ud.norm();
  const double nv = vd.norm();
  if (nu == 0.0 || nv == 0.0) throw InvalidInput("cosine: zero vector");
  return ud.dot(vd) / (nu * nv);
}

double cosine(const Embedding& u, const Embedding& v);

/// Joint embedding of an image and a text embedding. Both halves are
/// renormalized first; Sum returns normalize(img + txt), Concat returns
/// (img || txt) / sqrt(2). Throws DegenerateFusion when Sum cancels out.
Embedding fuse(const Embedding& image, const Embedding& text, FusionStrategy strategy);

}  // namespace typr
