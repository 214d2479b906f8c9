#include "typr/fusion.hpp"

#include <cctype>
#include <cmath>

namespace typr {

std::string to_string(FusionStrategy s) { return s == FusionStrategy::Sum ? "sum" : "concat"; }

FusionStrategy parse_fusion(std::string_view name) {
  std::string n(name);
  for (auto& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (n == "sum") return FusionStrategy::Sum;
  if (n == "concat") return FusionStrategy::Concat;
  throw InvalidInput("unknown fusion strategy '" + std::string(name) + "'");
}

double cosine(const Embedding& u, const Embedding& v) { return cosine(u.vector, v.vector); }

Embedding fuse(const Embedding& image, const Embedding& text, FusionStrategy strategy) {
  if (image.dim() != text.dim())
    throw InvalidInput("fuse: dimension mismatch " + std::to_string(image.dim()) + " vs " +
                       std::to_string(text.dim()));
  if (image.dim() == 0 || image.vector.isZero(0.0) || text.vector.isZero(0.0))
    throw InvalidInput("fuse: zero or empty embedding");
  const Eigen::VectorXd a = image.vector.cast<double>().normalized();
  const Eigen::VectorXd b = text.vector.cast<double>().normalized();
  std::string model = image.model_id + "+" + text.model_id + "/" + to_string(strategy);

  if (strategy == FusionStrategy::Sum) {
    const Eigen::VectorXd sum = a + b;
    if (sum.norm() < 1e-9) throw DegenerateFusion("sum fusion of antipodal embeddings");
    return Embedding::normalized(sum, Modality::Fused, std::move(model));
  }
  Eigen::VectorXd joint(a.size() + b.size());
  joint << a, b;
  joint /= std::sqrt(2.0);
  return {joint.cast<float>(), Modality::Fused, std::move(model)};
}

}  // namespace typr
