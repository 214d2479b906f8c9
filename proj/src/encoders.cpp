#include "typr/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "typr/errors.hpp"
#include "typr/remote_encoder.hpp"
#include "typr/rng.hpp"

namespace typr {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::ReferenceImage: return "reference_image";
    case EncoderKind::ReferenceText: return "reference_text";
    case EncoderKind::Remote: return "remote";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "reference_image") return EncoderKind::ReferenceImage;
  if (name == "reference_text") return EncoderKind::ReferenceText;
  if (name == "remote") return EncoderKind::Remote;
  throw InvalidInput("unknown encoder kind '" + std::string(name) + "'");
}

EncoderHandle EncoderHandle::reference_image(std::string model_id, int dim, std::uint64_t seed) {
  EncoderHandle h;
  h.kind = EncoderKind::ReferenceImage;
  h.model_id = std::move(model_id);
  h.dim = dim;
  h.seed = seed;
  h.modality = Modality::Image;
  return h;
}

EncoderHandle EncoderHandle::reference_text(std::string model_id, int dim, std::uint64_t seed) {
  EncoderHandle h;
  h.kind = EncoderKind::ReferenceText;
  h.model_id = std::move(model_id);
  h.dim = dim;
  h.seed = seed;
  h.modality = Modality::Text;
  return h;
}

EncoderHandle EncoderHandle::remote(std::string endpoint, std::string model_id, Modality modality) {
  EncoderHandle h;
  h.kind = EncoderKind::Remote;
  h.endpoint = std::move(endpoint);
  h.model_id = std::move(model_id);
  h.modality = modality;
  h.dim = 0;
  return h;
}

std::string EncoderHandle::fingerprint() const {
  std::string fp = to_string(kind) + ":" + model_id;
  if (kind == EncoderKind::Remote) return fp + "@" + endpoint + "/" + typr::to_string(modality);
  fp += ":dim=" + std::to_string(dim) + ":seed=" + std::to_string(seed);
  if (kind == EncoderKind::ReferenceImage) fp += ":grid=" + std::to_string(grid);
  return fp;
}

// ---------------------------------------------------------------------------

ReferenceImageEncoder::ReferenceImageEncoder(const EncoderHandle& handle) : handle_(handle) {
  if (handle.kind != EncoderKind::ReferenceImage)
    throw InvalidInput("ReferenceImageEncoder needs a reference_image handle");
  if (handle.dim < 1 || handle.grid < 1) throw InvalidInput("reference image encoder needs dim, grid >= 1");
  const Eigen::Index rows = static_cast<Eigen::Index>(handle.grid) * handle.grid + 1;
  projection_.resize(rows, handle.dim);
  SplitMix64 rng(handle.seed);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < handle.dim; ++c) projection_(r, c) = rng.uniform(-1.0, 1.0);
}

Eigen::VectorXd ReferenceImageEncoder::pooled(const Image& image) const {
  if (image.width() < 1 || image.height() < 1) throw InvalidInput("image smaller than 1x1");
  const int G = handle_.grid;
  const int W = image.width();
  const int H = image.height();
  Eigen::VectorXd features(static_cast<Eigen::Index>(G) * G + 1);
  const auto bytes = image.bytes();
  for (int gy = 0; gy < G; ++gy) {
    const int y0 = static_cast<int>(static_cast<long>(gy) * H / G);
    const int y1 = std::max(y0 + 1, static_cast<int>(static_cast<long>(gy + 1) * H / G));
    for (int gx = 0; gx < G; ++gx) {
      const int x0 = static_cast<int>(static_cast<long>(gx) * W / G);
      const int x1 = std::max(x0 + 1, static_cast<int>(static_cast<long>(gx + 1) * W / G));
      // Integer luma sum keeps pooling exact; one division at the end.
      std::int64_t luma_sum = 0;
      for (int y = y0; y < std::min(y1, H); ++y) {
        const std::uint8_t* row = bytes.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(W) * 3;
        for (int x = x0; x < std::min(x1, W); ++x) {
          const std::uint8_t* p = row + static_cast<std::size_t>(x) * 3;
          luma_sum += 299 * p[0] + 587 * p[1] + 114 * p[2];
        }
      }
      const std::int64_t count =
          static_cast<std::int64_t>(std::min(y1, H) - y0) * (std::min(x1, W) - x0);
      features(static_cast<Eigen::Index>(gy) * G + gx) =
          static_cast<double>(luma_sum) / (255000.0 * static_cast<double>(count));
    }
  }
  features(features.size() - 1) = 1.0;
  return features;
}

Embedding ReferenceImageEncoder::embed(const Image& image) const {
  const Eigen::VectorXd features = pooled(image);
  // Fixed accumulation order: feature index ascending, per output column.
  Eigen::VectorXd projected(handle_.dim);
  for (Eigen::Index c = 0; c < projection_.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < projection_.rows(); ++r) acc += features(r) * projection_(r, c);
    projected(c) = acc;
  }
  return Embedding::normalized(projected, Modality::Image, handle_.model_id);
}

// ---------------------------------------------------------------------------

ReferenceTextEncoder::ReferenceTextEncoder(const EncoderHandle& handle) : handle_(handle) {
  if (handle.kind != EncoderKind::ReferenceText)
    throw InvalidInput("ReferenceTextEncoder needs a reference_text handle");
  if (handle.dim < 1) throw InvalidInput("reference text encoder needs dim >= 1");
}

std::size_t ReferenceTextEncoder::bucket_of(std::string_view trigram) const noexcept {
  return static_cast<std::size_t>(seeded_hash(trigram, handle_.seed) %
                                  static_cast<std::uint64_t>(handle_.dim));
}

std::size_t ReferenceTextEncoder::empty_bucket() const noexcept {
  return static_cast<std::size_t>(mix64(handle_.seed ^ 0x656d707479ULL) %
                                  static_cast<std::uint64_t>(handle_.dim));
}

Eigen::VectorXd ReferenceTextEncoder::counts(std::string_view text) const {
  Eigen::VectorXd buckets = Eigen::VectorXd::Zero(handle_.dim);
  if (text.empty()) {
    buckets(static_cast<Eigen::Index>(empty_bucket())) = 1.0;
    return buckets;
  }
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back('^');
  for (char c : text) padded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  padded.push_back('$');
  const std::string_view view(padded);
  for (std::size_t i = 0; i + 3 <= view.size(); ++i)
    buckets(static_cast<Eigen::Index>(bucket_of(view.substr(i, 3)))) += 1.0;
  return buckets;
}

Embedding ReferenceTextEncoder::embed(std::string_view text) const {
  return Embedding::normalized(counts(text), Modality::Text, handle_.model_id);
}

Embedding embed_image_reference(const EncoderHandle& handle, const Image& image) {
  return ReferenceImageEncoder(handle).embed(image);
}

Embedding embed_text_reference(const EncoderHandle& handle, std::string_view text) {
  return ReferenceTextEncoder(handle).embed(text);
}

// ---------------------------------------------------------------------------

namespace {

class ReferenceImageBatch final : public ImageEncoder {
 public:
  explicit ReferenceImageBatch(const EncoderHandle& h) : encoder_(h), handle_(h) {}
  std::vector<Embedding> embed_images(std::span<const Image* const> images) const override {
    std::vector<Embedding> out;
    out.reserve(images.size());
    for (const Image* img : images) out.push_back(encoder_.embed(*img));
    return out;
  }
  const EncoderHandle& handle() const override { return handle_; }

 private:
  ReferenceImageEncoder encoder_;
  EncoderHandle handle_;
};

class ReferenceTextBatch final : public TextEncoder {
 public:
  explicit ReferenceTextBatch(const EncoderHandle& h) : encoder_(h), handle_(h) {}
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) const override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encoder_.embed(t));
    return out;
  }
  const EncoderHandle& handle() const override { return handle_; }

 private:
  ReferenceTextEncoder encoder_;
  EncoderHandle handle_;
};

class RemoteImageBatch final : public ImageEncoder {
 public:
  explicit RemoteImageBatch(const EncoderHandle& h) : client_(std::make_shared<RemoteEncoderClient>(h)) {}
  std::vector<Embedding> embed_images(std::span<const Image* const> images) const override {
    std::vector<RemoteInput> inputs;
    inputs.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
      inputs.push_back(RemoteInput::image_input(std::to_string(i), *images[i]));
    return client_->embed(inputs);
  }
  const EncoderHandle& handle() const override { return client_->handle(); }

 private:
  std::shared_ptr<RemoteEncoderClient> client_;
};

class RemoteTextBatch final : public TextEncoder {
 public:
  explicit RemoteTextBatch(const EncoderHandle& h) : client_(std::make_shared<RemoteEncoderClient>(h)) {}
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) const override {
    std::vector<RemoteInput> inputs;
    inputs.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i)
      inputs.push_back(RemoteInput::text_input(std::to_string(i), texts[i]));
    return client_->embed(inputs);
  }
  const EncoderHandle& handle() const override { return client_->handle(); }

 private:
  std::shared_ptr<RemoteEncoderClient> client_;
};

}  // namespace

std::unique_ptr<ImageEncoder> make_image_encoder(const EncoderHandle& handle) {
  switch (handle.kind) {
    case EncoderKind::ReferenceImage: return std::make_unique<ReferenceImageBatch>(handle);
    case EncoderKind::Remote: {
      EncoderHandle h = handle;
      h.modality = Modality::Image;
      return std::make_unique<RemoteImageBatch>(h);
    }
    case EncoderKind::ReferenceText: break;
  }
  throw InvalidInput("handle '" + handle.model_id + "' cannot encode images");
}

std::unique_ptr<TextEncoder> make_text_encoder(const EncoderHandle& handle) {
  switch (handle.kind) {
    case EncoderKind::ReferenceText: return std::make_unique<ReferenceTextBatch>(handle);
    case EncoderKind::Remote: {
      EncoderHandle h = handle;
      h.modality = Modality::Text;
      return std::make_unique<RemoteTextBatch>(h);
    }
    case EncoderKind::ReferenceImage: break;
  }
  throw InvalidInput("handle '" + handle.model_id + "' cannot encode text");
}

}  // namespace typr
