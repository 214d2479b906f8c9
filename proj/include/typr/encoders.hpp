#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "typr/embedding.hpp"
#include "typr/image.hpp"

namespace typr {

enum class EncoderKind { ReferenceImage, ReferenceText, Remote };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// Everything needed to construct an encoder. Reference kinds use `seed`,
/// `dim` and `grid`; the remote kind uses the endpoint fields and `modality`.
struct EncoderHandle {
  EncoderKind kind = EncoderKind::ReferenceImage;
  std::string model_id = "ref-image";
  int dim = 256;
  std::uint64_t seed = 0;
  int grid = 16;

  std::string endpoint;           // e.g. http://127.0.0.1:8000
  Modality modality = Modality::Image;  // remote: which side this handle encodes
  int timeout_ms = 30000;
  int max_batch = 32;
  int max_in_flight = 4;
  int retries = 3;
  int backoff_ms = 100;

  static EncoderHandle reference_image(std::string model_id = "ref-image", int dim = 256,
                                       std::uint64_t seed = 0);
  static EncoderHandle reference_text(std::string model_id = "ref-text", int dim = 256,
                                      std::uint64_t seed = 0);
  static EncoderHandle remote(std::string endpoint, std::string model_id, Modality modality);

  /// Identity of the embedding function; two handles with equal fingerprints
  /// produce identical embeddings.
  std::string fingerprint() const;
};

/// Hermetic image encoder: grayscale, average-pool onto a grid x grid raster
/// (row-major), append a constant 1.0, project by a seeded uniform [-1, 1]
/// matrix, L2-normalize.
class ReferenceImageEncoder {
 public:
  explicit ReferenceImageEncoder(const EncoderHandle& handle);

  Embedding embed(const Image& image) const;
  /// Pooled grayscale features plus the bias entry, before projection.
  Eigen::VectorXd pooled(const Image& image) const;
  const Eigen::MatrixXd& projection() const noexcept { return projection_; }

 private:
  EncoderHandle handle_;
  Eigen::MatrixXd projection_;  // (grid^2 + 1) x dim
};

/// Hermetic text encoder: lowercase, trigrams of "^text$", seeded hashing
/// into `dim` buckets, L2-normalize. Empty text sets a reserved bucket.
class ReferenceTextEncoder {
 public:
  explicit ReferenceTextEncoder(const EncoderHandle& handle);

  Embedding embed(std::string_view text) const;
  /// Raw bucket counts before normalization.
  Eigen::VectorXd counts(std::string_view text) const;
  std::size_t bucket_of(std::string_view trigram) const noexcept;
  std::size_t empty_bucket() const noexcept;

 private:
  EncoderHandle handle_;
};

Embedding embed_image_reference(const EncoderHandle& handle, const Image& image);
Embedding embed_text_reference(const EncoderHandle& handle, std::string_view text);

/// Batch image encoder used by the harness.
class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  virtual std::vector<Embedding> embed_images(std::span<const Image* const> images) const = 0;
  virtual const EncoderHandle& handle() const = 0;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::vector<Embedding> embed_texts(std::span<const std::string> texts) const = 0;
  virtual const EncoderHandle& handle() const = 0;
};

std::unique_ptr<ImageEncoder> make_image_encoder(const EncoderHandle& handle);
std::unique_ptr<TextEncoder> make_text_encoder(const EncoderHandle& handle);

}  // namespace typr
