#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "typr/embedding.hpp"
#include "typr/encoders.hpp"
#include "typr/image.hpp"

namespace typr {

/// One item of a /v1/embed request. Exactly one of image/text is used.
struct RemoteInput {
  std::string id;
  const Image* image = nullptr;
  std::string text;

  static RemoteInput image_input(std::string id, const Image& image) { return {std::move(id), &image, {}}; }
  static RemoteInput text_input(std::string id, std::string text) { return {std::move(id), nullptr, std::move(text)}; }
  bool is_image() const noexcept { return image != nullptr; }
};

struct RemoteResult {
  std::string id;
  std::optional<Embedding> embedding;
  std::string error;  // item-level error reported by the server
};

/// Client for the embedding sidecar's HTTP/JSON protocol:
///
///   POST /v1/embed {model, modality: "image"|"text",
///                   inputs: [{id, b64_png?, text?}]}
///   -> {model, dim, embeddings: [{id, vector} | {id, error}]}
///
/// Vectors are renormalized on receipt. The first response fixes the
/// session's dimension; a later response with another dimension is a
/// ProtocolError. Transport failures and 5xx responses are retried with
/// exponential backoff; 4xx surfaces as CallerError.
class RemoteEncoderClient {
 public:
  explicit RemoteEncoderClient(EncoderHandle handle);

  /// Embeddings in input order; throws CallerError on any item-level error.
  std::vector<Embedding> embed(std::span<const RemoteInput> items);
  /// Like embed, but item-level errors are returned instead of thrown.
  std::vector<RemoteResult> embed_items(std::span<const RemoteInput> items);

  const EncoderHandle& handle() const noexcept { return handle_; }
  std::optional<int> session_dim() const;

 private:
  std::vector<RemoteResult> post_batch(std::span<const RemoteInput> items, Modality modality);
  void check_dim(int dim);

  EncoderHandle handle_;
  std::unique_ptr<std::counting_semaphore<1024>> in_flight_;
  mutable std::mutex mutex_;
  std::optional<int> session_dim_;
};

/// One-shot convenience over RemoteEncoderClient.
std::vector<Embedding> embed_remote(const EncoderHandle& handle, std::span<const RemoteInput> items);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace typr
