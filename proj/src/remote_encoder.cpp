#include "typr/remote_encoder.hpp"

#include <algorithm>
#include <chrono>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "typr/errors.hpp"

namespace typr {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kTable[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += kTable[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += rest == 2 ? kTable[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

namespace {

// "http://host:port[/prefix]" -> ("http://host:port", "/prefix/v1/embed").
// An endpoint that already ends in /v1/embed is used as is.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto path_at = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_at == std::string::npos) return {endpoint, "/v1/embed"};
  std::string path = endpoint.substr(path_at);
  while (path.size() > 1 && path.back() == '/') path.pop_back();
  if (!path.ends_with("/v1/embed")) path += path == "/" ? "v1/embed" : "/v1/embed";
  return {endpoint.substr(0, path_at), path};
}

}  // namespace

RemoteEncoderClient::RemoteEncoderClient(EncoderHandle handle)
    : handle_(std::move(handle)),
      in_flight_(std::make_unique<std::counting_semaphore<1024>>(
          std::clamp(handle_.max_in_flight, 1, 1024))) {
  if (handle_.kind != EncoderKind::Remote) throw InvalidInput("RemoteEncoderClient needs a remote handle");
  if (handle_.endpoint.empty()) throw InvalidInput("remote encoder handle has no endpoint");
  if (handle_.max_batch < 1) throw InvalidInput("max_batch must be >= 1");
  if (handle_.dim > 0) session_dim_ = handle_.dim;
}

std::optional<int> RemoteEncoderClient::session_dim() const {
  std::lock_guard lock(mutex_);
  return session_dim_;
}

void RemoteEncoderClient::check_dim(int dim) {
  std::lock_guard lock(mutex_);
  if (!session_dim_) {
    session_dim_ = dim;
  } else if (*session_dim_ != dim) {
    throw ProtocolError("model '" + handle_.model_id + "' returned dim " + std::to_string(dim) +
                        " but the session dim is " + std::to_string(*session_dim_));
  }
}

std::vector<RemoteResult> RemoteEncoderClient::embed_items(std::span<const RemoteInput> items) {
  std::vector<RemoteResult> results(items.size());
  // Group by modality; within a group, chunk by max_batch. Output keeps input order.
  for (Modality modality : {Modality::Image, Modality::Text}) {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].is_image() == (modality == Modality::Image)) positions.push_back(i);
    for (std::size_t start = 0; start < positions.size(); start += static_cast<std::size_t>(handle_.max_batch)) {
      const std::size_t end = std::min(positions.size(), start + static_cast<std::size_t>(handle_.max_batch));
      std::vector<RemoteInput> chunk;
      for (std::size_t j = start; j < end; ++j) chunk.push_back(items[positions[j]]);
      auto chunk_results = post_batch(chunk, modality);
      for (std::size_t j = start; j < end; ++j) results[positions[j]] = std::move(chunk_results[j - start]);
    }
  }
  return results;
}

std::vector<Embedding> RemoteEncoderClient::embed(std::span<const RemoteInput> items) {
  auto results = embed_items(items);
  std::vector<Embedding> out;
  out.reserve(results.size());
  for (auto& r : results) {
    if (!r.embedding) throw CallerError(400, "item '" + r.id + "': " + r.error);
    out.push_back(std::move(*r.embedding));
  }
  return out;
}

std::vector<RemoteResult> RemoteEncoderClient::post_batch(std::span<const RemoteInput> items,
                                                          Modality modality) {
  json request{{"model", handle_.model_id},
               {"modality", modality == Modality::Image ? "image" : "text"},
               {"inputs", json::array()}};
  for (const auto& item : items) {
    json entry{{"id", item.id}};
    if (item.is_image()) {
      entry["b64_png"] = base64_encode(encode_png(*item.image));
    } else {
      entry["text"] = item.text;
    }
    request["inputs"].push_back(std::move(entry));
  }
  const std::string body = request.dump();
  const auto [base, path] = split_endpoint(handle_.endpoint);

  httplib::Result response;
  for (int attempt = 0;; ++attempt) {
    {
      in_flight_->acquire();
      httplib::Client client(base);
      const auto timeout = std::chrono::milliseconds(handle_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      response = client.Post(path, body, "application/json");
      in_flight_->release();
    }
    const bool transient = !response || response->status >= 500;
    if (!transient || attempt >= handle_.retries) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(handle_.backoff_ms) << attempt));
  }

  if (!response)
    throw UnavailableError("embedding endpoint " + handle_.endpoint + " unreachable after " +
                           std::to_string(handle_.retries + 1) + " attempts: " +
                           httplib::to_string(response.error()));
  if (response->status >= 500)
    throw UnavailableError("embedding endpoint " + handle_.endpoint + " returned " +
                           std::to_string(response->status) + " after retries");
  if (response->status >= 400) {
    std::string message = response->body;
    try {
      const json err = json::parse(response->body);
      if (err.is_object() && err.contains("error"))
        message = err["error"].is_string() ? err["error"].get<std::string>() : err["error"].dump();
    } catch (const json::exception&) {
    }
    throw CallerError(response->status, message);
  }

  json reply;
  try {
    reply = json::parse(response->body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed /v1/embed response: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("embeddings") || !reply["embeddings"].is_array() ||
      !reply.contains("dim") || !reply["dim"].is_number_integer())
    throw ProtocolError("/v1/embed response lacks dim or embeddings");
  const int dim = reply["dim"].get<int>();
  if (dim < 1) throw ProtocolError("/v1/embed response has dim < 1");
  check_dim(dim);

  const auto& entries = reply["embeddings"];
  if (entries.size() != items.size())
    throw ProtocolError("/v1/embed returned " + std::to_string(entries.size()) + " entries for " +
                        std::to_string(items.size()) + " inputs");

  std::vector<RemoteResult> results(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& e = entries[i];
    if (!e.is_object() || !e.contains("id") || !e["id"].is_string() ||
        e["id"].get<std::string>() != items[i].id)
      throw ProtocolError("/v1/embed response out of order at position " + std::to_string(i));
    results[i].id = items[i].id;
    if (e.contains("error")) {
      results[i].error = e["error"].is_string() ? e["error"].get<std::string>() : e["error"].dump();
      continue;
    }
    if (!e.contains("vector") || !e["vector"].is_array())
      throw ProtocolError("entry '" + items[i].id + "' has neither vector nor error");
    const auto values = e["vector"].get<std::vector<double>>();
    if (static_cast<int>(values.size()) != dim)
      throw ProtocolError("entry '" + items[i].id + "' has length " + std::to_string(values.size()) +
                          ", expected dim " + std::to_string(dim));
    const Eigen::Map<const Eigen::VectorXd> raw(values.data(), static_cast<Eigen::Index>(values.size()));
    try {
      results[i].embedding = Embedding::normalized(raw, modality, handle_.model_id);
    } catch (const InvalidInput&) {
      throw ProtocolError("entry '" + items[i].id + "' is a zero vector");
    }
  }
  return results;
}

std::vector<Embedding> embed_remote(const EncoderHandle& handle, std::span<const RemoteInput> items) {
  RemoteEncoderClient client(handle);
  return client.embed(items);
}

}  // namespace typr
