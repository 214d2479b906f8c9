#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <thread>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "typr/encoders.hpp"
#include "typr/errors.hpp"
#include "typr/parallel.hpp"
#include "typr/remote_encoder.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen templates.
#include <httplib.h>

using namespace typr;
using nlohmann::json;

namespace {

// In-process /v1/embed server; the handler sees the parsed request body.
class StubServer {
 public:
  using Handler = std::function<void(const json& request, httplib::Response& res, int call)>;

  explicit StubServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const int call = calls_++;
      const int now = ++active_;
      int seen = peak_.load();
      while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
      }
      handler_(json::parse(req.body), res, call);
      --active_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_.load(); }
  int peak_concurrency() const { return peak_.load(); }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Vector i of a batch: a scaled basis vector, so order is observable.
json basis_reply(const json& request, int dim, double scale) {
  json out{{"model", request["model"]}, {"dim", dim}, {"embeddings", json::array()}};
  int i = 0;
  for (const auto& input : request["inputs"]) {
    std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
    v[static_cast<std::size_t>(std::stoi(input["id"].get<std::string>()) % dim)] = scale;
    out["embeddings"].push_back({{"id", input["id"]}, {"vector", v}});
    ++i;
  }
  return out;
}

EncoderHandle handle_for(const StubServer& s, Modality modality = Modality::Text) {
  EncoderHandle h = EncoderHandle::remote(s.url(), "stub-model", modality);
  h.retries = 2;
  h.backoff_ms = 1;
  h.timeout_ms = 5000;
  return h;
}

std::vector<RemoteInput> text_inputs(int n) {
  std::vector<RemoteInput> items;
  for (int i = 0; i < n; ++i) items.push_back(RemoteInput::text_input(std::to_string(i), "item " + std::to_string(i)));
  return items;
}

std::vector<std::uint8_t> base64_decode(const std::string& s) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    return c == '+' ? 62 : 63;
  };
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : s) {
    if (c == '=') break;
    acc = (acc << 6) | static_cast<std::uint32_t>(value(c));
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace

TEST(Base64, Rfc4648Vectors) {
  auto enc = [](std::string s) {
    return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  };
  EXPECT_EQ(enc(""), "");
  EXPECT_EQ(enc("f"), "Zg==");
  EXPECT_EQ(enc("fo"), "Zm8=");
  EXPECT_EQ(enc("foo"), "Zm9v");
  EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
}

TEST(RemoteEncoder, EchoPreservesOrderAndNorms) {
  StubServer server([](const json& req, httplib::Response& res, int) { reply(res, 200, basis_reply(req, 16, 1.0)); });
  const auto items = text_inputs(5);
  const auto out = embed_remote(handle_for(server), items);
  ASSERT_EQ(out.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_FLOAT_EQ(out[static_cast<std::size_t>(i)].vector[i], 1.0f);
    EXPECT_NEAR(out[static_cast<std::size_t>(i)].vector.cast<double>().norm(), 1.0, 1e-5);
    EXPECT_EQ(out[static_cast<std::size_t>(i)].modality, Modality::Text);
  }
}

TEST(RemoteEncoder, RenormalizesNonUnitVectors) {
  StubServer server([](const json& req, httplib::Response& res, int) { reply(res, 200, basis_reply(req, 8, 2.0)); });
  const auto out = embed_remote(handle_for(server), text_inputs(3));
  for (const auto& e : out) EXPECT_NEAR(e.vector.cast<double>().norm(), 1.0, 1e-5);
}

TEST(RemoteEncoder, DimensionChangeWithinSessionIsProtocolError) {
  StubServer server([](const json& req, httplib::Response& res, int call) {
    reply(res, 200, basis_reply(req, call == 0 ? 512 : 768, 1.0));
  });
  RemoteEncoderClient client(handle_for(server));
  const auto items = text_inputs(2);
  EXPECT_NO_THROW(client.embed(items));
  EXPECT_EQ(client.session_dim(), 512);
  EXPECT_THROW(client.embed(items), ProtocolError);
}

TEST(RemoteEncoder, ClientErrorCarriesServerMessage) {
  StubServer server([](const json&, httplib::Response& res, int) {
    reply(res, 400, {{"error", "unknown model 'stub-model'"}});
  });
  try {
    embed_remote(handle_for(server), text_inputs(1));
    FAIL() << "expected CallerError";
  } catch (const CallerError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(std::string(e.what()).find("unknown model"), std::string::npos);
  }
  EXPECT_EQ(server.calls(), 1);  // 4xx is not retried
}

TEST(RemoteEncoder, ServerErrorsAreRetriedThenUnavailable) {
  StubServer server([](const json&, httplib::Response& res, int) { reply(res, 503, {{"error", "loading"}}); });
  EXPECT_THROW(embed_remote(handle_for(server), text_inputs(1)), UnavailableError);
  EXPECT_EQ(server.calls(), 3);
}

TEST(RemoteEncoder, TransientFailureRecovers) {
  StubServer server([](const json& req, httplib::Response& res, int call) {
    if (call == 0)
      reply(res, 503, {{"error", "loading"}});
    else
      reply(res, 200, basis_reply(req, 4, 1.0));
  });
  EXPECT_EQ(embed_remote(handle_for(server), text_inputs(2)).size(), 2u);
  EXPECT_EQ(server.calls(), 2);
}

TEST(RemoteEncoder, UnreachableEndpointIsUnavailable) {
  std::string url;
  {
    StubServer gone([](const json&, httplib::Response&, int) {});
    url = gone.url();
  }
  EncoderHandle h = EncoderHandle::remote(url, "m", Modality::Text);
  h.retries = 1;
  h.backoff_ms = 1;
  h.timeout_ms = 500;
  EXPECT_THROW(embed_remote(h, text_inputs(1)), UnavailableError);
}

TEST(RemoteEncoder, ItemErrorsAreReportedPerItem) {
  StubServer server([](const json& req, httplib::Response& res, int) {
    json body = basis_reply(req, 4, 1.0);
    body["embeddings"][1] = {{"id", req["inputs"][1]["id"]}, {"error", "modality unsupported"}};
    reply(res, 200, body);
  });
  RemoteEncoderClient client(handle_for(server));
  const auto items = text_inputs(3);
  const auto results = client.embed_items(items);
  EXPECT_TRUE(results[0].embedding.has_value());
  EXPECT_FALSE(results[1].embedding.has_value());
  EXPECT_EQ(results[1].error, "modality unsupported");
  EXPECT_TRUE(results[2].embedding.has_value());
  EXPECT_THROW(client.embed(items), CallerError);
}

TEST(RemoteEncoder, ReorderedResponseIsProtocolError) {
  StubServer server([](const json& req, httplib::Response& res, int) {
    json body = basis_reply(req, 4, 1.0);
    std::swap(body["embeddings"][0], body["embeddings"][1]);
    reply(res, 200, body);
  });
  EXPECT_THROW(embed_remote(handle_for(server), text_inputs(2)), ProtocolError);
}

TEST(RemoteEncoder, LargeRequestsAreSplitIntoBatches) {
  std::atomic<std::size_t> largest{0};
  StubServer server([&](const json& req, httplib::Response& res, int) {
    largest = std::max<std::size_t>(largest, req["inputs"].size());
    reply(res, 200, basis_reply(req, 64, 1.0));
  });
  EncoderHandle h = handle_for(server);
  h.max_batch = 4;
  const auto out = embed_remote(h, text_inputs(10));
  ASSERT_EQ(out.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_FLOAT_EQ(out[static_cast<std::size_t>(i)].vector[i], 1.0f);
  EXPECT_EQ(server.calls(), 3);
  EXPECT_LE(largest.load(), 4u);
}

TEST(RemoteEncoder, ImagesTravelAsBase64Png) {
  Image sent(7, 5, {10, 20, 30});
  sent.set_pixel(3, 2, {200, 100, 0});
  std::atomic<bool> matched{false};
  StubServer server([&](const json& req, httplib::Response& res, int) {
    EXPECT_EQ(req["modality"], "image");
    const Image got = decode_image(base64_decode(req["inputs"][0]["b64_png"].get<std::string>()));
    matched = got == sent;
    reply(res, 200, basis_reply(req, 4, 1.0));
  });
  const std::vector<RemoteInput> items{RemoteInput::image_input("0", sent)};
  const auto out = embed_remote(handle_for(server, Modality::Image), items);
  EXPECT_TRUE(matched.load());
  EXPECT_EQ(out[0].modality, Modality::Image);
}

TEST(RemoteEncoder, EndpointWithPathIsAccepted) {
  StubServer server([](const json& req, httplib::Response& res, int) { reply(res, 200, basis_reply(req, 4, 1.0)); });
  EncoderHandle h = handle_for(server);
  h.endpoint = server.url() + "/v1/embed";
  EXPECT_EQ(embed_remote(h, text_inputs(1)).size(), 1u);
}

TEST(RemoteEncoder, InFlightRequestsAreBounded) {
  StubServer server([](const json& req, httplib::Response& res, int) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    reply(res, 200, basis_reply(req, 4, 1.0));
  });
  EncoderHandle h = handle_for(server);
  h.max_in_flight = 2;
  RemoteEncoderClient client(h);
  const auto items = text_inputs(1);
  parallel_for(16, 8, [&](std::size_t) { client.embed(items); });
  EXPECT_EQ(server.calls(), 16);
  EXPECT_LE(server.peak_concurrency(), 2);
}

TEST(RemoteEncoder, BatchEncoderAdaptersUseTheProtocol) {
  StubServer server([](const json& req, httplib::Response& res, int) { reply(res, 200, basis_reply(req, 4, 3.0)); });
  const auto encoder = make_text_encoder(handle_for(server));
  const std::vector<std::string> texts{"a", "b", "c"};
  const auto out = encoder->embed_texts(texts);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& e : out) EXPECT_NEAR(e.vector.cast<double>().norm(), 1.0, 1e-5);
}
