#include "typr/config.hpp"

#include "typr/errors.hpp"

namespace typr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

ordered_json render_spec_to_json(const RenderSpec& spec) {
  return ordered_json{{"font_size_ratio", spec.font_size_ratio},
                      {"color", color_name(spec.color)},
                      {"location", to_string(spec.location)},
                      {"max_width_fraction", spec.max_width_fraction},
                      {"margin_fraction", spec.margin_fraction},
                      {"font_asset", spec.font_asset}};
}

RenderSpec render_spec_from_json(const json& j, RenderSpec base) {
  if (!j.is_object()) throw ConfigError("render spec must be an object");
  RenderSpec s = std::move(base);
  try {
    s.font_size_ratio = field(j, "font_size_ratio", s.font_size_ratio);
    if (j.contains("color")) s.color = parse_color(field<std::string>(j, "color", ""));
    if (j.contains("location")) s.location = parse_location(field<std::string>(j, "location", ""));
    s.max_width_fraction = field(j, "max_width_fraction", s.max_width_fraction);
    s.margin_fraction = field(j, "margin_fraction", s.margin_fraction);
    s.font_asset = field(j, "font_asset", s.font_asset);
    s.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("invalid render spec: ") + e.what());
  }
  return s;
}

ordered_json encoder_to_json(const EncoderHandle& h) {
  ordered_json j{{"kind", to_string(h.kind)}, {"model_id", h.model_id}, {"dim", h.dim}};
  if (h.kind == EncoderKind::Remote) {
    j["endpoint"] = h.endpoint;
    j["timeout_ms"] = h.timeout_ms;
    j["max_batch"] = h.max_batch;
    j["max_in_flight"] = h.max_in_flight;
    j["retries"] = h.retries;
  } else {
    j["seed"] = h.seed;
    if (h.kind == EncoderKind::ReferenceImage) j["grid"] = h.grid;
  }
  return j;
}

EncoderHandle encoder_from_json(const json& j, EncoderHandle base) {
  if (!j.is_object()) throw ConfigError("encoder must be an object");
  EncoderHandle h = std::move(base);
  try {
    if (j.contains("kind")) h.kind = parse_encoder_kind(field<std::string>(j, "kind", ""));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  h.model_id = field(j, "model_id", h.model_id);
  h.dim = field(j, "dim", h.kind == EncoderKind::Remote && !j.contains("dim") ? 0 : h.dim);
  h.seed = field(j, "seed", h.seed);
  h.grid = field(j, "grid", h.grid);
  h.endpoint = field(j, "endpoint", h.endpoint);
  h.timeout_ms = field(j, "timeout_ms", h.timeout_ms);
  h.max_batch = field(j, "max_batch", h.max_batch);
  h.max_in_flight = field(j, "max_in_flight", h.max_in_flight);
  h.retries = field(j, "retries", h.retries);
  h.backoff_ms = field(j, "backoff_ms", h.backoff_ms);
  if (h.kind == EncoderKind::Remote && h.endpoint.empty()) throw ConfigError("remote encoder needs an endpoint");
  if (h.kind != EncoderKind::Remote && (h.dim < 1 || h.grid < 1))
    throw ConfigError("reference encoder needs dim >= 1 and grid >= 1");
  return h;
}

}  // namespace typr
