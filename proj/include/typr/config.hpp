#pragma once

#include <nlohmann/json.hpp>

#include "typr/encoders.hpp"
#include "typr/typograph.hpp"

namespace typr {

// JSON forms of the configuration types. Parsers fill unspecified fields
// with defaults and throw ConfigError on wrong types or unknown enum names.

nlohmann::ordered_json render_spec_to_json(const RenderSpec& spec);
RenderSpec render_spec_from_json(const nlohmann::json& j, RenderSpec base = {});

nlohmann::ordered_json encoder_to_json(const EncoderHandle& handle);
EncoderHandle encoder_from_json(const nlohmann::json& j, EncoderHandle base);

}  // namespace typr
