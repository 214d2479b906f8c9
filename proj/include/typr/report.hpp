#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "typr/harness.hpp"

namespace typr {

/// One CSV row per (report, k). Columns:
///   mode,font_size_ratio,color,location,image_model,text_model,fingerprint,
///   k,accuracy,n_queries,n_products,wall_ms
std::string reports_to_csv(std::span<const MetricsReport> reports);

/// {"reports": [...]} with timing omitted unless requested.
nlohmann::ordered_json reports_to_json(std::span<const MetricsReport> reports, bool include_timing = false);

/// Fixed-width Acc@k table for terminals.
std::string reports_to_table(std::span<const MetricsReport> reports);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace typr
