#include "typr/report.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "typr/image.hpp"

namespace typr {

using nlohmann::ordered_json;

namespace {

std::string str_field(const ordered_json& j, std::initializer_list<const char*> path) {
  const ordered_json* node = &j;
  for (const char* key : path) {
    if (!node->is_object() || !node->contains(key)) return "";
    node = &(*node)[key];
  }
  if (node->is_string()) return node->get<std::string>();
  return node->dump();
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string reports_to_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  out << "mode,font_size_ratio,color,location,image_model,text_model,fingerprint,k,accuracy,n_queries,n_products,"
         "wall_ms\n";
  for (const auto& r : reports) {
    for (const auto& [k, acc] : r.accuracy) {
      out << str_field(r.config, {"mode"}) << ',' << str_field(r.config, {"render", "font_size_ratio"}) << ','
          << str_field(r.config, {"render", "color"}) << ',' << str_field(r.config, {"render", "location"}) << ','
          << str_field(r.config, {"image_encoder", "model_id"}) << ','
          << str_field(r.config, {"text_encoder", "model_id"}) << ',' << r.fingerprint << ',' << k << ','
          << fmt(acc, "%.6f") << ',' << r.n_queries << ',' << r.n_products << ',' << fmt(r.wall.total_ms, "%.1f")
          << '\n';
    }
  }
  return out.str();
}

ordered_json reports_to_json(std::span<const MetricsReport> reports, bool include_timing) {
  ordered_json j{{"reports", ordered_json::array()}};
  for (const auto& r : reports) j["reports"].push_back(r.to_json(include_timing));
  return j;
}

std::string reports_to_table(std::span<const MetricsReport> reports) {
  std::set<int> ks;
  for (const auto& r : reports)
    for (const auto& [k, a] : r.accuracy) ks.insert(k);
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-6s %-8s %-7s", "mode", "ratio", "color", "where");
  out << line;
  for (int k : ks) {
    std::snprintf(line, sizeof line, " %8s", ("Acc@" + std::to_string(k)).c_str());
    out << line;
  }
  out << '\n';
  for (const auto& r : reports) {
    const std::string ratio = str_field(r.config, {"render", "font_size_ratio"});
    std::snprintf(line, sizeof line, "%-22s %-6s %-8s %-7s", str_field(r.config, {"mode"}).c_str(),
                  ratio.empty() ? "-" : ratio.c_str(),
                  r.config.contains("render") ? str_field(r.config, {"render", "color"}).c_str() : "-",
                  r.config.contains("render") ? str_field(r.config, {"render", "location"}).c_str() : "-");
    out << line;
    for (int k : ks) {
      std::string cell = "-";
      for (const auto& [kk, a] : r.accuracy)
        if (kk == k) cell = fmt(a);
      std::snprintf(line, sizeof line, " %8s", cell.c_str());
      out << line;
    }
    out << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace typr
