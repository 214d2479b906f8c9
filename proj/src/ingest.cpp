#include "typr/ingest.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "typr/diagnostics.hpp"
#include "typr/errors.hpp"

namespace typr {

using ordered_json = nlohmann::ordered_json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<std::string> optional_string(const ordered_json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_string())
    throw InvalidInput("manifest line " + std::to_string(line) + ": '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

std::uint64_t parse_id(const ordered_json& v, const char* key, std::size_t line) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw InvalidInput("manifest line " + std::to_string(line) + ": '" + key + "' must be a non-negative integer");
}

ManifestRecord parse_record(std::string_view text, std::size_t line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw InvalidInput("manifest line " + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  if (!obj.is_object()) throw InvalidInput("manifest line " + std::to_string(line) + ": expected a JSON object");
  if (!obj.contains("id")) throw InvalidInput("manifest line " + std::to_string(line) + ": missing 'id'");
  if (!obj.contains("image") || !obj["image"].is_string())
    throw InvalidInput("manifest line " + std::to_string(line) + ": missing or non-string 'image'");

  ManifestRecord r;
  r.id = parse_id(obj["id"], "id", line);
  r.image = obj["image"].get<std::string>();
  r.title = optional_string(obj, "title", line);
  r.description = optional_string(obj, "description", line);
  if (obj.contains("attributes") && !obj["attributes"].is_null()) {
    if (!obj["attributes"].is_object())
      throw InvalidInput("manifest line " + std::to_string(line) + ": 'attributes' must be an object");
    Attributes attrs;
    for (const auto& [k, v] : obj["attributes"].items())
      attrs.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    r.attributes = std::move(attrs);
  }
  if (obj.contains("truth_id") && !obj["truth_id"].is_null()) r.truth_id = parse_id(obj["truth_id"], "truth_id", line);
  return r;
}

}  // namespace

std::string truncate_at_whitespace(std::string_view text, std::size_t budget) {
  if (text.size() <= budget) return std::string(text);
  std::size_t cut = budget;
  if (!is_space(text[budget])) {
    std::size_t boundary = std::string_view::npos;
    for (std::size_t i = budget; i-- > 0;) {
      if (is_space(text[i])) {
        boundary = i;
        break;
      }
    }
    if (boundary != std::string_view::npos) {
      cut = boundary;
    } else {
      // No whitespace at all: hard cut, backing off continuation bytes.
      while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    }
  }
  return std::string(rtrim(text.substr(0, cut)));
}

std::string join_attributes(const Attributes& attributes) {
  std::string out;
  for (const auto& [k, v] : attributes) {
    if (!out.empty()) out += "; ";
    out += k + ": " + v;
  }
  return out;
}

std::string derive_title(const ManifestRecord& record, const Summarizer* summarizer, std::size_t char_budget) {
  if (!record.title && !record.description && !record.attributes)
    throw InvalidInput("record " + std::to_string(record.id) + " has no title, description or attributes");
  if (record.title && record.title->size() <= char_budget) return *record.title;

  if (summarizer != nullptr) {
    try {
      return truncate_at_whitespace(summarizer->summarize(record, char_budget), char_budget);
    } catch (const std::exception& e) {
      warn("summarizer failed for record " + std::to_string(record.id) + " (" + e.what() +
           "); falling back to truncation");
    }
  }
  if (record.title) return truncate_at_whitespace(*record.title, char_budget);
  if (record.description) return truncate_at_whitespace(*record.description, char_budget);
  return truncate_at_whitespace(join_attributes(*record.attributes), char_budget);
}

HttpSummarizer::HttpSummarizer(std::string endpoint, int timeout_ms) : timeout_ms_(timeout_ms) {
  const auto scheme = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_ = endpoint;
    path_ = "/";
  } else {
    base_ = endpoint.substr(0, path_start);
    path_ = endpoint.substr(path_start);
  }
}

std::string HttpSummarizer::summarize(const ManifestRecord& record, std::size_t char_budget) const {
  ordered_json body{{"title", record.title ? ordered_json(*record.title) : ordered_json(nullptr)},
                    {"description", record.description ? ordered_json(*record.description) : ordered_json(nullptr)},
                    {"attributes", ordered_json::object()},
                    {"budget", char_budget}};
  if (record.attributes)
    for (const auto& [k, v] : *record.attributes) body["attributes"][k] = v;

  httplib::Client client(base_);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  auto response = client.Post(path_, body.dump(), "application/json");
  if (!response) throw UnavailableError("summarizer unreachable: " + httplib::to_string(response.error()));
  if (response->status != 200) throw UnavailableError("summarizer returned " + std::to_string(response->status));
  const auto reply = ordered_json::parse(response->body, nullptr, false);
  if (!reply.is_object() || !reply.contains("summary") || !reply["summary"].is_string())
    throw ProtocolError("summarizer reply lacks a string 'summary'");
  return reply["summary"].get<std::string>();
}

std::vector<ManifestRecord> parse_manifest(std::istream& in) {
  std::vector<ManifestRecord> records;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (rtrim(line).empty()) continue;
    ManifestRecord r = parse_record(line, number);
    if (!seen.insert(r.id).second)
      throw InvalidInput("manifest line " + std::to_string(number) + ": duplicate id " + std::to_string(r.id));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<Listing> load_manifest(const std::filesystem::path& path, const Summarizer* summarizer,
                                   std::size_t char_budget) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open manifest " + path.string());
  const auto records = parse_manifest(in);
  const auto base = path.parent_path();

  std::vector<Listing> listings;
  listings.reserve(records.size());
  for (const auto& r : records) {
    Listing l;
    l.id = r.id;
    l.image_path = std::filesystem::path(r.image).is_absolute() ? std::filesystem::path(r.image) : base / r.image;
    if (!std::filesystem::exists(l.image_path))
      throw InvalidInput("record " + std::to_string(r.id) + ": image not found: " + l.image_path.string());
    l.title = derive_title(r, summarizer, char_budget);
    l.raw_text = RawText{r.title, r.description, r.attributes};
    l.truth_id = r.truth_id;
    listings.push_back(std::move(l));
  }
  return listings;
}

void write_manifest(const std::filesystem::path& path, const std::vector<Listing>& listings) {
  std::ostringstream out;
  const auto base = path.parent_path();
  for (const auto& l : listings) {
    ordered_json rec{{"id", l.id}, {"image", std::filesystem::relative(l.image_path, base).generic_string()},
                     {"title", l.title}};
    if (l.raw_text && l.raw_text->description) rec["description"] = *l.raw_text->description;
    if (l.raw_text && l.raw_text->attributes) {
      rec["attributes"] = ordered_json::object();
      for (const auto& [k, v] : *l.raw_text->attributes) rec["attributes"][k] = v;
    }
    if (l.truth_id) rec["truth_id"] = *l.truth_id;
    out << rec.dump() << '\n';
  }
  const std::string text = out.str();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::shared_ptr<ImageStore::Slot> ImageStore::slot_for(const std::string& key) {
  std::lock_guard lock(mutex_);
  auto& slot = slots_[key];
  if (!slot) slot = std::make_shared<Slot>();
  return slot;
}

std::shared_ptr<const Image> ImageStore::load(const Listing& listing) {
  if (listing.image) return listing.image;
  auto slot = slot_for(listing.image_path.string());
  std::lock_guard lock(slot->mutex);
  if (!slot->image) {
    try {
      slot->image = std::make_shared<const Image>(read_image(listing.image_path));
    } catch (const DecodeError& e) {
      throw DecodeError("listing " + std::to_string(listing.id) + ": " + e.what());
    }
  }
  return slot->image;
}

std::string ImageStore::content_hash(const Listing& listing) {
  if (listing.image) {
    auto slot = slot_for("mem:" + std::to_string(reinterpret_cast<std::uintptr_t>(listing.image.get())));
    std::lock_guard lock(slot->mutex);
    slot->image = listing.image;  // pins the address used as the key
    if (slot->hash.empty()) {
      const auto& img = *listing.image;
      slot->hash = sha256_hex(std::to_string(img.width()) + "x" + std::to_string(img.height()) + ":" +
                              sha256_hex(img.bytes()));
    }
    return slot->hash;
  }
  auto slot = slot_for(listing.image_path.string());
  std::lock_guard lock(slot->mutex);
  if (slot->hash.empty()) {
    try {
      slot->hash = sha256_hex(read_file(listing.image_path));
    } catch (const Error& e) {
      throw DecodeError("listing " + std::to_string(listing.id) + ": " + e.what());
    }
  }
  return slot->hash;
}

}  // namespace typr
