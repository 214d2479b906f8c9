#include "typr/cli.hpp"

#include <algorithm>
#include <fstream>
#include <memory>

#include <CLI11.hpp>

#include "typr/cache.hpp"
#include "typr/config.hpp"
#include "typr/diagnostics.hpp"
#include "typr/errors.hpp"
#include "typr/font.hpp"
#include "typr/image.hpp"
#include "typr/ingest.hpp"
#include "typr/knn.hpp"
#include "typr/report.hpp"
#include "typr/typograph.hpp"

namespace typr {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct RenderFlags {
  std::optional<double> ratio;
  std::optional<std::string> color;
  std::optional<std::string> location;
  std::optional<std::string> font;
  std::optional<double> margin;
  std::optional<double> max_width;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--ratio", ratio, "font size ratio in (0, 1]");
    cmd.add_option("--color", color, "named color or #rrggbb");
    cmd.add_option("--location", location, "top, center or bottom");
    cmd.add_option("--font", font, "TrueType font file");
    cmd.add_option("--margin", margin, "top/bottom margin fraction");
    cmd.add_option("--max-width", max_width, "text width budget as a fraction of the image width");
  }

  RenderSpec apply(RenderSpec spec) const {
    if (ratio) spec.font_size_ratio = *ratio;
    if (color) spec.color = parse_color(*color);
    if (location) spec.location = parse_location(*location);
    if (font) spec.font_asset = *font;
    if (margin) spec.margin_fraction = *margin;
    if (max_width) spec.max_width_fraction = *max_width;
    spec.validate();
    return spec;
  }
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::shared_ptr<ContentCache> open_cache(const std::optional<std::string>& flag,
                                         const std::optional<fs::path>& from_file) {
  std::optional<fs::path> root;
  if (flag)
    root = *flag;
  else
    root = cache_root_from_env(from_file);
  if (!root) return nullptr;
  return std::make_shared<ContentCache>(*root);
}

EncoderHandle encoder_from_flag(const std::string& value, const std::string& model_id, Modality modality) {
  if (value == "reference")
    return modality == Modality::Image ? EncoderHandle::reference_image() : EncoderHandle::reference_text();
  if (value.starts_with("http://") || value.starts_with("https://"))
    return EncoderHandle::remote(value, model_id, modality);
  throw ConfigError("encoder must be 'reference' or an http(s) URL, got '" + value + "'");
}

ordered_json bbox_json(const std::optional<BoundingBox>& box) {
  if (!box) return nullptr;
  return ordered_json{{"x", box->x}, {"y", box->y}, {"w", box->w}, {"h", box->h}};
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

Dataset load_dataset(const RunConfig& rc) {
  if (rc.queries && rc.products) {
    std::unique_ptr<Summarizer> summarizer;
    if (rc.summarizer) summarizer = std::make_unique<HttpSummarizer>(*rc.summarizer);
    return {load_manifest(*rc.queries, summarizer.get(), rc.title_budget),
            load_manifest(*rc.products, summarizer.get(), rc.title_budget)};
  }
  if (rc.synthetic) return generate_synthetic_corpus(*rc.synthetic);
  throw ConfigError("run config needs either \"queries\" and \"products\" manifests or a \"synthetic\" block");
}

void write_reports(const fs::path& dir, const std::string& stem, const std::vector<MetricsReport>& reports) {
  write_text(dir / (stem + ".json"), reports_to_json(reports).dump(2) + "\n");
  write_text(dir / (stem + ".csv"), reports_to_csv(reports));
}

// Shared by eval and sweep: config file plus flag overrides.
struct RunFlags {
  std::string config;
  std::optional<std::string> mode;
  std::optional<unsigned> threads;
  std::optional<std::string> cache_root;
  std::optional<std::string> out_dir;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config, "JSON run file")->required();
    cmd.add_option("--mode", mode, "override the experiment mode");
    cmd.add_option("--threads", threads, "worker threads (0 = all cores)");
    cmd.add_option("--cache-root", cache_root, "embedding cache directory");
    cmd.add_option("--out-dir", out_dir, "directory for JSON and CSV reports");
  }

  RunConfig load() const {
    RunConfig rc = RunConfig::load(config);
    if (mode) rc.experiment.mode = parse_mode(*mode);
    if (threads) rc.experiment.threads = *threads;
    if (out_dir) rc.output_dir = fs::path(*out_dir);
    rc.experiment.validate();
    return rc;
  }
};

int cmd_render(const fs::path& image_path, const std::string& text, const fs::path& out_path,
               const RenderFlags& flags, std::ostream& out) {
  const RenderSpec spec = flags.apply(RenderSpec{});
  const fs::path font_path = spec.font_asset.empty() ? default_font_path() : fs::path(spec.font_asset);
  FontFace font = [&] {
    try {
      return FontFace::load(font_path);
    } catch (const ConfigError& e) {
      // A missing or unreadable font is an IO failure for this command.
      throw Error(e.what());
    }
  }();
  const Image image = read_image(image_path);
  const RenderedImage rendered = render_text(image, text, spec, font);
  write_png(rendered.image, out_path);
  ordered_json j{{"font_size", rendered.applied_font_size},
                 {"bbox", bbox_json(rendered.text_bbox)},
                 {"overflowed", rendered.overflowed},
                 {"spec", render_spec_to_json(rendered.applied_spec)}};
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_embed(const fs::path& manifest, const std::string& mode_name, const std::string& encoder,
              const std::string& text_encoder, const std::string& model_id, const fs::path& store,
              const std::optional<std::string>& cache_root, const std::optional<std::string>& summarizer_url,
              std::size_t budget, unsigned threads, const RenderFlags& flags, bool as_json, std::ostream& out) {
  const Mode mode = parse_mode(mode_name);
  const RenderSpec spec = flags.apply(RenderSpec{});
  const EncoderHandle image_handle = encoder_from_flag(encoder, model_id, Modality::Image);
  const EncoderHandle text_handle = encoder_from_flag(text_encoder, model_id, Modality::Text);

  std::unique_ptr<Summarizer> summarizer;
  if (summarizer_url) summarizer = std::make_unique<HttpSummarizer>(*summarizer_url);
  const std::vector<Listing> listings = load_manifest(manifest, summarizer.get(), budget);
  if (listings.empty()) throw ConfigError("manifest has no records: " + manifest.string());

  RunContext ctx(open_cache(cache_root, std::nullopt));
  auto embeddings = embed_listings(listings, mode, spec, image_handle, text_handle, ctx, threads);
  std::vector<IndexEntry> entries;
  entries.reserve(listings.size());
  for (std::size_t i = 0; i < listings.size(); ++i) entries.push_back({listings[i].id, std::move(embeddings[i])});
  const KnnIndex index = build_index(entries);
  save_index(index, store);

  ordered_json j{{"store", store.string()},         {"count", index.size()},
                 {"dim", index.dim()},              {"model_id", index.model_id()},
                 {"mode", to_string(mode)},         {"computed", ctx.embeddings().computed()},
                 {"sha256", file_sha256(store)}};
  if (as_json)
    out << j.dump() << '\n';
  else
    out << "wrote " << index.size() << " embeddings (dim " << index.dim() << ", " << ctx.embeddings().computed()
        << " computed) to " << store.string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunFlags& flags, bool as_json, std::ostream& out) {
  const RunConfig rc = flags.load();
  const Dataset data = load_dataset(rc);
  RunContext ctx(open_cache(flags.cache_root, rc.cache_root));
  std::vector<MetricsReport> reports{run_experiment(rc.experiment, data.queries, data.products, ctx)};
  if (rc.output_dir) write_reports(*rc.output_dir, "report", reports);
  out << (as_json ? reports_to_json(reports).dump() + "\n" : reports_to_table(reports));
  return kExitOk;
}

int cmd_sweep(const RunFlags& flags, const std::optional<std::string>& grid_path, bool full_grid, bool as_json,
              std::ostream& out) {
  const RunConfig rc = flags.load();
  FactorGrid grid;
  if (grid_path) {
    std::ifstream in(*grid_path);
    if (!in) throw ConfigError("cannot open grid file: " + *grid_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("grid file " + *grid_path + ": " + e.what());
    }
    grid = FactorGrid::from_json(j);
  } else if (full_grid) {
    grid = FactorGrid::full();
  } else if (rc.grid) {
    grid = *rc.grid;
  } else {
    throw ConfigError("sweep needs --grid, --full or a \"grid\" block in the run file");
  }
  expand_grid(rc.experiment, grid);  // reject bad cells before loading data
  const Dataset data = load_dataset(rc);
  RunContext ctx(open_cache(flags.cache_root, rc.cache_root));
  const auto reports = factor_sweep(rc.experiment, grid, data.queries, data.products, ctx);
  if (rc.output_dir) write_reports(*rc.output_dir, "sweep", reports);
  out << (as_json ? reports_to_json(reports).dump() + "\n" : reports_to_table(reports));
  return kExitOk;
}

int cmd_synth(const fs::path& dir, const SyntheticCorpusSpec& spec, bool as_json, std::ostream& out) {
  Dataset d = generate_synthetic_corpus(spec);
  write_dataset(d, dir);
  if (as_json)
    out << ordered_json{{"dir", dir.string()}, {"queries", d.queries.size()}, {"products", d.products.size()}}.dump()
        << '\n';
  else
    out << "wrote " << d.queries.size() << " queries and " << d.products.size() << " products to " << dir.string()
        << '\n';
  return kExitOk;
}

}  // namespace

SyntheticCorpusSpec synthetic_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic block must be a JSON object");
  SyntheticCorpusSpec s;
  try {
    s.n_queries = j.value("n_queries", s.n_queries);
    s.n_products = j.value("n_products", s.n_products);
    s.image_size = j.value("image_size", s.image_size);
    s.n_classes = j.value("n_classes", s.n_classes);
    s.position_jitter = j.value("position_jitter", s.position_jitter);
    s.shape_radius = j.value("shape_radius", s.shape_radius);
    s.scale_jitter = j.value("scale_jitter", s.scale_jitter);
    s.color_jitter = j.value("color_jitter", s.color_jitter);
    s.shape_contrast = j.value("shape_contrast", s.shape_contrast);
    s.background_jitter = j.value("background_jitter", s.background_jitter);
    s.seed = j.value("seed", s.seed);
    if (j.contains("distractors")) {
      const auto d = j["distractors"].get<std::string>();
      if (d == "round_robin")
        s.distractors = DistractorPolicy::RoundRobin;
      else if (d == "uniform_random")
        s.distractors = DistractorPolicy::UniformRandom;
      else
        throw ConfigError("unknown distractor policy '" + d + "'");
    }
    if (j.contains("title_slots")) s.title_slots = j["title_slots"].get<std::vector<std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed synthetic block: ") + e.what());
  }
  return s;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig rc;
  rc.experiment = ExperimentConfig::from_json(j.value("experiment", json::object()));
  try {
    if (j.contains("queries")) rc.queries = resolve(base_dir, j["queries"].get<std::string>());
    if (j.contains("products")) rc.products = resolve(base_dir, j["products"].get<std::string>());
    if (rc.queries.has_value() != rc.products.has_value())
      throw ConfigError("\"queries\" and \"products\" must be given together");
    if (j.contains("synthetic")) rc.synthetic = synthetic_spec_from_json(j["synthetic"]);
    if (j.contains("cache_root")) rc.cache_root = resolve(base_dir, j["cache_root"].get<std::string>());
    if (j.contains("summarizer")) rc.summarizer = j["summarizer"].get<std::string>();
    rc.title_budget = j.value("title_budget", rc.title_budget);
    if (j.contains("output_dir")) rc.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("grid")) rc.grid = FactorGrid::from_json(j["grid"]);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  if (rc.title_budget == 0) throw ConfigError("title_budget must be positive");
  return rc;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Render listing titles onto product images and evaluate retrieval."};
  app.name(args.empty() ? "typr" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable output on stdout");

  auto* render = app.add_subcommand("render", "draw text onto an image");
  std::string image_path, text, out_path;
  RenderFlags render_flags;
  render->add_option("--image", image_path, "input image")->required();
  render->add_option("--text", text, "text to draw")->required();
  render->add_option("--out", out_path, "output PNG")->required();
  render_flags.add_to(*render);
  render->add_flag("--json", as_json, "accepted for symmetry; output is always JSON");

  auto* embed = app.add_subcommand("embed", "embed a manifest into a KNN store");
  std::string manifest, mode_name = "rendered_image_only", encoder = "reference", text_encoder = "reference",
                        model_id = "remote", store;
  std::optional<std::string> cache_root, summarizer;
  std::size_t budget = kDefaultTitleBudget;
  unsigned threads = 0;
  RenderFlags embed_flags;
  embed->add_option("--manifest", manifest, "JSON Lines manifest")->required();
  embed->add_option("--mode", mode_name, "inference mode")->capture_default_str();
  embed->add_option("--encoder", encoder, "'reference' or the embedding service URL")->capture_default_str();
  embed->add_option("--text-encoder", text_encoder, "'reference' or a URL (fused modes)")->capture_default_str();
  embed->add_option("--model-id", model_id, "model id requested from a remote encoder")->capture_default_str();
  embed->add_option("--out-store", store, "output store file")->required();
  embed->add_option("--cache-root", cache_root, "embedding cache directory");
  embed->add_option("--summarizer", summarizer, "summarizer endpoint URL for long titles");
  embed->add_option("--title-budget", budget, "title length budget in bytes")->capture_default_str();
  embed->add_option("--threads", threads, "worker threads (0 = all cores)");
  embed_flags.add_to(*embed);
  embed->add_flag("--json", as_json, "machine-readable output");

  auto* eval = app.add_subcommand("eval", "run one experiment");
  RunFlags eval_flags;
  eval_flags.add_to(*eval);
  eval->add_flag("--json", as_json, "machine-readable output");

  auto* sweep = app.add_subcommand("sweep", "run a factor sweep");
  RunFlags sweep_flags;
  std::optional<std::string> grid_path;
  bool full_grid = false;
  sweep_flags.add_to(*sweep);
  sweep->add_option("--grid", grid_path, "JSON factor grid");
  sweep->add_flag("--full", full_grid, "sweep the full ratio x color x location grid");
  sweep->add_flag("--json", as_json, "machine-readable output");

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  std::string synth_dir;
  SyntheticCorpusSpec synth_spec;
  synth->add_option("--out", synth_dir, "output directory")->required();
  synth->add_option("--queries", synth_spec.n_queries)->capture_default_str();
  synth->add_option("--products", synth_spec.n_products)->capture_default_str();
  synth->add_option("--image-size", synth_spec.image_size)->capture_default_str();
  synth->add_option("--seed", synth_spec.seed)->capture_default_str();
  synth->add_flag("--json", as_json, "machine-readable output");

  try {
    std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*render) return cmd_render(image_path, text, out_path, render_flags, out);
    if (*embed)
      return cmd_embed(manifest, mode_name, encoder, text_encoder, model_id, store, cache_root, summarizer, budget,
                       threads, embed_flags, as_json, out);
    if (*eval) return cmd_eval(eval_flags, as_json, out);
    if (*sweep) return cmd_sweep(sweep_flags, grid_path, full_grid, as_json, out);
    if (*synth) return cmd_synth(synth_dir, synth_spec, as_json, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace typr
