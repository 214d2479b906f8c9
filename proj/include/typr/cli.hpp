#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "typr/harness.hpp"
#include "typr/synthetic.hpp"

namespace typr {

/// Exit codes: 0 success, 1 runtime failure (IO, encoder unavailable, ...),
/// 2 bad arguments or invalid configuration.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Declarative run file used by `eval` and `sweep`. Relative paths resolve
/// against the file's directory.
struct RunConfig {
  ExperimentConfig experiment;
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> products;
  std::optional<SyntheticCorpusSpec> synthetic;  // used when no manifests are given
  std::optional<std::filesystem::path> cache_root;
  std::optional<std::string> summarizer;  // endpoint URL including path
  std::size_t title_budget = kDefaultTitleBudget;
  std::optional<std::filesystem::path> output_dir;
  std::optional<FactorGrid> grid;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);
};

SyntheticCorpusSpec synthetic_spec_from_json(const nlohmann::json& j);

}  // namespace typr
