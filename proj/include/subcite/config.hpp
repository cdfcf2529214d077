#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "subcite/credit.hpp"
#include "subcite/metrics.hpp"
#include "subcite/segment.hpp"

namespace subcite::cli {

struct Config {
  struct Llm {
    std::string base_url;
    std::string api_key;
    std::string model;
    double temperature = 0.7;
    int max_tokens = 2048;
    int max_in_flight = 4;
    int timeout_seconds = 120;
    int max_retries = 3;
  } llm;

  struct Augment {
    int few_shot = 3;
    int per_request = 5;
    int contexts_per_request = 2;
    int budget_factor = 3;
  } augment;

  struct Credit {
    credit::BackendKind backend = credit::BackendKind::Heuristic;
    double tau = 0.8;
    metrics::QualityWeights weights;
  } credit;

  struct Mix {
    double min_fine_ratio = 0.8;
  } mix;

  segment::SegmentOptions segmentation;

  struct Store {
    std::string root = "subcite-store";
  } store;

  struct Split {
    std::uint64_t seed = 13;
    double train_fraction = 0.8;
  } split;

  struct Serve {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string ui_dir;
    std::string cors_origin = "*";
  } serve;

  /// Throws ConfigError naming the first invalid key.
  void check() const;
};

/// Parses the TOML subset used for config files: [section] headers,
/// key = value with strings, numbers, booleans and string arrays, and '#'
/// comments. Unknown sections or keys are errors.
Config parse_config(std::string_view text, const std::string& origin = "config");
Config load_config(const std::filesystem::path& file);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

EnvLookup process_env();

/// SUBCITE_LLM_BASE_URL, SUBCITE_LLM_API_KEY and SUBCITE_LLM_MODEL.
void apply_env(Config& config, const EnvLookup& env);

}  // namespace subcite::cli
