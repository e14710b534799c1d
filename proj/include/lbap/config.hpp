#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lbap/backend.hpp"
#include "lbap/evalharness.hpp"
#include "lbap/grounding.hpp"
#include "lbap/http_backend.hpp"
#include "lbap/posterior.hpp"
#include "lbap/synthetic.hpp"

namespace lbap {

enum class BackendKind { Replay, Http, Synthetic };

struct BackendSettings {
  BackendKind kind = BackendKind::Synthetic;
  std::filesystem::path fixtures;                  // replay
  HttpBackendConfig http;                          // http; api_key filled from api_key_env
  std::string api_key_env = "OPENAI_API_KEY";
  SyntheticProfile synthetic;                      // synthetic; seed comes from RunConfig::seed
};

// One JSON file. Relative paths resolve against the file's directory; CLI
// flags override the matching keys afterwards.
struct RunConfig {
  std::string environment = "tabletop";
  BackendSettings backend;
  std::optional<BackendSettings> knowledge_backend;  // routes WorldKnowledge queries
  MethodMode mode = MethodMode::Full;
  std::optional<double> threshold;
  std::vector<double> thresholds;  // empty: default grid
  double epsilon = 1e-3;
  double iou_threshold = 0.5;
  GroundingMode grounding = GroundingMode::Textual;
  SimulatedDetectorConfig detector;
  std::optional<std::size_t> max_options;
  std::optional<bool> include_not_listed;
  std::filesystem::path generation_template;
  std::filesystem::path scoring_template;
  std::filesystem::path prompt_set_template;
  std::filesystem::path binary_template;
  std::vector<std::filesystem::path> knowledge_prompts;
  std::filesystem::path scenarios;
  std::filesystem::path tabletop_spec;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  double max_error_fraction = 0.1;
  std::filesystem::path cache_dir;

  // Checks ranges and that every referenced file exists.
  void validate() const;
  [[nodiscard]] bool needs_seed() const;
  [[nodiscard]] std::vector<double> threshold_grid() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const std::string& source = "<config>");

Pipeline build_pipeline(const RunConfig& cfg);

// Constructs the configured backend (plus routing and the on-disk cache).
// Synthetic backends need the scenarios they will be asked about.
std::shared_ptr<Backend> build_backend(const RunConfig& cfg, const std::vector<Scenario>& scenarios);

}  // namespace lbap
