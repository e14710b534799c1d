#include "lbap/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lbap/errors.hpp"

namespace lbap {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where,
                    const std::string& source) {
  for (const auto& [key, value] : j.items()) {
    if (key == "api_key") {
      throw UsageError(source + ": '" + where + "api_key' is not accepted; put the credential in the environment "
                       "variable named by api_key_env");
    }
    if (!allowed.contains(key)) throw UsageError(source + ": unknown config key '" + where + key + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

BetaParams beta_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw InvariantViolation("detector", "beta parameters are [alpha, beta]");
  return {v[0], v[1]};
}

SyntheticProfile profile_from(const json& j, const std::string& source) {
  SyntheticProfile p;
  const std::pair<const char*, double*> fields[] = {
      {"hallucination_rate", &p.hallucination_rate},
      {"infeasible_rate", &p.infeasible_rate},
      {"miss_rate", &p.miss_rate},
      {"true_mass", &p.true_mass},
      {"true_mass_spread", &p.true_mass_spread},
      {"hallucination_weight", &p.hallucination_weight},
      {"infeasible_weight", &p.infeasible_weight},
      {"wrong_weight", &p.wrong_weight},
      {"not_listed_weight", &p.not_listed_weight},
      {"option_noise", &p.option_noise},
      {"knowledge_true", &p.knowledge_true},
      {"knowledge_wrong", &p.knowledge_wrong},
      {"knowledge_hallucinated", &p.knowledge_hallucinated},
      {"knowledge_infeasible", &p.knowledge_infeasible},
      {"knowledge_concentration", &p.knowledge_concentration},
  };
  std::set<std::string> allowed{"options"};
  for (const auto& [name, target] : fields) {
    allowed.insert(name);
    read(j, name, *target);
  }
  reject_unknown(j, allowed, "backend.synthetic.", source);
  read(j, "options", p.options);
  return p;
}

BackendSettings backend_from(const json& j, const std::filesystem::path& base, const std::string& where,
                             const std::string& source) {
  reject_unknown(j,
                 {"kind", "fixtures", "endpoint", "model", "api_key_env", "top_logprobs", "temperature",
                  "max_in_flight", "requests_per_minute", "max_attempts", "timeout_s", "max_generation_tokens",
                  "synthetic"},
                 where, source);
  BackendSettings b;
  const std::string kind = j.value("kind", "synthetic");
  if (kind == "replay") {
    b.kind = BackendKind::Replay;
  } else if (kind == "http") {
    b.kind = BackendKind::Http;
  } else if (kind == "synthetic") {
    b.kind = BackendKind::Synthetic;
  } else {
    throw UsageError(source + ": " + where + "kind must be replay, http or synthetic");
  }
  if (j.contains("fixtures")) b.fixtures = resolve(base, j.at("fixtures").get<std::string>());
  read(j, "endpoint", b.http.endpoint);
  read(j, "model", b.http.model);
  read(j, "api_key_env", b.api_key_env);
  read(j, "top_logprobs", b.http.top_logprobs);
  read(j, "temperature", b.http.temperature);
  read(j, "max_in_flight", b.http.max_in_flight);
  read(j, "requests_per_minute", b.http.requests_per_minute);
  read(j, "max_attempts", b.http.max_attempts);
  read(j, "max_generation_tokens", b.http.max_generation_tokens);
  if (j.contains("timeout_s")) b.http.timeout = std::chrono::seconds(j.at("timeout_s").get<int>());
  if (j.contains("synthetic")) b.synthetic = profile_from(j.at("synthetic"), source);
  return b;
}

void validate_backend(const BackendSettings& b, const char* field) {
  switch (b.kind) {
    case BackendKind::Replay:
      if (b.fixtures.empty()) throw InvariantViolation(field, "replay backend needs 'fixtures'");
      if (!std::filesystem::exists(b.fixtures)) {
        throw Error(Error::Category::Data, "fixture file not found: " + b.fixtures.string());
      }
      break;
    case BackendKind::Http:
      if (b.http.endpoint.empty() || b.http.model.empty()) {
        throw InvariantViolation(field, "http backend needs endpoint and model");
      }
      if (b.http.top_logprobs < 1 || b.http.max_in_flight < 1 || b.http.max_attempts < 1 ||
          !(b.http.requests_per_minute > 0.0)) {
        throw InvariantViolation(field, "http limits must be positive");
      }
      break;
    case BackendKind::Synthetic:
      b.synthetic.validate();
      break;
  }
}

std::shared_ptr<Backend> make_backend(const BackendSettings& b, const RunConfig& cfg,
                                      const std::vector<Scenario>& scenarios) {
  switch (b.kind) {
    case BackendKind::Replay:
      return std::make_shared<ReplayBackend>(ReplayBackend::from_file(b.fixtures));
    case BackendKind::Http: {
      auto http = b.http;
      const char* key = std::getenv(b.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw UsageError("http backend: environment variable " + b.api_key_env + " is not set");
      }
      http.api_key = key;
      return std::make_shared<HttpBackend>(http);
    }
    case BackendKind::Synthetic: {
      auto profile = b.synthetic;
      profile.seed = cfg.seed.value_or(0);
      return std::make_shared<SyntheticBackend>(profile, environment_by_name(cfg.environment), scenarios);
    }
  }
  throw Error(Error::Category::Internal, "unhandled backend kind");
}

}  // namespace

bool RunConfig::needs_seed() const {
  const auto synthetic = [](const BackendSettings& b) { return b.kind == BackendKind::Synthetic; };
  return synthetic(backend) || (knowledge_backend && synthetic(*knowledge_backend)) ||
         (grounding == GroundingMode::Perception && uses_scene(mode));
}

std::vector<double> RunConfig::threshold_grid() const {
  return thresholds.empty() ? default_threshold_grid() : thresholds;
}

void RunConfig::validate() const {
  environment_by_name(environment);
  validate_backend(backend, "backend");
  if (knowledge_backend) validate_backend(*knowledge_backend, "knowledge_backend");
  if (threshold && !(*threshold > 0.0 && *threshold < 1.0)) {
    throw InvariantViolation("threshold", "must lie in (0,1)");
  }
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw InvariantViolation("thresholds", "each threshold must lie in (0,1)");
  }
  GroundingConfig{epsilon, grounding, iou_threshold}.validate();
  if (max_options && (*max_options < 1 || *max_options > 25)) {
    throw InvariantViolation("max_options", "must lie in [1,25]");
  }
  if (workers < 1) throw InvariantViolation("workers", "must be at least 1");
  if (!(max_error_fraction >= 0.0 && max_error_fraction <= 1.0)) {
    throw InvariantViolation("max_error_fraction", "must lie in [0,1]");
  }
  auto must_exist = [](const std::filesystem::path& p, const char* what) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      throw Error(Error::Category::Data, std::string(what) + " not found: " + p.string());
    }
  };
  must_exist(generation_template, "generation template");
  must_exist(scoring_template, "scoring template");
  must_exist(prompt_set_template, "prompt-set template");
  must_exist(binary_template, "binary template");
  for (const auto& p : knowledge_prompts) must_exist(p, "knowledge prompt");
  must_exist(scenarios, "scenario file");
  must_exist(tabletop_spec, "tabletop spec");
  if (needs_seed() && !seed) throw UsageError("a seed is required for synthetic backends and simulated detectors");
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw ParseError(source, 1, ex.what());
  }
  if (!j.is_object()) throw ParseError(source, 1, "config must be a JSON object");
  RunConfig cfg;
  try {
    reject_unknown(j,
                   {"environment", "backend", "knowledge_backend", "mode", "threshold", "thresholds", "epsilon",
                    "iou_threshold", "grounding", "detector", "max_options", "include_not_listed", "templates",
                    "knowledge_prompts", "scenarios", "tabletop_spec", "seed", "workers", "max_error_fraction",
                    "cache_dir"},
                   "", source);
    read(j, "environment", cfg.environment);
    if (j.contains("backend")) cfg.backend = backend_from(j.at("backend"), base_dir, "backend.", source);
    if (j.contains("knowledge_backend")) {
      cfg.knowledge_backend = backend_from(j.at("knowledge_backend"), base_dir, "knowledge_backend.", source);
    }
    if (j.contains("mode")) {
      const auto name = j.at("mode").get<std::string>();
      const auto mode = method_mode_from_string(name);
      if (!mode) throw UsageError(source + ": unknown mode '" + name + "'");
      cfg.mode = *mode;
    }
    if (j.contains("threshold")) cfg.threshold = j.at("threshold").get<double>();
    read(j, "thresholds", cfg.thresholds);
    read(j, "epsilon", cfg.epsilon);
    read(j, "iou_threshold", cfg.iou_threshold);
    if (j.contains("grounding")) {
      const auto g = j.at("grounding").get<std::string>();
      if (g == "textual") {
        cfg.grounding = GroundingMode::Textual;
      } else if (g == "perception") {
        cfg.grounding = GroundingMode::Perception;
      } else {
        throw UsageError(source + ": grounding must be textual or perception");
      }
    }
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      reject_unknown(d, {"present", "absent", "duplicate_probability"}, "detector.", source);
      if (d.contains("present")) cfg.detector.present = beta_from(d.at("present"));
      if (d.contains("absent")) cfg.detector.absent = beta_from(d.at("absent"));
      read(d, "duplicate_probability", cfg.detector.duplicate_probability);
    }
    if (j.contains("max_options")) cfg.max_options = j.at("max_options").get<std::size_t>();
    if (j.contains("include_not_listed")) cfg.include_not_listed = j.at("include_not_listed").get<bool>();
    if (j.contains("templates")) {
      const auto& t = j.at("templates");
      reject_unknown(t, {"generation", "scoring", "prompt_set", "binary"}, "templates.", source);
      if (t.contains("generation")) cfg.generation_template = resolve(base_dir, t.at("generation"));
      if (t.contains("scoring")) cfg.scoring_template = resolve(base_dir, t.at("scoring"));
      if (t.contains("prompt_set")) cfg.prompt_set_template = resolve(base_dir, t.at("prompt_set"));
      if (t.contains("binary")) cfg.binary_template = resolve(base_dir, t.at("binary"));
    }
    if (j.contains("knowledge_prompts")) {
      for (const auto& p : j.at("knowledge_prompts").get<std::vector<std::string>>()) {
        cfg.knowledge_prompts.push_back(resolve(base_dir, p));
      }
    }
    if (j.contains("scenarios")) cfg.scenarios = resolve(base_dir, j.at("scenarios"));
    if (j.contains("tabletop_spec")) cfg.tabletop_spec = resolve(base_dir, j.at("tabletop_spec"));
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    read(j, "workers", cfg.workers);
    read(j, "max_error_fraction", cfg.max_error_fraction);
    if (j.contains("cache_dir")) cfg.cache_dir = resolve(base_dir, j.at("cache_dir"));
  } catch (const json::exception& ex) {
    throw ParseError(source, 1, ex.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Category::Data, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path(), path.string());
}

Pipeline build_pipeline(const RunConfig& cfg) {
  Pipeline p = Pipeline::for_environment(cfg.environment);
  if (cfg.max_options) p.mcqa.max_options = *cfg.max_options;
  if (cfg.include_not_listed) p.mcqa.include_not_listed = *cfg.include_not_listed;
  if (!cfg.generation_template.empty()) p.templates.generation = read_template_file(cfg.generation_template);
  if (!cfg.scoring_template.empty()) p.templates.scoring = read_template_file(cfg.scoring_template);
  if (!cfg.prompt_set_template.empty()) p.templates.prompt_set = read_template_file(cfg.prompt_set_template);
  if (!cfg.binary_template.empty()) p.templates.binary = read_template_file(cfg.binary_template);
  if (!cfg.knowledge_prompts.empty()) {
    p.knowledge.clear();
    for (const auto& path : cfg.knowledge_prompts) p.knowledge.push_back(load_knowledge_prompt(path));
  }
  p.grounding = GroundingConfig{cfg.epsilon, cfg.grounding, cfg.iou_threshold};
  p.grounding.validate();
  if (cfg.grounding == GroundingMode::Perception) {
    auto detector = cfg.detector;
    detector.seed = cfg.seed.value_or(0);
    p.detector = std::make_shared<SimulatedDetector>(detector);
  }
  return p;
}

std::shared_ptr<Backend> build_backend(const RunConfig& cfg, const std::vector<Scenario>& scenarios) {
  std::shared_ptr<Backend> backend = make_backend(cfg.backend, cfg, scenarios);
  if (cfg.knowledge_backend) {
    auto routing = std::make_shared<RoutingBackend>(backend);
    routing->route(QueryKind::WorldKnowledge, make_backend(*cfg.knowledge_backend, cfg, scenarios));
    backend = routing;
  }
  if (!cfg.cache_dir.empty()) {
    std::filesystem::create_directories(cfg.cache_dir);
    backend = std::make_shared<RecordingBackend>(backend, cfg.cache_dir / "llm_cache.jsonl", true);
  }
  return backend;
}

}  // namespace lbap
