// lbap: scenario generation, fixture recording, runs, sweeps and calibration.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lbap/config.hpp"
#include "lbap/errors.hpp"
#include "lbap/evalharness.hpp"
#include "lbap/scenarios.hpp"

namespace {

using lbap::Error;

struct Options {
  std::string config;
  std::string scenarios;
  std::string mode;
  std::optional<double> threshold;
  double alpha = 0.1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
  std::size_t n = 0;
  std::string spec;
  std::vector<std::string> report_dirs;
};

int exit_code(Error::Category c) {
  switch (c) {
    case Error::Category::Usage: return 2;
    case Error::Category::Backend: return 3;
    case Error::Category::Data: return 4;
    case Error::Category::Internal: return 1;
  }
  return 1;
}

std::string_view category_name(Error::Category c) {
  switch (c) {
    case Error::Category::Usage: return "usage";
    case Error::Category::Backend: return "backend";
    case Error::Category::Data: return "data";
    case Error::Category::Internal: return "internal";
  }
  return "internal";
}

int fail(Error::Category c, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"category", category_name(c)}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return exit_code(c);
}

lbap::RunConfig load_config(const Options& o) {
  lbap::RunConfig cfg;
  if (!o.config.empty()) cfg = lbap::load_run_config(o.config);
  if (!o.scenarios.empty()) cfg.scenarios = o.scenarios;
  if (!o.mode.empty() && o.mode != "all") {
    const auto mode = lbap::method_mode_from_string(o.mode);
    if (!mode) throw lbap::UsageError("unknown mode '" + o.mode + "'");
    cfg.mode = *mode;
  }
  if (o.threshold) cfg.threshold = o.threshold;
  if (o.seed) cfg.seed = o.seed;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  if (cfg.scenarios.empty()) throw lbap::UsageError("no scenario file given (--scenarios or config 'scenarios')");
  return cfg;
}

std::vector<lbap::Scenario> load_scenarios(const lbap::RunConfig& cfg) {
  return lbap::load_scenarios(cfg.scenarios, lbap::environment_by_name(cfg.environment));
}

lbap::HarnessConfig harness(const lbap::RunConfig& cfg) { return {cfg.workers, cfg.max_error_fraction}; }

std::filesystem::path out_dir(const Options& o) {
  if (o.out.empty()) throw lbap::UsageError("--out is required");
  std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Error::Category::Data, "cannot write " + path.string());
  out << content;
}

int cmd_generate(const Options& o) {
  if (o.n == 0) throw lbap::UsageError("--n must be at least 1");
  if (!o.seed) throw lbap::UsageError("--seed is required for generated scenarios");
  if (o.out.empty()) throw lbap::UsageError("--out is required");
  lbap::TabletopSpec spec;
  if (!o.spec.empty()) {
    spec = lbap::load_tabletop_spec(o.spec);
  } else if (!o.config.empty()) {
    const auto cfg = lbap::load_run_config(o.config);
    if (!cfg.tabletop_spec.empty()) spec = lbap::load_tabletop_spec(cfg.tabletop_spec);
  }
  const auto samples = lbap::generate_tabletop_samples(o.n, *o.seed, spec);
  std::vector<lbap::Scenario> scenarios;
  std::map<std::string, std::size_t> by_type;
  std::map<std::string, std::size_t> by_case;
  for (const auto& s : samples) {
    scenarios.push_back(s.scenario);
    const std::string type(lbap::to_string(s.ambiguity_case.type));
    ++by_type[type];
    ++by_case[type + ":" + s.ambiguity_case.term];
  }
  lbap::save_scenarios(o.out, scenarios);
  nlohmann::ordered_json j;
  j["written"] = scenarios.size();
  j["path"] = o.out;
  j["by_type"] = by_type;
  j["by_case"] = by_case;
  std::cout << j.dump(2) << '\n';
  return 0;
}

std::vector<lbap::MethodMode> record_modes(const Options& o, const lbap::RunConfig& cfg) {
  if (o.mode == "all") return {lbap::MethodMode::Full, lbap::MethodMode::Prompt, lbap::MethodMode::Binary};
  return {cfg.mode};
}

int cmd_record(const Options& o) {
  const auto cfg = load_config(o);
  if (o.out.empty()) throw lbap::UsageError("--out (fixture file) is required");
  const auto scenarios = load_scenarios(cfg);
  const auto pipeline = lbap::build_pipeline(cfg);
  auto inner = lbap::build_backend(cfg, scenarios);
  std::filesystem::path path(o.out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  lbap::RecordingBackend recorder(inner, path, false);
  std::size_t failed = 0;
  for (auto mode : record_modes(o, cfg)) {
    for (const auto& s : lbap::score_scenarios(scenarios, mode, recorder, pipeline, harness(cfg))) {
      failed += s.error ? 1 : 0;
    }
  }
  recorder.flush();
  nlohmann::ordered_json j;
  j["fixtures"] = path.string();
  j["recorded"] = recorder.recorded();
  j["failed_scenarios"] = failed;
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_run(const Options& o) {
  const auto cfg = load_config(o);
  const double t = cfg.threshold.value_or(0.5);
  const auto scenarios = load_scenarios(cfg);
  const auto pipeline = lbap::build_pipeline(cfg);
  auto backend = lbap::build_backend(cfg, scenarios);
  const auto scored = lbap::score_scenarios(scenarios, cfg.mode, *backend, pipeline, harness(cfg));
  const std::vector<double> ts{t};
  const auto report = lbap::summarize(scenarios, scored, cfg.mode, ts, pipeline);
  if (!o.out.empty()) {
    const auto dir = out_dir(o);
    std::ostringstream trace;
    lbap::write_traces(trace, scenarios, scored, cfg.mode, ts, pipeline);
    write_file(dir / "trace.jsonl", trace.str());
  }
  nlohmann::ordered_json j;
  j["mode"] = std::string(lbap::to_string(cfg.mode));
  j["threshold"] = t;
  j["n"] = report.n_scenarios;
  j["failed"] = report.n_failed;
  j["success_rate"] = report.rows.front().success_rate;
  j["help_rate"] = report.rows.front().help_rate;
  j["mean_set_size"] = report.rows.front().mean_set_size;
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto cfg = load_config(o);
  const auto dir = out_dir(o);
  const auto scenarios = load_scenarios(cfg);
  const auto pipeline = lbap::build_pipeline(cfg);
  auto backend = lbap::build_backend(cfg, scenarios);
  const auto grid = cfg.threshold_grid();
  const auto scored = lbap::score_scenarios(scenarios, cfg.mode, *backend, pipeline, harness(cfg));
  const auto report = lbap::summarize(scenarios, scored, cfg.mode, grid, pipeline);

  std::ostringstream csv;
  lbap::write_sweep_csv(csv, report);
  write_file(dir / "sweep.csv", csv.str());
  write_file(dir / "summary.json", lbap::summary_json(report) + "\n");
  std::ostringstream trace;
  lbap::write_traces(trace, scenarios, scored, cfg.mode, grid, pipeline);
  write_file(dir / "trace.jsonl", trace.str());
  std::cout << lbap::summary_json(report) << '\n';
  return 0;
}

int cmd_calibrate(const Options& o) {
  if (!(o.alpha > 0.0 && o.alpha < 0.5)) throw lbap::UsageError("--alpha must lie in (0, 0.5)");
  auto cfg = load_config(o);
  if (!lbap::uses_threshold(cfg.mode)) {
    throw lbap::UsageError("calibration needs a thresholded mode, not " + std::string(lbap::to_string(cfg.mode)));
  }
  const auto scenarios = load_scenarios(cfg);
  const auto pipeline = lbap::build_pipeline(cfg);
  auto backend = lbap::build_backend(cfg, scenarios);
  const std::size_t need = std::max(lbap::kMinCalibrationScenarios, lbap::min_calibration_size(o.alpha));
  if (scenarios.size() < need) throw lbap::InsufficientCalibration(scenarios.size(), need);
  const auto scored = lbap::score_scenarios(scenarios, cfg.mode, *backend, pipeline, harness(cfg));
  std::vector<double> scores;
  for (const auto& s : scored) {
    if (!s.error) scores.push_back(lbap::nonconformity(s));
  }
  if (scores.size() < need) throw lbap::InsufficientCalibration(scores.size(), need);
  const auto cal = lbap::calibrate_from_scores(scores, o.alpha);
  if (cal.clipped) {
    std::cerr << "warning: calibration scores are degenerate; threshold clipped to " << cal.threshold
              << " (prediction sets reduce to the argmax option)\n";
  }
  nlohmann::ordered_json j;
  j["mode"] = std::string(lbap::to_string(cfg.mode));
  j["alpha"] = o.alpha;
  j["n"] = cal.n;
  j["rank"] = cal.rank;
  j["qhat"] = cal.qhat;
  j["threshold"] = cal.threshold;
  j["clipped"] = cal.clipped;
  j["coverage"] = lbap::empirical_coverage(scored, cal.threshold);
  std::printf("t = %.9g\n", cal.threshold);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_report(const Options& o) {
  if (o.report_dirs.empty()) throw lbap::UsageError("report needs at least one sweep output directory");
  std::printf("%-12s %8s %6s\n", "mode", "auc", "n");
  for (const auto& d : o.report_dirs) {
    const std::filesystem::path dir(d);
    std::ifstream summary(dir / "summary.json");
    if (!summary) throw Error(Error::Category::Data, "no summary.json in " + dir.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(summary);
    } catch (const nlohmann::json::exception& ex) {
      throw lbap::ParseError((dir / "summary.json").string(), 1, ex.what());
    }
    std::printf("%-12s %8.4f %6zu\n", j.at("mode").get<std::string>().c_str(), j.at("auc").get<double>(),
                j.at("n").get<std::size_t>());
    std::ifstream csv(dir / "sweep.csv");
    std::string line;
    while (csv && std::getline(csv, line)) std::printf("    %s\n", line.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LBAP: Bayesian uncertainty alignment for LLM planners"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--scenarios", o.scenarios, "scenario JSONL (overrides config)")->check(CLI::ExistingFile);
    sub->add_option("--mode", o.mode, "full|scene-only|world-only|prior-only|no-help|prompt|binary");
    sub->add_option("--seed", o.seed, "seed for synthetic backends and detectors");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* generate = app.add_subcommand("generate", "sample tabletop scenarios");
  generate->add_option("--n", o.n, "number of scenarios")->required();
  generate->add_option("--seed", o.seed, "generator seed");
  generate->add_option("--spec", o.spec, "tabletop spec JSON")->check(CLI::ExistingFile);
  generate->add_option("--config", o.config, "run configuration (uses its tabletop_spec)")->check(CLI::ExistingFile);
  generate->add_option("--out", o.out, "output JSONL")->required();

  auto* record = app.add_subcommand("record", "run the pipeline and write replay fixtures");
  add_common(record);
  record->add_option("--out", o.out, "fixture JSONL to write")->required();

  auto* run = app.add_subcommand("run", "evaluate one mode at one threshold");
  add_common(run);
  run->add_option("--threshold", o.threshold, "prediction-set threshold in (0,1)");
  run->add_option("--out", o.out, "directory for trace.jsonl");

  auto* sweep = app.add_subcommand("sweep", "evaluate one mode over a threshold grid");
  add_common(sweep);
  sweep->add_option("--out", o.out, "output directory")->required();

  auto* calibrate = app.add_subcommand("calibrate", "split-conformal threshold from a calibration set");
  add_common(calibrate);
  calibrate->add_option("--alpha", o.alpha, "miscoverage level in (0, 0.5)");

  auto* report = app.add_subcommand("report", "print sweep summaries");
  report->add_option("dirs", o.report_dirs, "sweep output directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(Error::Category::Usage, e.what());
  }

  try {
    if (*generate) return cmd_generate(o);
    if (*record) return cmd_record(o);
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*calibrate) return cmd_calibrate(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    return fail(Error::Category::Internal, e.what());
  }
  return 0;
}
