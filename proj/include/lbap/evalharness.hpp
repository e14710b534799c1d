#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lbap/backend.hpp"
#include "lbap/domain.hpp"
#include "lbap/environment.hpp"
#include "lbap/grounding.hpp"
#include "lbap/knowledge.hpp"
#include "lbap/mcqa.hpp"
#include "lbap/posterior.hpp"
#include "lbap/prompts.hpp"
#include "lbap/scenarios.hpp"

namespace lbap {

// Everything needed to turn a scenario into a scored candidate set.
struct Pipeline {
  Environment env;
  PromptTemplates templates;
  McqaConfig mcqa;
  GroundingConfig grounding;
  std::vector<KnowledgePrompt> knowledge;
  std::shared_ptr<const DetectionOracle> detector;  // required for perception grounding

  // Shipped templates and knowledge prompt for "tabletop" or "mobile".
  static Pipeline for_environment(std::string_view name);
};

struct HarnessConfig {
  std::size_t workers = 1;
  double max_error_fraction = 0.1;
};

// Result of the model-facing half of an episode; thresholding is pure
// post-processing on top of it.
struct ScoredScenario {
  std::string scenario_id;
  CandidateSet set;
  std::vector<bool> is_true;                // per candidate
  std::vector<std::string> baseline_set;    // Prompt mode: labels the model listed
  bool binary_certain = false;              // Binary mode verdict
  std::optional<std::string> error;         // set when the scenario failed
};

// Generates, scores and refines candidates for every scenario on a bounded
// worker pool. Results are stored by scenario index, so the output does not
// depend on scheduling. ReplayMiss is fatal; other per-scenario pipeline
// errors are recorded and abort the run only past max_error_fraction.
std::vector<ScoredScenario> score_scenarios(const std::vector<Scenario>& scenarios, MethodMode mode,
                                            Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg);

struct Episode {
  Decision decision;
  PredictionSet set;
  EpisodeOutcome outcome;
};

Episode outcome_at(const Scenario& scenario, const ScoredScenario& scored, MethodMode mode, double threshold,
                   const Pipeline& pipeline);

// Full per-scenario pipeline at one threshold. Failed scenarios are skipped.
std::vector<EpisodeOutcome> run_mode(const std::vector<Scenario>& scenarios, MethodMode mode, double threshold,
                                     Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg);

struct SweepRow {
  double threshold = 0.0;
  double success_rate = 0.0;
  double help_rate = 0.0;
  double mean_set_size = 1.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double auc_success_vs_help = 0.0;
  MethodMode mode = MethodMode::Full;
  std::size_t n_scenarios = 0;
  std::size_t n_failed = 0;
};

// 15 log-spaced values from 1e-7 to 0.7.
std::vector<double> default_threshold_grid();

// Trapezoid of success over help after sorting by help rate, with the curve
// held flat out to help = 0 and help = 1.
double auc(std::span<const SweepRow> rows);

SweepReport summarize(const std::vector<Scenario>& scenarios, const std::vector<ScoredScenario>& scored,
                      MethodMode mode, std::span<const double> thresholds, const Pipeline& pipeline);

SweepReport sweep(const std::vector<Scenario>& scenarios, MethodMode mode, std::span<const double> thresholds,
                  Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg);

// Prediction sets must shrink as t grows and help rate may not increase.
// Returns the number of violating (scenario, threshold pair) checks.
std::size_t count_nestedness_violations(const std::vector<Scenario>& scenarios,
                                        const std::vector<ScoredScenario>& scored, MethodMode mode,
                                        std::span<const double> thresholds, const Pipeline& pipeline);

struct Calibration {
  double threshold = 0.5;
  double qhat = 0.0;
  std::size_t rank = 0;  // 1-based order statistic used
  std::size_t n = 0;
  bool clipped = false;  // t hit the [delta, 1 - delta] clamp
};

inline constexpr double kThresholdClip = 1e-6;

// Nonconformity score 1 - (largest posterior among true candidates); 1 when
// no candidate is true.
double nonconformity(const ScoredScenario& scored);

// Split-conformal threshold from precomputed scores. Throws
// InsufficientCalibration when ceil((n+1)(1-alpha)) > n.
Calibration calibrate_from_scores(std::vector<double> scores, double alpha);

// Smallest n for which the conformal rank exists at this alpha.
std::size_t min_calibration_size(double alpha);

inline constexpr std::size_t kMinCalibrationScenarios = 20;

Calibration calibrate_threshold(const std::vector<Scenario>& calibration, MethodMode mode, double alpha,
                                Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg);

// Fraction of scored scenarios whose prediction set at t holds a true option.
double empirical_coverage(const std::vector<ScoredScenario>& scored, double threshold);

// Report serialization. Numbers use fixed formatting so identical inputs give
// identical bytes.
void write_sweep_csv(std::ostream& out, const SweepReport& report);
std::string summary_json(const SweepReport& report);
std::string trace_json_line(const Scenario& scenario, const ScoredScenario& scored, const Episode& episode,
                            double threshold);
void write_traces(std::ostream& out, const std::vector<Scenario>& scenarios,
                  const std::vector<ScoredScenario>& scored, MethodMode mode, std::span<const double> thresholds,
                  const Pipeline& pipeline);

}  // namespace lbap
