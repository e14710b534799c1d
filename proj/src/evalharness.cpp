#include "lbap/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <regex>
#include <thread>

#include <json.hpp>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

Pipeline Pipeline::for_environment(std::string_view name) {
  Pipeline p;
  p.env = environment_by_name(name);
  p.templates = builtin_templates(name);
  p.mcqa.include_not_listed = p.env.include_not_listed;
  p.knowledge.push_back(builtin_knowledge_prompt(name));
  return p;
}

namespace {

std::vector<std::string> parse_prompt_set(std::string_view completion, const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  const auto open = completion.find('[');
  const auto close = completion.find(']', open == std::string_view::npos ? 0 : open);
  if (open == std::string_view::npos || close == std::string_view::npos) return out;
  static const std::regex kLabel(R"([A-Za-z])");
  const std::string inner(completion.substr(open + 1, close - open - 1));
  for (auto it = std::sregex_iterator(inner.begin(), inner.end(), kLabel); it != std::sregex_iterator(); ++it) {
    std::string label = it->str();
    label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    if (std::find(labels.begin(), labels.end(), label) != labels.end() &&
        std::find(out.begin(), out.end(), label) == out.end()) {
      out.push_back(label);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool parse_binary(const BackendResponse& r) {
  const bool has_certain = r.token_logprobs.contains("Certain");
  const bool has_uncertain = r.token_logprobs.contains("Uncertain");
  if (has_certain || has_uncertain) return logprob_or_floor(r, "Certain") >= logprob_or_floor(r, "Uncertain");
  const std::string t = text::collapse_whitespace(r.text);
  return t.rfind("certain", 0) == 0;
}

ScoredScenario score_one(const Scenario& s, MethodMode mode, Backend& backend, const Pipeline& p) {
  ScoredScenario out;
  out.scenario_id = s.id;
  auto& set = out.set;
  set.candidates = generate_candidates(s, backend, p.templates, p.env, p.mcqa);
  const auto bundle = build_prompt_bundle(p.templates, s, set.candidates);
  set.prior = score_prior(bundle, s, backend);

  const std::size_t n = set.candidates.size();
  set.scene_lik.assign(n, 1.0);
  set.world_lik.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = set.candidates[i];
    out.is_true.push_back(!is_not_listed(c, p.mcqa) && is_true_action(s, c.text, p.env));
    if (is_not_listed(c, p.mcqa)) continue;
    if (uses_scene(mode)) {
      set.scene_lik[i] = p.grounding.mode == GroundingMode::Textual
                             ? ground_textual(c, s.scene, p.grounding)
                             : ground_perception(c, s.scene, p.detector.get(), p.grounding);
    }
    if (uses_world(mode)) set.world_lik[i] = knowledge_score(c, s.scene, p.knowledge, backend, p.env, s.id);
  }
  set.posterior = compute_posterior(set.prior, set.scene_lik, set.world_lik, mode);
  set.validate();

  const auto options = render_options(set.candidates);
  const std::map<std::string, std::string> fill{
      {"scene", s.scene.description}, {"instruction", s.instruction}, {"options", options}};
  if (mode == MethodMode::Prompt) {
    BackendQuery q{QueryKind::PromptSet, fill_placeholders(p.templates.prompt_set, fill), {}, s.id};
    out.baseline_set = parse_prompt_set(backend.query(q).text, set.labels());
  } else if (mode == MethodMode::Binary) {
    BackendQuery q{QueryKind::BinaryCertainty, fill_placeholders(p.templates.binary, fill), {"Certain", "Uncertain"},
                   s.id};
    out.binary_certain = parse_binary(backend.query(q));
  }
  return out;
}

}  // namespace

std::vector<ScoredScenario> score_scenarios(const std::vector<Scenario>& scenarios, MethodMode mode,
                                            Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg) {
  if (!(cfg.max_error_fraction >= 0.0 && cfg.max_error_fraction <= 1.0)) {
    throw InvariantViolation("max_error_fraction", "must lie in [0,1]");
  }
  if (uses_scene(mode) && pipeline.grounding.mode == GroundingMode::Perception && !pipeline.detector) {
    throw DetectorUnavailable("perception grounding selected but no detector configured");
  }
  pipeline.grounding.validate();

  std::vector<ScoredScenario> results(scenarios.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      try {
        results[i] = score_one(scenarios[i], mode, backend, pipeline);
      } catch (const ReplayMiss&) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
      } catch (const TransportError& ex) {
        results[i].scenario_id = scenarios[i].id;
        results[i].error = ex.what();
      } catch (const EmptyGeneration& ex) {
        results[i].scenario_id = scenarios[i].id;
        results[i].error = ex.what();
      } catch (const NoLabelMass& ex) {
        results[i].scenario_id = scenarios[i].id;
        results[i].error = ex.what();
      } catch (const DegenerateMass& ex) {
        results[i].scenario_id = scenarios[i].id;
        results[i].error = ex.what();
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.workers, 1, std::max<std::size_t>(1, scenarios.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  const auto failed = static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [](const ScoredScenario& r) { return r.error.has_value(); }));
  if (!scenarios.empty() &&
      static_cast<double>(failed) > cfg.max_error_fraction * static_cast<double>(scenarios.size())) {
    std::string first;
    for (const auto& r : results) {
      if (r.error) {
        first = *r.error;
        break;
      }
    }
    throw Error(Error::Category::Backend, std::to_string(failed) + " of " + std::to_string(scenarios.size()) +
                                              " scenarios failed (first: " + first + ")");
  }
  return results;
}

Episode outcome_at(const Scenario& scenario, const ScoredScenario& scored, MethodMode mode, double threshold,
                   const Pipeline& pipeline) {
  const auto labels = scored.set.labels();
  Episode ep;
  switch (mode) {
    case MethodMode::NoHelp: {
      const auto best = labels[argmax(scored.set.posterior)];
      ep.set = PredictionSet{{best}, threshold, false};
      ep.decision = Execute{best};
      break;
    }
    case MethodMode::Prompt: {
      ep.set = PredictionSet{scored.baseline_set, threshold, false};
      if (ep.set.members.empty()) {
        ep.set.members = {labels[argmax(scored.set.prior)]};
        ep.set.fallback = true;
      }
      ep.decision = decide(ep.set);
      break;
    }
    case MethodMode::Binary: {
      if (scored.binary_certain) {
        ep.set = PredictionSet{{labels[argmax(scored.set.prior)]}, threshold, false};
      } else {
        ep.set = PredictionSet{labels, threshold, false};
      }
      ep.decision = decide(ep.set);
      break;
    }
    default:
      ep.set = build_prediction_set(scored.set.posterior, labels, threshold);
      ep.decision = decide(ep.set);
      break;
  }
  ep.outcome = judge(scenario, ep.decision, scored.set.candidates, pipeline.env, pipeline.mcqa);
  return ep;
}

std::vector<EpisodeOutcome> run_mode(const std::vector<Scenario>& scenarios, MethodMode mode, double threshold,
                                     Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg) {
  const auto scored = score_scenarios(scenarios, mode, backend, pipeline, cfg);
  std::vector<EpisodeOutcome> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (scored[i].error) continue;
    out.push_back(outcome_at(scenarios[i], scored[i], mode, threshold, pipeline).outcome);
  }
  return out;
}

std::vector<double> default_threshold_grid() {
  constexpr int kPoints = 15;
  const double lo = std::log(1e-7);
  const double hi = std::log(0.7);
  std::vector<double> grid;
  grid.reserve(kPoints);
  for (int i = 0; i < kPoints; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / (kPoints - 1)));
  grid.front() = 1e-7;
  grid.back() = 0.7;
  return grid;
}

double auc(std::span<const SweepRow> rows) {
  if (rows.empty()) return 0.0;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(rows.size() + 2);
  for (const auto& r : rows) pts.emplace_back(r.help_rate, r.success_rate);
  std::sort(pts.begin(), pts.end());
  pts.insert(pts.begin(), {0.0, pts.front().second});
  pts.emplace_back(1.0, pts.back().second);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  }
  return area;
}

SweepReport summarize(const std::vector<Scenario>& scenarios, const std::vector<ScoredScenario>& scored,
                      MethodMode mode, std::span<const double> thresholds, const Pipeline& pipeline) {
  if (thresholds.empty()) throw UsageError("sweep needs at least one threshold");
  if (scored.size() != scenarios.size()) throw InvariantViolation("scored", "size differs from scenario count");
  std::vector<double> ts(thresholds.begin(), thresholds.end());
  std::sort(ts.begin(), ts.end());
  for (double t : ts) {
    if (!(t > 0.0 && t < 1.0)) throw InvariantViolation("threshold", "each threshold must lie in (0,1)");
  }

  SweepReport report;
  report.mode = mode;
  for (const auto& s : scored) (s.error ? report.n_failed : report.n_scenarios)++;
  for (double t : ts) {
    std::size_t success = 0;
    std::size_t help = 0;
    std::size_t set_total = 0;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      if (scored[i].error) continue;
      const auto ep = outcome_at(scenarios[i], scored[i], mode, t, pipeline);
      success += ep.outcome.success ? 1 : 0;
      help += ep.outcome.asked_help ? 1 : 0;
      set_total += ep.outcome.set_size;
    }
    SweepRow row{t, 0.0, 0.0, 1.0};
    if (report.n_scenarios > 0) {
      const auto n = static_cast<double>(report.n_scenarios);
      row.success_rate = static_cast<double>(success) / n;
      row.help_rate = static_cast<double>(help) / n;
      row.mean_set_size = static_cast<double>(set_total) / n;
    }
    report.rows.push_back(row);
  }
  report.auc_success_vs_help = auc(report.rows);
  return report;
}

SweepReport sweep(const std::vector<Scenario>& scenarios, MethodMode mode, std::span<const double> thresholds,
                  Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg) {
  if (thresholds.empty()) throw UsageError("sweep needs at least one threshold");
  const auto scored = score_scenarios(scenarios, mode, backend, pipeline, cfg);
  return summarize(scenarios, scored, mode, thresholds, pipeline);
}

std::size_t count_nestedness_violations(const std::vector<Scenario>& scenarios,
                                        const std::vector<ScoredScenario>& scored, MethodMode mode,
                                        std::span<const double> thresholds, const Pipeline& pipeline) {
  std::vector<double> ts(thresholds.begin(), thresholds.end());
  std::sort(ts.begin(), ts.end());
  std::size_t violations = 0;
  std::vector<std::size_t> help_counts(ts.size(), 0);
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (scored[i].error) continue;
    const auto labels = scored[i].set.labels();
    const auto best = labels[argmax(scored[i].set.posterior)];
    std::optional<PredictionSet> previous;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const auto ep = outcome_at(scenarios[i], scored[i], mode, ts[k], pipeline);
      help_counts[k] += ep.outcome.asked_help ? 1 : 0;
      if (previous && uses_threshold(mode)) {
        for (const auto& m : ep.set.members) {
          if (m != best && !previous->contains(m)) ++violations;
        }
      }
      previous = ep.set;
    }
  }
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (help_counts[k] > help_counts[k - 1]) ++violations;
  }
  return violations;
}

double nonconformity(const ScoredScenario& scored) {
  double best = -1.0;
  for (std::size_t i = 0; i < scored.is_true.size(); ++i) {
    if (scored.is_true[i]) best = std::max(best, scored.set.posterior[i]);
  }
  return best < 0.0 ? 1.0 : 1.0 - best;
}

std::size_t min_calibration_size(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvariantViolation("alpha", "must lie in (0,1)");
  // ceil((n+1)(1-alpha)) <= n  <=>  n >= (1-alpha)/alpha
  return static_cast<std::size_t>(std::ceil((1.0 - alpha) / alpha - 1e-9));
}

Calibration calibrate_from_scores(std::vector<double> scores, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvariantViolation("alpha", "must lie in (0,1)");
  const std::size_t n = scores.size();
  const double position = static_cast<double>(n + 1) * (1.0 - alpha);
  const auto rank = static_cast<std::size_t>(std::ceil(position - 1e-9));
  if (n == 0 || rank > n) throw InsufficientCalibration(n, std::max<std::size_t>(1, min_calibration_size(alpha)));
  std::sort(scores.begin(), scores.end());
  Calibration c;
  c.n = n;
  c.rank = std::max<std::size_t>(rank, 1);
  c.qhat = scores[c.rank - 1];
  const double raw = 1.0 - c.qhat;
  c.threshold = std::clamp(raw, kThresholdClip, 1.0 - kThresholdClip);
  c.clipped = c.threshold != raw;
  return c;
}

Calibration calibrate_threshold(const std::vector<Scenario>& calibration, MethodMode mode, double alpha,
                                Backend& backend, const Pipeline& pipeline, const HarnessConfig& cfg) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw InvariantViolation("alpha", "must lie in (0, 0.5)");
  if (!uses_threshold(mode)) {
    throw UsageError("calibration needs a thresholded mode, not " + std::string(to_string(mode)));
  }
  const std::size_t need = std::max(kMinCalibrationScenarios, min_calibration_size(alpha));
  if (calibration.size() < need) throw InsufficientCalibration(calibration.size(), need);
  const auto scored = score_scenarios(calibration, mode, backend, pipeline, cfg);
  std::vector<double> scores;
  for (const auto& s : scored) {
    if (!s.error) scores.push_back(nonconformity(s));
  }
  if (scores.size() < need) throw InsufficientCalibration(scores.size(), need);
  return calibrate_from_scores(std::move(scores), alpha);
}

double empirical_coverage(const std::vector<ScoredScenario>& scored, double threshold) {
  std::size_t n = 0;
  std::size_t covered = 0;
  for (const auto& s : scored) {
    if (s.error) continue;
    ++n;
    const auto set = build_prediction_set(s.set.posterior, s.set.labels(), threshold);
    for (std::size_t i = 0; i < s.is_true.size(); ++i) {
      if (s.is_true[i] && set.contains(s.set.candidates[i].label)) {
        ++covered;
        break;
      }
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(n);
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string threshold_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Shortest round-trip decimal text.
nlohmann::ordered_json number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return nlohmann::ordered_json::parse(buf);
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "threshold,success_rate,help_rate,mean_set_size\n";
  for (const auto& r : report.rows) {
    out << threshold_text(r.threshold) << ',' << fixed(r.success_rate, 6) << ',' << fixed(r.help_rate, 6) << ','
        << fixed(r.mean_set_size, 6) << '\n';
  }
}

std::string summary_json(const SweepReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(report.mode));
  j["auc"] = number(std::round(report.auc_success_vs_help * 1e9) / 1e9);
  j["n"] = report.n_scenarios;
  j["failed"] = report.n_failed;
  return j.dump();
}

std::string trace_json_line(const Scenario& scenario, const ScoredScenario& scored, const Episode& episode,
                            double threshold) {
  nlohmann::ordered_json j;
  j["scenario_id"] = scenario.id;
  j["threshold"] = number(threshold);
  nlohmann::ordered_json posterior = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < scored.set.candidates.size(); ++i) {
    posterior[scored.set.candidates[i].label] = number(scored.set.posterior[i]);
  }
  j["posterior"] = posterior;
  j["set"] = episode.set.members;
  if (const auto* e = std::get_if<Execute>(&episode.decision)) {
    j["decision"] = {{"kind", "execute"}, {"label", e->label}};
  } else {
    j["decision"] = {{"kind", "ask_help"}};
  }
  j["success"] = episode.outcome.success;
  return j.dump();
}

void write_traces(std::ostream& out, const std::vector<Scenario>& scenarios,
                  const std::vector<ScoredScenario>& scored, MethodMode mode, std::span<const double> thresholds,
                  const Pipeline& pipeline) {
  std::vector<double> ts(thresholds.begin(), thresholds.end());
  std::sort(ts.begin(), ts.end());
  for (double t : ts) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      if (scored[i].error) {
        nlohmann::ordered_json j;
        j["scenario_id"] = scenarios[i].id;
        j["threshold"] = number(t);
        j["error"] = *scored[i].error;
        out << j.dump() << '\n';
        continue;
      }
      out << trace_json_line(scenarios[i], scored[i], outcome_at(scenarios[i], scored[i], mode, t, pipeline), t)
          << '\n';
    }
  }
}

}  // namespace lbap
