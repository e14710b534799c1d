#include "lbap/mcqa.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

std::vector<std::string> option_labels(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.emplace_back(1, static_cast<char>('A' + i));
  return labels;
}

std::string render_generation_prompt(const PromptTemplates& templates, const Scenario& scenario) {
  return fill_placeholders(templates.generation,
                           {{"scene", scenario.scene.description}, {"instruction", scenario.instruction}});
}

std::string render_options(const std::vector<CandidateAction>& candidates) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) out += '\n';
    out += candidates[i].label + ") " + candidates[i].text;
  }
  return out;
}

McqaPromptBundle build_prompt_bundle(const PromptTemplates& templates, const Scenario& scenario,
                                     const std::vector<CandidateAction>& candidates) {
  McqaPromptBundle bundle;
  bundle.generation_prompt = render_generation_prompt(templates, scenario);
  bundle.scoring_prompt = fill_placeholders(templates.scoring, {{"scene", scenario.scene.description},
                                                                {"instruction", scenario.instruction},
                                                                {"options", render_options(candidates)}});
  for (const auto& c : candidates) bundle.option_labels.push_back(c.label);
  return bundle;
}

std::vector<std::string> parse_option_lines(std::string_view completion) {
  static const std::regex kOption(R"(^\s*(?:[A-Za-z]|\d{1,2})\s*[\).:]\s*(.*\S)\s*$)");
  std::vector<std::string> texts;
  std::set<std::string> seen;
  std::istringstream in{std::string(completion)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, kOption)) continue;
    std::string option = m[1].str();
    if (!seen.insert(text::collapse_whitespace(option)).second) continue;
    texts.push_back(std::move(option));
  }
  return texts;
}

bool is_not_listed(const CandidateAction& c, const McqaConfig& cfg) {
  return text::collapse_whitespace(c.text) == text::collapse_whitespace(cfg.not_listed_text);
}

std::vector<CandidateAction> make_candidates(const std::vector<std::string>& texts, const Environment& env,
                                             const McqaConfig& cfg) {
  const std::string not_listed = text::collapse_whitespace(cfg.not_listed_text);
  std::vector<std::string> kept;
  for (const auto& t : texts) {
    if (kept.size() >= cfg.max_options) break;
    if (text::collapse_whitespace(t) == not_listed) continue;
    kept.push_back(t);
  }
  if (kept.empty()) throw EmptyGeneration("completion contained no parseable options");
  if (cfg.include_not_listed) kept.push_back(cfg.not_listed_text);

  const auto labels = option_labels(kept.size());
  std::vector<CandidateAction> out;
  out.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    CandidateAction c{labels[i], kept[i], {}};
    const bool synthetic_option = cfg.include_not_listed && i + 1 == kept.size();
    if (!synthetic_option) c.mentioned_objects = env.mentions(c.text);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CandidateAction> generate_candidates(const Scenario& scenario, Backend& backend,
                                                 const PromptTemplates& templates, const Environment& env,
                                                 const McqaConfig& cfg) {
  BackendQuery q{QueryKind::GenerateCandidates, render_generation_prompt(templates, scenario), {}, scenario.id};
  const auto response = backend.query(q);
  try {
    return make_candidates(parse_option_lines(response.text), env, cfg);
  } catch (const EmptyGeneration&) {
    throw EmptyGeneration("scenario " + scenario.id + ": completion contained no parseable options");
  }
}

std::vector<double> prior_from_logprobs(const std::vector<std::string>& labels, const BackendResponse& response) {
  if (labels.empty()) throw NoLabelMass("no option labels");
  bool any = false;
  std::vector<double> lp;
  lp.reserve(labels.size());
  for (const auto& label : labels) {
    any = any || response.token_logprobs.contains(label);
    lp.push_back(logprob_or_floor(response, label));
  }
  if (!any) throw NoLabelMass("none of the option labels appears in the response");
  const double peak = *std::max_element(lp.begin(), lp.end());
  double total = 0.0;
  for (auto& v : lp) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : lp) v /= total;
  return lp;
}

std::vector<double> score_prior(const McqaPromptBundle& bundle, const Scenario& scenario, Backend& backend) {
  BackendQuery q{QueryKind::ScoreMCQA, bundle.scoring_prompt, bundle.option_labels, scenario.id};
  return prior_from_logprobs(bundle.option_labels, backend.query(q));
}

}  // namespace lbap
