#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lbap/backend.hpp"
#include "lbap/domain.hpp"
#include "lbap/environment.hpp"
#include "lbap/prompts.hpp"

namespace lbap {

struct McqaConfig {
  std::size_t max_options = 4;
  bool include_not_listed = false;
  std::string not_listed_text = "an option not listed here";
};

struct McqaPromptBundle {
  std::string generation_prompt;
  std::string scoring_prompt;
  std::vector<std::string> option_labels;
};

// "A", "B", ... for the first `n` options.
std::vector<std::string> option_labels(std::size_t n);

std::string render_generation_prompt(const PromptTemplates& templates, const Scenario& scenario);

// One "X) text" line per candidate, in label order.
std::string render_options(const std::vector<CandidateAction>& candidates);

McqaPromptBundle build_prompt_bundle(const PromptTemplates& templates, const Scenario& scenario,
                                     const std::vector<CandidateAction>& candidates);

// Option texts from a lettered/numbered completion, deduplicated on
// lowercase whitespace-collapsed text, in order of first appearance.
std::vector<std::string> parse_option_lines(std::string_view completion);

// Labels and object mentions for option texts; caps at max_options and
// optionally appends the not-listed option. Throws EmptyGeneration.
std::vector<CandidateAction> make_candidates(const std::vector<std::string>& texts, const Environment& env,
                                             const McqaConfig& cfg);

std::vector<CandidateAction> generate_candidates(const Scenario& scenario, Backend& backend,
                                                 const PromptTemplates& templates, const Environment& env,
                                                 const McqaConfig& cfg);

// Softmax over the labels' next-token log-probabilities; labels absent from
// the response get kMissingTokenLogprob. Throws NoLabelMass when none of the
// labels is present.
std::vector<double> prior_from_logprobs(const std::vector<std::string>& labels, const BackendResponse& response);

std::vector<double> score_prior(const McqaPromptBundle& bundle, const Scenario& scenario, Backend& backend);

[[nodiscard]] bool is_not_listed(const CandidateAction& c, const McqaConfig& cfg);

}  // namespace lbap
