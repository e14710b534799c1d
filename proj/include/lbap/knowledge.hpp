#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lbap/backend.hpp"
#include "lbap/domain.hpp"
#include "lbap/environment.hpp"

namespace lbap {

// A "possible and safe" style verification prompt. `template_text` carries
// `{scene_objects}` and `{action}` and ends with "You:" so the next token is
// the verdict; the header may use `{scene}`.
struct KnowledgePrompt {
  struct Exemplar {
    std::vector<std::string> objects;
    std::string action;
    bool verdict = true;
  };

  std::string header;
  std::vector<Exemplar> few_shot;
  std::string template_text;

  void validate() const;
};

// Sections are introduced by lines "### header", "### example" and
// "### template". Example sections hold "objects: a; b; c", "action: ..."
// and "verdict: True|False" lines.
KnowledgePrompt parse_knowledge_prompt(std::string_view text, std::string_view source = "<prompt>");
KnowledgePrompt load_knowledge_prompt(const std::filesystem::path& path);
KnowledgePrompt builtin_knowledge_prompt(std::string_view environment);

// Comma-joined object list with determiners and an Oxford "and".
std::string describe_objects(const std::vector<ObjectRef>& objects, const Environment& env);

std::string render_knowledge_prompt(const KnowledgePrompt& prompt, const SceneContext& scene,
                                    const CandidateAction& candidate, const Environment& env);

// Probability of "True" renormalized over the two verdict tokens, with the
// missing-token floor applied to each.
double true_probability(const BackendResponse& response);

// Product over prompts of the renormalized "True" probability.
double knowledge_score(const CandidateAction& candidate, const SceneContext& scene,
                       const std::vector<KnowledgePrompt>& prompts, Backend& backend, const Environment& env,
                       const std::string& scenario_id = {});

}  // namespace lbap
