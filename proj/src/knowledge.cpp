#include "lbap/knowledge.hpp"

#include <cmath>
#include <sstream>

#include "lbap/errors.hpp"
#include "lbap/prompts.hpp"
#include "lbap/text.hpp"

namespace lbap {

namespace {

const std::string kTrue = "True";
const std::string kFalse = "False";

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

void KnowledgePrompt::validate() const {
  if (!trim(template_text).ends_with("You:")) {
    throw InvariantViolation("knowledge.template", "template must end with \"You:\"");
  }
  if (template_text.find("{action}") == std::string::npos) {
    throw InvariantViolation("knowledge.template", "template lacks an {action} placeholder");
  }
}

KnowledgePrompt parse_knowledge_prompt(std::string_view input, std::string_view source) {
  enum class Section { None, Header, Example, Template } section = Section::None;
  KnowledgePrompt prompt;
  std::string header;
  std::string tmpl;
  std::istringstream in{std::string(input)};
  std::string line;
  std::size_t line_no = 0;
  const std::string src(source);

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with("### ")) {
      const std::string name = trim(line.substr(4));
      if (name == "header") {
        section = Section::Header;
      } else if (name == "example") {
        section = Section::Example;
        prompt.few_shot.emplace_back();
      } else if (name == "template") {
        section = Section::Template;
      } else {
        throw ParseError(src, line_no, "unknown section '" + name + "'");
      }
      continue;
    }
    switch (section) {
      case Section::None:
        if (!trim(line).empty()) throw ParseError(src, line_no, "text before the first section");
        break;
      case Section::Header:
        header += line + "\n";
        break;
      case Section::Template:
        tmpl += line + "\n";
        break;
      case Section::Example: {
        if (trim(line).empty()) break;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw ParseError(src, line_no, "expected 'key: value'");
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        auto& ex = prompt.few_shot.back();
        if (key == "objects") {
          std::istringstream items(value);
          std::string item;
          while (std::getline(items, item, ';')) {
            if (auto t = trim(item); !t.empty()) ex.objects.push_back(t);
          }
        } else if (key == "action") {
          ex.action = value;
        } else if (key == "verdict") {
          if (value != kTrue && value != kFalse) throw ParseError(src, line_no, "verdict must be True or False");
          ex.verdict = value == kTrue;
        } else {
          throw ParseError(src, line_no, "unknown example key '" + key + "'");
        }
        break;
      }
    }
  }
  prompt.header = trim(header);
  prompt.template_text = trim(tmpl);
  for (const auto& ex : prompt.few_shot) {
    if (ex.objects.empty() || ex.action.empty()) throw ParseError(src, line_no, "example needs objects and action");
  }
  prompt.validate();
  return prompt;
}

KnowledgePrompt load_knowledge_prompt(const std::filesystem::path& path) {
  return parse_knowledge_prompt(read_template_file(path), path.string());
}

KnowledgePrompt builtin_knowledge_prompt(std::string_view environment) {
  return parse_knowledge_prompt(builtin_knowledge_prompt_text(environment), std::string(environment) + "_knowledge");
}

std::string describe_objects(const std::vector<ObjectRef>& objects, const Environment& env) {
  std::vector<std::string> phrases;
  phrases.reserve(objects.size());
  for (const auto& o : objects) phrases.push_back(env.surface_phrase(o));
  return oxford_join(phrases);
}

std::string render_knowledge_prompt(const KnowledgePrompt& prompt, const SceneContext& scene,
                                    const CandidateAction& candidate, const Environment& env) {
  if (scene.objects.empty()) throw InvariantViolation("scene.objects", "knowledge prompt needs at least one object");
  if (trim(candidate.text).empty()) throw InvariantViolation("candidate.text", "empty action");

  std::string out;
  if (!prompt.header.empty()) out += fill_placeholders(prompt.header, {{"scene", scene.description}}) + "\n\n";
  for (const auto& ex : prompt.few_shot) {
    std::vector<ObjectRef> objs;
    for (const auto& name : ex.objects) objs.push_back(env.object_from_name(name));
    out += fill_placeholders(prompt.template_text,
                             {{"scene_objects", describe_objects(objs, env)}, {"action", ex.action}});
    out += ex.verdict ? " True\n\n" : " False\n\n";
  }
  out += fill_placeholders(prompt.template_text,
                           {{"scene_objects", describe_objects(scene.objects, env)}, {"action", candidate.text}});
  return out;
}

double true_probability(const BackendResponse& response) {
  const double lp_true = logprob_or_floor(response, kTrue);
  const double lp_false = logprob_or_floor(response, kFalse);
  // two-way softmax, written to stay finite for any pair of logprobs
  return 1.0 / (1.0 + std::exp(lp_false - lp_true));
}

double knowledge_score(const CandidateAction& candidate, const SceneContext& scene,
                       const std::vector<KnowledgePrompt>& prompts, Backend& backend, const Environment& env,
                       const std::string& scenario_id) {
  if (prompts.empty()) throw UsageError("world-knowledge scoring needs at least one prompt");
  double score = 1.0;
  for (const auto& prompt : prompts) {
    BackendQuery q{QueryKind::WorldKnowledge, render_knowledge_prompt(prompt, scene, candidate, env),
                   {kTrue, kFalse}, scenario_id};
    score *= true_probability(backend.query(q));
  }
  return score;
}

}  // namespace lbap
