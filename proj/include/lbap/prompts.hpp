#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace lbap {

// The four MCQA-side prompt templates of one environment. Placeholders are
// `{scene}`, `{instruction}` and `{options}`.
struct PromptTemplates {
  std::string generation;
  std::string scoring;
  std::string prompt_set;
  std::string binary;
};

// Templates shipped for "tabletop" and "mobile"; throws UsageError otherwise.
PromptTemplates builtin_templates(std::string_view environment);

// Raw text of a shipped knowledge prompt file for the environment.
std::string builtin_knowledge_prompt_text(std::string_view environment);

// Reads a UTF-8 template file, dropping trailing whitespace.
std::string read_template_file(const std::filesystem::path& path);

// Replaces each `{key}` with its value; unknown placeholders are left as is.
std::string fill_placeholders(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace lbap
