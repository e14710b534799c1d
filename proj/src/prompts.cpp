#include "lbap/prompts.hpp"

#include <fstream>
#include <sstream>

#include "lbap/errors.hpp"
#include "lbap_embedded_prompts.hpp"

namespace lbap {

namespace {

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

std::string shipped(std::string_view environment, std::string_view kind) {
  const std::string key = std::string(environment) + "_" + std::string(kind);
  for (const auto& [name, content] : lbap::embedded::kPrompts) {
    if (name == key) return rstrip(std::string(content));
  }
  throw UsageError("no shipped prompt '" + key + "' (environment must be tabletop or mobile)");
}

}  // namespace

PromptTemplates builtin_templates(std::string_view environment) {
  return PromptTemplates{shipped(environment, "generation"), shipped(environment, "scoring"),
                         shipped(environment, "prompt_set"), shipped(environment, "binary")};
}

std::string builtin_knowledge_prompt_text(std::string_view environment) {
  return shipped(environment, "knowledge");
}

std::string read_template_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Error::Category::Data, "cannot read template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return rstrip(ss.str());
}

std::string fill_placeholders(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string key(tmpl.substr(i + 1, close - i - 1));
        if (auto it = values.find(key); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace lbap
