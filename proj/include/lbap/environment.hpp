#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lbap/domain.hpp"

namespace lbap {

// Phrase-level rewrite table applied to action text before object parsing and
// truth matching ("cube" -> "block", "navy" -> "blue", "place" -> "put").
class SynonymTable {
public:
  void add(std::string_view phrase, std::string_view replacement);

  // Tokenizes, rewrites longest-first, and rejoins with single spaces.
  // A plural "-s" on the final word of a phrase is carried to the replacement.
  [[nodiscard]] std::string apply(std::string_view text) const;
  [[nodiscard]] std::vector<std::string> apply_tokens(const std::vector<std::string>& tokens) const;

  [[nodiscard]] std::size_t size() const noexcept { return table_.size(); }

private:
  std::map<std::string, std::vector<std::string>> table_;
  std::size_t max_words_ = 1;
};

// Vocabulary of one deployment setting: object lexicon, synonym table and the
// surface phrases used when listing objects in prompts.
struct Environment {
  std::string name;
  Lexicon lexicon;
  SynonymTable synonyms;
  std::map<std::string, std::string> surface_forms;  // canonical name -> "a bag of rice chips"
  std::string setting_phrase;                         // "On the counter"
  bool include_not_listed = false;
  std::vector<std::string> hallucination_pool;        // plausible objects absent from most scenes

  // Objects mentioned in free text, after synonym rewriting.
  [[nodiscard]] std::vector<ObjectRef> mentions(std::string_view text) const;

  // Lowercase, synonym-normalized, articles removed, single spaced.
  [[nodiscard]] std::string canonical_action(std::string_view text) const;

  // Parses one scene-object name into an ObjectRef; unknown names become a
  // bare noun so that every listed object is representable.
  [[nodiscard]] ObjectRef object_from_name(std::string_view name) const;

  // Determiner + display name: "an apple", "a bag of rice chips", "a RedBull".
  [[nodiscard]] std::string surface_phrase(const ObjectRef& object) const;
};

Environment tabletop_environment();
Environment mobile_environment();

// "tabletop" or "mobile"; throws UsageError otherwise.
Environment environment_by_name(std::string_view name);

// "x", "x and y", "x, y, and z".
std::string oxford_join(const std::vector<std::string>& items);

}  // namespace lbap
