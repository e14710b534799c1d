#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lbap/domain.hpp"
#include "lbap/environment.hpp"
#include "lbap/mcqa.hpp"

namespace lbap {

// Template space of the tabletop rearrangement task and its ambiguity tables.
struct TabletopSpec {
  std::vector<std::string> verbs{"put", "place", "move"};
  std::vector<std::string> object_kinds{"block", "bowl"};
  std::vector<std::string> relations{"on", "to the left of", "to the right of", "to the front of", "at the back of"};
  std::vector<std::string> colors{"red", "yellow", "green"};

  // attribute ambiguity: noun and color substitutes
  std::vector<std::string> block_terms{"cube", "cuboid", "box", "square object"};
  std::vector<std::string> bowl_terms{"container", "round object", "receptacle"};
  std::vector<std::string> either_terms{"object", "item", "thing"};
  std::map<std::string, std::vector<std::string>> color_terms{
      {"blue", {"cyan", "navy"}}, {"green", {"greenish", "grass-colored"}}, {"yellow", {"orange", "gold"}}};

  // numeric ambiguity: each term stands for two or three blocks
  std::vector<std::string> numeric_terms{"a few", "a couple of", "some", "a handful of"};

  // spatial ambiguity: term -> the concrete relations it may mean
  std::vector<std::pair<std::string, std::vector<std::string>>> spatial_terms{
      {"near", {"to the left of", "to the right of", "to the front of", "at the back of"}},
      {"close to", {"to the left of", "to the right of", "to the front of", "at the back of"}},
      {"beside", {"to the left of", "to the right of", "to the front of", "at the back of"}},
      {"next to", {"to the left of", "to the right of", "to the front of", "at the back of"}},
      {"lateral to", {"to the left of", "to the right of"}},
      {"along the line of sight", {"to the front of", "at the back of"}},
  };

  void validate() const;
};

// Structured config file (JSON object whose keys mirror TabletopSpec's
// fields; absent keys keep their defaults).
TabletopSpec load_tabletop_spec(const std::filesystem::path& path);

// One realizable ambiguity case: its type and the ambiguous term used.
struct AmbiguityCase {
  Ambiguity type = Ambiguity::Attribute;
  std::string term;
  std::string detail;  // attribute cases: "block", "bowl", "either" or the color the term refers to

  friend bool operator==(const AmbiguityCase&, const AmbiguityCase&) = default;
};

// Every case a TabletopSpec can realize, grouped by type in a fixed order.
std::vector<AmbiguityCase> enumerate_cases(const TabletopSpec& spec, Ambiguity type);

struct TabletopSample {
  Scenario scenario;
  AmbiguityCase ambiguity_case;
};

// Uniform over {attribute, numeric, spatial}, then uniform over that type's
// cases, then uniform over the remaining template slots.
std::vector<TabletopSample> generate_tabletop_samples(std::size_t n, std::uint64_t seed, const TabletopSpec& spec);
std::vector<Scenario> generate_tabletop(std::size_t n, std::uint64_t seed, const TabletopSpec& spec);

// JSONL with keys {id, scene:{objects, description}, instruction, ambiguity,
// true_actions}. Throws ParseError (with line) or InvariantViolation.
std::vector<Scenario> load_scenarios(const std::filesystem::path& path, const Environment& env);
std::vector<Scenario> parse_scenarios(std::istream& in, const Environment& env, const std::string& source);
void save_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& scenarios);
std::string scenario_to_json_line(const Scenario& scenario);

struct EpisodeOutcome {
  bool success = false;
  bool asked_help = false;
  std::size_t set_size = 1;
};

// Help episodes succeed when a member of the prediction set is a true action
// (a simulated user picks it). Executing the not-listed option counts as a
// help request over the full menu.
EpisodeOutcome judge(const Scenario& scenario, const Decision& decision,
                     const std::vector<CandidateAction>& candidates, const Environment& env,
                     const McqaConfig& mcqa = {});

// Whether a candidate text matches one of the scenario's true actions after
// canonicalization.
bool is_true_action(const Scenario& scenario, std::string_view action_text, const Environment& env);

}  // namespace lbap
