#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

namespace lbap {

// A physical object named in a scene or an action, e.g. "blue bowl".
// Identity is the canonical name: sorted attributes followed by the noun.
class ObjectRef {
public:
  ObjectRef() = default;
  ObjectRef(std::vector<std::string> attributes, std::string noun);

  [[nodiscard]] const std::string& canonical_name() const noexcept { return canonical_name_; }
  [[nodiscard]] const std::vector<std::string>& attributes() const noexcept { return attributes_; }
  [[nodiscard]] const std::string& noun() const noexcept { return noun_; }

  friend bool operator==(const ObjectRef& a, const ObjectRef& b) noexcept {
    return a.canonical_name_ == b.canonical_name_;
  }
  friend std::strong_ordering operator<=>(const ObjectRef& a, const ObjectRef& b) noexcept {
    return a.canonical_name_ <=> b.canonical_name_;
  }

private:
  std::string canonical_name_;
  std::vector<std::string> attributes_;
  std::string noun_;
};

// Normalized axis-aligned box in [0,1]^2.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  [[nodiscard]] double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
  [[nodiscard]] bool valid() const noexcept;
};

struct Detection {
  ObjectRef object;
  Box box;
  double score = 0.0;
};

struct SceneContext {
  std::vector<ObjectRef> objects;  // the found-object set, insertion ordered
  std::string description;
  std::optional<std::vector<Detection>> detections;

  [[nodiscard]] bool contains(const ObjectRef& o) const;
  [[nodiscard]] const Detection* detection_for(const ObjectRef& o) const;
  // Throws InvariantViolation.
  void validate() const;
};

struct CandidateAction {
  std::string label;
  std::string text;
  std::vector<ObjectRef> mentioned_objects;
};

struct CandidateSet {
  std::vector<CandidateAction> candidates;
  std::vector<double> prior;
  std::vector<double> scene_lik;
  std::vector<double> world_lik;
  std::vector<double> posterior;

  [[nodiscard]] std::vector<std::string> labels() const;
  [[nodiscard]] std::size_t index_of(std::string_view label) const;  // npos when absent
  void validate() const;
};

struct PredictionSet {
  std::vector<std::string> members;
  double threshold = 0.5;
  bool fallback = false;  // true when no option cleared the threshold

  [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
  [[nodiscard]] bool contains(std::string_view label) const;
};

struct Execute {
  std::string label;
};

struct AskHelp {
  PredictionSet set;
};

using Decision = std::variant<Execute, AskHelp>;

enum class Ambiguity {
  Attribute,
  Numeric,
  Spatial,
  SingleLabel,
  CreativeSingleLabel,
  MultiLabel,
  CreativeMultiLabel,
  SpatiallyAmbiguous,
  Unsafe,
  Winograd,
  None,
};

std::string_view to_string(Ambiguity a);
std::optional<Ambiguity> ambiguity_from_string(std::string_view s);

struct Scenario {
  std::string id;
  SceneContext scene;
  std::string instruction;
  Ambiguity ambiguity = Ambiguity::None;
  std::vector<std::string> true_actions;  // canonical action strings

  void validate() const;
};

// Closed attribute/noun vocabulary driving object parsing. Phrases may span
// several words ("rice chips", "grass-colored").
class Lexicon {
public:
  void add_attribute(std::string_view phrase);
  void add_noun(std::string_view phrase);
  void add_stopword(std::string_view word);

  [[nodiscard]] bool is_attribute(std::string_view phrase) const;
  [[nodiscard]] bool is_noun(std::string_view phrase) const;
  [[nodiscard]] bool is_stopword(std::string_view word) const;
  [[nodiscard]] bool is_known(std::string_view word) const;

  struct Match {
    std::size_t length = 0;  // tokens consumed
    std::string phrase;      // singular, space-joined
  };

  [[nodiscard]] std::optional<Match> match_noun(std::span<const std::string> tokens, std::size_t at) const;
  [[nodiscard]] std::optional<Match> match_attribute(std::span<const std::string> tokens,
                                                     std::size_t at) const;

private:
  std::unordered_set<std::string> attributes_;
  std::unordered_set<std::string> nouns_;
  std::unordered_set<std::string> stopwords_;
  std::unordered_set<std::string> known_words_;
  std::size_t max_attribute_words_ = 1;
  std::size_t max_noun_words_ = 1;
};

// Every maximal `[attribute]* noun` phrase in `text`, left to right.
// An unknown modifier directly before a lexicon noun, or an unknown head word
// right after lexicon attributes, still forms a phrase: such phrases are the
// usual shape of hallucinated objects and are judged later by set membership.
std::vector<ObjectRef> parse_objects(std::string_view text, const Lexicon& lexicon);

}  // namespace lbap
