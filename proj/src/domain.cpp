#include "lbap/domain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

ObjectRef::ObjectRef(std::vector<std::string> attributes, std::string noun)
    : attributes_(std::move(attributes)), noun_(text::collapse_whitespace(noun)) {
  for (auto& a : attributes_) a = text::collapse_whitespace(a);
  std::sort(attributes_.begin(), attributes_.end());
  std::vector<std::string> parts = attributes_;
  parts.push_back(noun_);
  canonical_name_ = text::join(parts, " ");
}

bool Box::valid() const noexcept {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in_unit(x_min) && in_unit(y_min) && in_unit(x_max) && in_unit(y_max) && x_min <= x_max &&
         y_min <= y_max;
}

bool SceneContext::contains(const ObjectRef& o) const {
  return std::find(objects.begin(), objects.end(), o) != objects.end();
}

const Detection* SceneContext::detection_for(const ObjectRef& o) const {
  if (!detections) return nullptr;
  for (const auto& d : *detections) {
    if (d.object == o) return &d;
  }
  return nullptr;
}

void SceneContext::validate() const {
  std::set<std::string> seen;
  for (const auto& o : objects) {
    if (o.canonical_name().empty()) throw InvariantViolation("scene.objects", "empty object name");
    if (!seen.insert(o.canonical_name()).second) {
      throw InvariantViolation("scene.objects", "duplicate object '" + o.canonical_name() + "'");
    }
  }
  if (detections) {
    for (const auto& d : *detections) {
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw InvariantViolation("scene.detections", "score outside [0,1] for " + d.object.canonical_name());
      }
      if (!d.box.valid()) {
        throw InvariantViolation("scene.detections", "invalid box for " + d.object.canonical_name());
      }
    }
  }
}

std::vector<std::string> CandidateSet::labels() const {
  std::vector<std::string> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.label);
  return out;
}

std::size_t CandidateSet::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].label == label) return i;
  }
  return static_cast<std::size_t>(-1);
}

namespace {

void check_distribution(const std::vector<double>& v, const char* field) {
  double sum = 0.0;
  for (double p : v) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvariantViolation(field, "entry outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvariantViolation(field, "does not sum to 1");
}

void check_likelihood(const std::vector<double>& v, const char* field) {
  for (double p : v) {
    if (!(p > 0.0 && p <= 1.0)) throw InvariantViolation(field, "entry outside (0,1]");
  }
}

}  // namespace

void CandidateSet::validate() const {
  const std::size_t n = candidates.size();
  if (n == 0) throw InvariantViolation("candidates", "empty candidate set");
  if (prior.size() != n || scene_lik.size() != n || world_lik.size() != n || posterior.size() != n) {
    throw InvariantViolation("candidates", "vector lengths differ from candidate count");
  }
  std::set<std::string> labels_seen;
  for (const auto& c : candidates) {
    if (c.text.empty()) throw InvariantViolation("candidates.text", "empty action text");
    if (!labels_seen.insert(c.label).second) throw InvariantViolation("candidates.label", "duplicate label " + c.label);
  }
  check_distribution(prior, "prior");
  check_distribution(posterior, "posterior");
  check_likelihood(scene_lik, "scene_lik");
  check_likelihood(world_lik, "world_lik");
}

bool PredictionSet::contains(std::string_view label) const {
  return std::find(members.begin(), members.end(), label) != members.end();
}

namespace {

constexpr std::array<std::pair<Ambiguity, std::string_view>, 11> kAmbiguityNames{{
    {Ambiguity::Attribute, "attribute"},
    {Ambiguity::Numeric, "numeric"},
    {Ambiguity::Spatial, "spatial"},
    {Ambiguity::SingleLabel, "single-label"},
    {Ambiguity::CreativeSingleLabel, "creative-single-label"},
    {Ambiguity::MultiLabel, "multi-label"},
    {Ambiguity::CreativeMultiLabel, "creative-multi-label"},
    {Ambiguity::SpatiallyAmbiguous, "spatially-ambiguous"},
    {Ambiguity::Unsafe, "unsafe"},
    {Ambiguity::Winograd, "winograd"},
    {Ambiguity::None, "none"},
}};

}  // namespace

std::string_view to_string(Ambiguity a) {
  for (const auto& [value, name] : kAmbiguityNames) {
    if (value == a) return name;
  }
  return "none";
}

std::optional<Ambiguity> ambiguity_from_string(std::string_view s) {
  for (const auto& [value, name] : kAmbiguityNames) {
    if (name == s) return value;
  }
  return std::nullopt;
}

void Scenario::validate() const {
  if (id.empty()) throw InvariantViolation("id", "empty scenario id");
  if (instruction.empty()) throw InvariantViolation("instruction", "empty instruction");
  if (true_actions.empty()) throw InvariantViolation("true_actions", "no acceptable actions");
  for (const auto& a : true_actions) {
    if (a.empty()) throw InvariantViolation("true_actions", "empty action string");
  }
  scene.validate();
}

// --- Lexicon ---------------------------------------------------------------

void Lexicon::add_attribute(std::string_view phrase) {
  auto tokens = text::tokenize(phrase);
  if (tokens.empty()) return;
  max_attribute_words_ = std::max(max_attribute_words_, tokens.size());
  for (const auto& t : tokens) known_words_.insert(t);
  attributes_.insert(text::join(tokens, " "));
}

void Lexicon::add_noun(std::string_view phrase) {
  auto tokens = text::tokenize(phrase);
  if (tokens.empty()) return;
  max_noun_words_ = std::max(max_noun_words_, tokens.size());
  for (const auto& t : tokens) known_words_.insert(t);
  nouns_.insert(text::join(tokens, " "));
}

void Lexicon::add_stopword(std::string_view word) { stopwords_.insert(text::to_lower(word)); }

bool Lexicon::is_attribute(std::string_view phrase) const { return attributes_.contains(std::string(phrase)); }
bool Lexicon::is_noun(std::string_view phrase) const { return nouns_.contains(std::string(phrase)); }
bool Lexicon::is_stopword(std::string_view word) const { return stopwords_.contains(std::string(word)); }
bool Lexicon::is_known(std::string_view word) const {
  return known_words_.contains(std::string(word)) || stopwords_.contains(std::string(word));
}

namespace {

std::vector<std::string> singular_forms(const std::string& word) {
  std::vector<std::string> forms;
  if (word.size() > 3 && word.ends_with("ies")) forms.push_back(word.substr(0, word.size() - 3) + "y");
  if (word.size() > 2 && word.ends_with("es")) forms.push_back(word.substr(0, word.size() - 2));
  if (word.size() > 1 && word.ends_with('s') && !word.ends_with("ss")) forms.push_back(word.substr(0, word.size() - 1));
  return forms;
}

}  // namespace

std::optional<Lexicon::Match> Lexicon::match_noun(std::span<const std::string> tokens, std::size_t at) const {
  const std::size_t avail = tokens.size() - std::min(at, tokens.size());
  for (std::size_t len = std::min(max_noun_words_, avail); len >= 1; --len) {
    std::vector<std::string> words(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(at + len));
    std::string phrase = text::join(words, " ");
    if (nouns_.contains(phrase)) return Match{len, phrase};
    const std::string last = words.back();
    for (const auto& singular : singular_forms(last)) {
      words.back() = singular;
      phrase = text::join(words, " ");
      if (nouns_.contains(phrase)) return Match{len, phrase};
    }
  }
  return std::nullopt;
}

std::optional<Lexicon::Match> Lexicon::match_attribute(std::span<const std::string> tokens,
                                                       std::size_t at) const {
  const std::size_t avail = tokens.size() - std::min(at, tokens.size());
  for (std::size_t len = std::min(max_attribute_words_, avail); len >= 1; --len) {
    std::vector<std::string> words(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(at + len));
    std::string phrase = text::join(words, " ");
    if (attributes_.contains(phrase)) return Match{len, phrase};
  }
  return std::nullopt;
}

// --- parse_objects -----------------------------------------------------------

namespace {

struct Phrase {
  std::size_t end = 0;
  std::vector<std::string> attributes;
  std::string noun;
};

class PhraseParser {
public:
  PhraseParser(std::span<const std::string> tokens, const Lexicon& lexicon)
      : tokens_(tokens), lexicon_(lexicon) {}

  // Longest `[attribute]* noun` phrase starting at `at`.
  std::optional<Phrase> parse(std::size_t at, bool allow_unknown_modifier, bool after_attribute) const {
    if (at >= tokens_.size()) return std::nullopt;
    std::optional<Phrase> best;
    auto consider = [&](std::optional<Phrase> p) {
      if (p && (!best || p->end > best->end)) best = std::move(p);
    };

    if (auto noun = lexicon_.match_noun(tokens_, at)) {
      consider(Phrase{at + noun->length, {}, noun->phrase});
    }
    if (auto attr = lexicon_.match_attribute(tokens_, at)) {
      if (auto rest = parse(at + attr->length, false, true)) {
        rest->attributes.insert(rest->attributes.begin(), attr->phrase);
        consider(std::move(rest));
      }
    }
    const std::string& word = tokens_[at];
    const bool unknown = !lexicon_.is_known(word) && !is_number(word);
    if (unknown && allow_unknown_modifier) {
      if (auto noun = lexicon_.match_noun(tokens_, at + 1)) {
        consider(Phrase{at + 1 + noun->length, {word}, noun->phrase});
      }
    }
    if (unknown && after_attribute) consider(Phrase{at + 1, {}, word});
    return best;
  }

private:
  static bool is_number(const std::string& w) {
    return std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
  }

  std::span<const std::string> tokens_;
  const Lexicon& lexicon_;
};

}  // namespace

std::vector<ObjectRef> parse_objects(std::string_view input, const Lexicon& lexicon) {
  const auto tokens = text::tokenize(input);
  PhraseParser parser(tokens, lexicon);
  std::vector<ObjectRef> found;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (auto phrase = parser.parse(i, true, false)) {
      found.emplace_back(std::move(phrase->attributes), std::move(phrase->noun));
      i = phrase->end;
    } else {
      ++i;
    }
  }
  return found;
}

}  // namespace lbap
