#include "lbap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "lbap/errors.hpp"
#include "lbap/scenarios.hpp"
#include "lbap/text.hpp"

namespace lbap {

namespace {

void check_unit(double v, const char* field, bool open = false) {
  const bool ok = open ? (v > 0.0 && v < 1.0) : (v >= 0.0 && v <= 1.0);
  if (!ok || !std::isfinite(v)) throw InvariantViolation(field, open ? "must lie in (0,1)" : "must lie in [0,1]");
}

void check_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvariantViolation(field, "must be positive");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double standard_normal(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

double beta_sample(std::uint64_t seed, double mean, double concentration) {
  std::mt19937_64 rng(seed);
  const double x = std::gamma_distribution<double>(mean * concentration, 1.0)(rng);
  const double y = std::gamma_distribution<double>((1.0 - mean) * concentration, 1.0)(rng);
  return std::clamp(x / (x + y), 1e-4, 1.0 - 1e-4);
}

// Replaces the first word-aligned occurrence of `from` (its last word possibly
// pluralized) with `to`, carrying the plural suffix over.
std::optional<std::string> replace_object(const std::string& text, const ObjectRef& from, const std::string& to) {
  auto tokens = text::tokenize(text);
  const auto needle = text::tokenize(from.canonical_name());
  if (needle.empty() || tokens.size() < needle.size()) return std::nullopt;
  for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
    bool match = true;
    std::string suffix;
    for (std::size_t k = 0; k < needle.size() && match; ++k) {
      const auto& tok = tokens[i + k];
      if (tok == needle[k]) continue;
      if (k + 1 == needle.size()) {
        for (const char* s : {"s", "es"}) {
          if (tok == needle[k] + s) {
            suffix = s;
            break;
          }
        }
        match = !suffix.empty();
      } else {
        match = false;
      }
    }
    if (!match) continue;
    std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
    auto replacement = text::tokenize(to);
    if (!replacement.empty()) replacement.back() += suffix;
    out.insert(out.end(), replacement.begin(), replacement.end());
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i + needle.size()), tokens.end());
    return text::join(out, " ");
  }
  return std::nullopt;
}

}  // namespace

void SyntheticProfile::validate() const {
  if (options == 0 || options > 25) throw InvariantViolation("options", "must lie in [1,25]");
  check_unit(hallucination_rate, "hallucination_rate");
  check_unit(infeasible_rate, "infeasible_rate");
  check_unit(miss_rate, "miss_rate");
  check_unit(true_mass, "true_mass", true);
  if (!(true_mass_spread >= 0.0)) throw InvariantViolation("true_mass_spread", "must be non-negative");
  if (!(option_noise >= 0.0)) throw InvariantViolation("option_noise", "must be non-negative");
  check_positive(hallucination_weight, "hallucination_weight");
  check_positive(infeasible_weight, "infeasible_weight");
  check_positive(wrong_weight, "wrong_weight");
  check_positive(not_listed_weight, "not_listed_weight");
  check_unit(knowledge_true, "knowledge_true", true);
  check_unit(knowledge_wrong, "knowledge_wrong", true);
  check_unit(knowledge_hallucinated, "knowledge_hallucinated", true);
  check_unit(knowledge_infeasible, "knowledge_infeasible", true);
  check_positive(knowledge_concentration, "knowledge_concentration");
}

std::string_view to_string(OptionClass c) {
  switch (c) {
    case OptionClass::True: return "true";
    case OptionClass::Wrong: return "wrong";
    case OptionClass::Infeasible: return "infeasible";
    case OptionClass::Hallucinated: return "hallucinated";
    case OptionClass::NotListed: return "not-listed";
  }
  return "?";
}

SyntheticBackend::SyntheticBackend(SyntheticProfile profile, Environment env, const std::vector<Scenario>& scenarios)
    : profile_(profile), env_(std::move(env)) {
  profile_.validate();
  for (const auto& s : scenarios) {
    if (!scenarios_.emplace(s.id, s).second) throw InvariantViolation("id", "duplicate scenario id '" + s.id + "'");
  }
}

std::uint64_t SyntheticBackend::stream(const Scenario& s, std::string_view purpose, std::string_view item) const {
  std::string key = s.id;
  key += '\x1f';
  key += purpose;
  key += '\x1f';
  key += item;
  return text::mix(profile_.seed, text::fnv1a(key));
}

OptionClass SyntheticBackend::classify(const Scenario& scenario, std::string_view option_text) const {
  const std::string lowered = text::collapse_whitespace(option_text);
  if (lowered.find("not listed") != std::string::npos) return OptionClass::NotListed;
  if (is_true_action(scenario, option_text, env_)) return OptionClass::True;
  const auto mentioned = env_.mentions(option_text);
  for (const auto& o : mentioned) {
    if (!scenario.scene.contains(o)) return OptionClass::Hallucinated;
  }
  std::set<ObjectRef> distinct(mentioned.begin(), mentioned.end());
  if (distinct.size() < mentioned.size()) return OptionClass::Infeasible;
  return OptionClass::Wrong;
}

std::vector<PlannedOption> SyntheticBackend::plan(const Scenario& s) const {
  std::mt19937_64 rng(stream(s, "generate"));
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  auto uniform = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::vector<std::string> truths;
  for (const auto& t : s.true_actions) truths.push_back(env_.canonical_action(t));
  std::shuffle(truths.begin(), truths.end(), rng);

  const std::size_t slots = profile_.options;
  const auto hallucinated =
      static_cast<std::size_t>(std::binomial_distribution<int>(static_cast<int>(slots), profile_.hallucination_rate)(rng));
  const std::size_t free = slots - hallucinated;
  std::size_t n_true = 0;
  if (free > 0 && !chance(profile_.miss_rate)) {
    n_true = 1 + uniform(std::min(truths.size(), free));
  }
  const bool infeasible = free > n_true && chance(profile_.infeasible_rate);

  std::vector<PlannedOption> out;
  std::set<std::string> used;
  auto accept = [&](const std::string& candidate, OptionClass want) {
    if (candidate.empty() || used.contains(candidate) || classify(s, candidate) != want) return false;
    used.insert(candidate);
    out.push_back({candidate, want});
    return true;
  };

  for (std::size_t i = 0; i < n_true; ++i) accept(truths[i], OptionClass::True);

  std::vector<ObjectRef> pool;
  for (const auto& name : env_.hallucination_pool) {
    auto o = env_.object_from_name(name);
    if (!s.scene.contains(o)) pool.push_back(o);
  }
  const auto& scene_objects = s.scene.objects;

  for (std::size_t k = 0; k < hallucinated && !pool.empty(); ++k) {
    bool done = false;
    for (int attempt = 0; attempt < 24 && !done; ++attempt) {
      const auto& base = truths[uniform(truths.size())];
      const auto mentioned = env_.mentions(base);
      const auto& substitute = pool[uniform(pool.size())];
      if (mentioned.empty()) break;
      const auto replaced = replace_object(base, mentioned[uniform(mentioned.size())], substitute.canonical_name());
      done = replaced && accept(*replaced, OptionClass::Hallucinated);
    }
    for (std::size_t offset = uniform(pool.size()), i = 0; i < pool.size() && !done; ++i) {
      done = accept("pick up " + pool[(offset + i) % pool.size()].canonical_name(), OptionClass::Hallucinated);
    }
  }

  std::size_t wrong = free - n_true;
  if (infeasible) {
    for (const auto& base : truths) {
      const auto mentioned = env_.mentions(base);
      if (mentioned.size() < 2 || mentioned.front() == mentioned.back()) continue;
      const auto replaced = replace_object(base, mentioned.back(), mentioned.front().canonical_name());
      if (replaced && accept(*replaced, OptionClass::Infeasible)) {
        --wrong;
        break;
      }
    }
  }

  for (std::size_t k = 0; k < wrong && !scene_objects.empty(); ++k) {
    bool done = false;
    for (int attempt = 0; attempt < 24 && !done; ++attempt) {
      const auto& base = truths[uniform(truths.size())];
      const auto mentioned = env_.mentions(base);
      if (mentioned.empty()) break;
      const auto& from = mentioned[uniform(mentioned.size())];
      const auto& to = scene_objects[uniform(scene_objects.size())];
      if (to == from) continue;
      const auto replaced = replace_object(base, from, to.canonical_name());
      done = replaced && accept(*replaced, OptionClass::Wrong);
    }
    for (std::size_t offset = uniform(scene_objects.size()), i = 0; i < scene_objects.size() && !done; ++i) {
      done = accept("pick up " + scene_objects[(offset + i) % scene_objects.size()].canonical_name(),
                    OptionClass::Wrong);
    }
  }

  if (out.empty()) accept(truths.front(), OptionClass::True);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<double> SyntheticBackend::prior_for(const Scenario& s, const std::vector<std::string>& texts) const {
  const std::size_t n = texts.size();
  std::vector<OptionClass> cls(n);
  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = classify(s, texts[i]);
    noise[i] = std::exp(profile_.option_noise * standard_normal(stream(s, "prior", env_.canonical_action(texts[i]))));
  }
  const double logit = std::log(profile_.true_mass / (1.0 - profile_.true_mass));
  const double mass = sigmoid(logit + profile_.true_mass_spread * standard_normal(stream(s, "mass")));

  std::vector<double> p(n, 0.0);
  double sum_true = 0.0;
  double sum_false = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = noise[i];
    switch (cls[i]) {
      case OptionClass::True: sum_true += w; p[i] = w; continue;
      case OptionClass::Wrong: w *= profile_.wrong_weight; break;
      case OptionClass::Infeasible: w *= profile_.infeasible_weight; break;
      case OptionClass::Hallucinated: w *= profile_.hallucination_weight; break;
      case OptionClass::NotListed: continue;
    }
    p[i] = w;
    sum_false += w;
  }
  const double true_share = sum_true == 0.0 ? 0.0 : (sum_false == 0.0 ? 1.0 : mass);
  double listed = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] == OptionClass::NotListed) continue;
    p[i] = cls[i] == OptionClass::True ? true_share * p[i] / sum_true : (1.0 - true_share) * p[i] / sum_false;
    listed += p[i];
  }
  double not_listed_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] != OptionClass::NotListed) continue;
    p[i] = profile_.not_listed_weight * noise[i];
    not_listed_total += p[i];
  }
  if (listed == 0.0) {
    for (auto& v : p) v /= not_listed_total;
    return p;
  }
  const double scale = not_listed_total > 0.5 ? 0.5 / not_listed_total : 1.0;
  const double rest = 1.0 - not_listed_total * scale;
  for (std::size_t i = 0; i < n; ++i) p[i] = cls[i] == OptionClass::NotListed ? p[i] * scale : p[i] * rest / listed;
  return p;
}

const Scenario& SyntheticBackend::scenario_for(const BackendQuery& q) const {
  auto it = scenarios_.find(q.scenario_id);
  if (it == scenarios_.end()) {
    throw Error(Error::Category::Backend, "synthetic backend: unknown scenario '" + q.scenario_id + "'");
  }
  return it->second;
}

std::map<std::string, std::string> SyntheticBackend::options_in_prompt(const BackendQuery& q) const {
  static const std::regex kLine(R"(^\s*([A-Z])\)\s+(.*\S)\s*$)");
  std::map<std::string, std::string> out;
  std::istringstream in(q.prompt);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, kLine)) out[m[1].str()] = m[2].str();
  }
  return out;
}

BackendResponse SyntheticBackend::generate(const Scenario& s) const {
  const auto options = plan(s);
  std::string completion;
  for (std::size_t i = 0; i < options.size(); ++i) {
    completion += '\n';
    completion += static_cast<char>('A' + i);
    completion += ") " + options[i].text;
  }
  return {completion, {}};
}

BackendResponse SyntheticBackend::score(const Scenario& s, const BackendQuery& q) const {
  const auto found = options_in_prompt(q);
  std::vector<std::string> texts;
  for (const auto& label : q.answer_tokens) {
    auto it = found.find(label);
    texts.push_back(it == found.end() ? std::string() : it->second);
  }
  const auto p = prior_for(s, texts);
  BackendResponse r;
  double best = -1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (texts[i].empty()) continue;
    r.token_logprobs[q.answer_tokens[i]] = std::min(0.0, std::log(p[i]));
    if (p[i] > best) {
      best = p[i];
      r.text = q.answer_tokens[i];
    }
  }
  return r;
}

BackendResponse SyntheticBackend::knowledge(const Scenario& s, const BackendQuery& q) const {
  std::string action;
  std::size_t where = 0;
  std::vector<std::string> known;
  for (const auto& o : plan(s)) known.push_back(o.text);
  for (const auto& t : s.true_actions) known.push_back(env_.canonical_action(t));
  for (const auto& t : known) {
    const auto pos = q.prompt.rfind(t);
    if (pos == std::string::npos) continue;
    if (action.empty() || pos > where || (pos == where && t.size() > action.size())) {
      action = t;
      where = pos;
    }
  }
  double p = 0.5;
  if (!action.empty()) {
    double mean = profile_.knowledge_wrong;
    switch (classify(s, action)) {
      case OptionClass::True: mean = profile_.knowledge_true; break;
      case OptionClass::Hallucinated: mean = profile_.knowledge_hallucinated; break;
      case OptionClass::Infeasible: mean = profile_.knowledge_infeasible; break;
      default: break;
    }
    p = beta_sample(stream(s, "knowledge", text::hex64(text::fnv1a(q.prompt))), mean,
                    profile_.knowledge_concentration);
  }
  BackendResponse r;
  r.text = p >= 0.5 ? "True" : "False";
  for (const auto& token : q.answer_tokens) {
    if (token == "True") r.token_logprobs[token] = std::log(p);
    if (token == "False") r.token_logprobs[token] = std::log1p(-p);
  }
  return r;
}

BackendResponse SyntheticBackend::prompt_set(const Scenario& s, const BackendQuery& q) const {
  const auto found = options_in_prompt(q);
  std::vector<std::string> labels;
  std::vector<std::string> texts;
  for (const auto& [label, t] : found) {
    labels.push_back(label);
    texts.push_back(t);
  }
  if (labels.empty()) return {" []", {}};
  const auto p = prior_for(s, texts);
  std::vector<std::string> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double include = 0.3;
    switch (classify(s, texts[i])) {
      case OptionClass::True: include = 0.85; break;
      case OptionClass::Hallucinated: include = 0.5; break;
      case OptionClass::Infeasible: include = 0.15; break;
      case OptionClass::NotListed: include = 0.05; break;
      default: break;
    }
    std::mt19937_64 rng(stream(s, "prompt_set", env_.canonical_action(texts[i])));
    if (std::bernoulli_distribution(include)(rng)) members.push_back(labels[i]);
  }
  if (members.empty()) {
    members.push_back(labels[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())]);
  }
  return {" [" + text::join(members, ", ") + "]", {}};
}

BackendResponse SyntheticBackend::binary(const Scenario& s, const BackendQuery& q) const {
  const auto found = options_in_prompt(q);
  std::vector<std::string> texts;
  for (const auto& [label, t] : found) texts.push_back(t);
  double top = 1.0;
  if (!texts.empty()) {
    const auto p = prior_for(s, texts);
    top = *std::max_element(p.begin(), p.end());
  }
  const double certain = std::clamp(sigmoid(8.0 * (top - 0.55)), 1e-6, 1.0 - 1e-6);
  BackendResponse r;
  r.text = certain >= 0.5 ? " Certain" : " Uncertain";
  for (const auto& token : q.answer_tokens) {
    if (token == "Certain") r.token_logprobs[token] = std::log(certain);
    if (token == "Uncertain") r.token_logprobs[token] = std::log1p(-certain);
  }
  return r;
}

BackendResponse SyntheticBackend::query(const BackendQuery& q) {
  q.validate();
  const Scenario& s = scenario_for(q);
  switch (q.kind) {
    case QueryKind::GenerateCandidates: return generate(s);
    case QueryKind::ScoreMCQA: return score(s, q);
    case QueryKind::WorldKnowledge: return knowledge(s, q);
    case QueryKind::PromptSet: return prompt_set(s, q);
    case QueryKind::BinaryCertainty: return binary(s, q);
  }
  throw Error(Error::Category::Internal, "unhandled query kind");
}

}  // namespace lbap
