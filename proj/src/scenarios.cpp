#include "lbap/scenarios.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

void TabletopSpec::validate() const {
  auto non_empty = [](const auto& v, const char* field) {
    if (v.empty()) throw InvariantViolation(field, "must not be empty");
  };
  non_empty(verbs, "verbs");
  non_empty(relations, "relations");
  non_empty(numeric_terms, "numeric_terms");
  non_empty(spatial_terms, "spatial_terms");
  if (colors.size() != 3) throw InvariantViolation("colors", "the tabletop palette has exactly three colors");
  if (std::set<std::string>(colors.begin(), colors.end()).size() != colors.size()) {
    throw InvariantViolation("colors", "duplicate color");
  }
  if (object_kinds != std::vector<std::string>{"block", "bowl"}) {
    throw InvariantViolation("object_kinds", "tabletop scenes use blocks and bowls");
  }
  if (block_terms.empty() && bowl_terms.empty() && either_terms.empty()) {
    throw InvariantViolation("attribute terms", "no attribute substitutes configured");
  }
  for (const auto& [color, terms] : color_terms) {
    if (terms.empty()) throw InvariantViolation("color_terms", "color '" + color + "' has no substitutes");
  }
  for (const auto& [term, referents] : spatial_terms) {
    if (referents.empty()) throw InvariantViolation("spatial_terms", "'" + term + "' maps to no relation");
    for (const auto& r : referents) {
      if (std::find(relations.begin(), relations.end(), r) == relations.end()) {
        throw InvariantViolation("spatial_terms", "'" + r + "' is not a listed relation");
      }
    }
  }
}

TabletopSpec load_tabletop_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Category::Data, "cannot open tabletop spec " + path.string());
  TabletopSpec spec;
  try {
    const auto j = nlohmann::json::parse(in);
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("verbs", spec.verbs);
    read("object_kinds", spec.object_kinds);
    read("relations", spec.relations);
    read("colors", spec.colors);
    read("block_terms", spec.block_terms);
    read("bowl_terms", spec.bowl_terms);
    read("either_terms", spec.either_terms);
    read("color_terms", spec.color_terms);
    read("numeric_terms", spec.numeric_terms);
    if (j.contains("spatial_terms")) {
      spec.spatial_terms.clear();
      for (const auto& [term, refs] : j.at("spatial_terms").items()) {
        spec.spatial_terms.emplace_back(term, refs.get<std::vector<std::string>>());
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string(), 1, ex.what());
  }
  spec.validate();
  return spec;
}

std::vector<AmbiguityCase> enumerate_cases(const TabletopSpec& spec, Ambiguity type) {
  std::vector<AmbiguityCase> cases;
  switch (type) {
    case Ambiguity::Attribute:
      for (const auto& t : spec.block_terms) cases.push_back({type, t, "block"});
      for (const auto& t : spec.bowl_terms) cases.push_back({type, t, "bowl"});
      for (const auto& t : spec.either_terms) cases.push_back({type, t, "either"});
      for (const auto& color : spec.colors) {
        if (auto it = spec.color_terms.find(color); it != spec.color_terms.end()) {
          for (const auto& t : it->second) cases.push_back({type, t, color});
        }
      }
      break;
    case Ambiguity::Numeric:
      for (const auto& t : spec.numeric_terms) cases.push_back({type, t, ""});
      break;
    case Ambiguity::Spatial:
      for (const auto& [t, refs] : spec.spatial_terms) cases.push_back({type, t, ""});
      break;
    default:
      break;
  }
  return cases;
}

namespace {

struct Item {
  std::string color;
  std::string kind;
  [[nodiscard]] std::string name() const { return color + " " + kind; }
  friend bool operator==(const Item&, const Item&) = default;
};

class TabletopBuilder {
public:
  TabletopBuilder(const TabletopSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

  TabletopSample build(std::size_t index, std::uint64_t seed) {
    static constexpr Ambiguity kTypes[] = {Ambiguity::Attribute, Ambiguity::Numeric, Ambiguity::Spatial};
    const Ambiguity type = kTypes[uniform(3)];
    const auto cases = enumerate_cases(spec_, type);
    const AmbiguityCase chosen = cases[uniform(cases.size())];

    char id[64];
    std::snprintf(id, sizeof id, "tabletop-s%llu-%05zu", static_cast<unsigned long long>(seed), index);
    TabletopSample sample;
    sample.ambiguity_case = chosen;
    sample.scenario.id = id;
    sample.scenario.ambiguity = type;
    switch (type) {
      case Ambiguity::Attribute:
        attribute(sample.scenario, chosen);
        break;
      case Ambiguity::Numeric:
        numeric(sample.scenario, chosen);
        break;
      default:
        spatial(sample.scenario, chosen);
        break;
    }
    return sample;
  }

private:
  std::size_t uniform(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform(v.size())];
  }

  [[nodiscard]] std::vector<Item> standard_items() const {
    std::vector<Item> items;
    for (const auto& c : spec_.colors) items.push_back({c, "block"});
    for (const auto& c : spec_.colors) items.push_back({c, "bowl"});
    return items;
  }

  static void set_scene(Scenario& s, const std::vector<Item>& items, const std::string& description) {
    s.scene.objects.clear();
    for (const auto& it : items) s.scene.objects.emplace_back(std::vector<std::string>{it.color}, it.kind);
    s.scene.description = description;
  }

  static std::string describe(const std::vector<Item>& items) {
    std::vector<std::string> parts;
    for (const auto& it : items) parts.push_back("a " + it.name());
    return "On the table there are " + oxford_join(parts) + ".";
  }

  static std::string action(const std::string& movable, const std::string& relation, const Item& target) {
    return "put " + movable + " " + relation + " " + target.name();
  }

  static std::string sentence(std::string s) {
    if (!s.empty()) s.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(s.front())));
    return s + ".";
  }

  Item pick_target(const std::vector<Item>& items, const std::vector<Item>& exclude) {
    std::vector<Item> pool;
    for (const auto& it : items) {
      if (std::find(exclude.begin(), exclude.end(), it) == exclude.end()) pool.push_back(it);
    }
    return pick(pool);
  }

  void attribute(Scenario& s, const AmbiguityCase& c) {
    const auto items = standard_items();
    set_scene(s, items, describe(items));
    const std::string verb = pick(spec_.verbs);
    const std::string relation = pick(spec_.relations);

    std::vector<Item> referents;
    std::string phrase;
    if (c.detail == "block" || c.detail == "bowl" || c.detail == "either") {
      const std::string color = pick(spec_.colors);
      if (c.detail == "either") {
        referents = {{color, "block"}, {color, "bowl"}};
      } else {
        referents = {{color, c.detail}};
      }
      phrase = color + " " + c.term;
    } else {
      const std::string kind = pick(spec_.object_kinds);
      referents = {{c.detail, kind}};
      phrase = c.term + " " + kind;
    }
    const Item target = pick_target(items, referents);
    s.instruction = sentence(verb + " the " + phrase + " " + relation + " the " + target.name());
    for (const auto& r : referents) s.true_actions.push_back(action(r.name(), relation, target));
  }

  void numeric(Scenario& s, const AmbiguityCase& c) {
    const std::string block_color = pick(spec_.colors);
    std::vector<Item> items{{block_color, "block"}};
    std::vector<std::string> parts{"three " + block_color + " blocks"};
    for (const auto& color : spec_.colors) {
      items.push_back({color, "bowl"});
      parts.push_back("a " + color + " bowl");
    }
    set_scene(s, items, "On the table there are " + oxford_join(parts) + ".");
    const std::string verb = pick(spec_.verbs);
    const std::string relation = pick(spec_.relations);
    const Item target{pick(spec_.colors), "bowl"};
    s.instruction = sentence(verb + " " + c.term + " blocks " + relation + " the " + target.name());
    for (const char* count : {"two", "three"}) {
      s.true_actions.push_back(action(std::string(count) + " " + block_color + " blocks", relation, target));
    }
  }

  void spatial(Scenario& s, const AmbiguityCase& c) {
    const auto items = standard_items();
    set_scene(s, items, describe(items));
    const std::string verb = pick(spec_.verbs);
    const Item movable = pick(items);
    const Item target = pick_target(items, {movable});
    s.instruction = sentence(verb + " the " + movable.name() + " " + c.term + " the " + target.name());
    for (const auto& [term, refs] : spec_.spatial_terms) {
      if (term != c.term) continue;
      for (const auto& r : refs) s.true_actions.push_back(action(movable.name(), r, target));
    }
  }

  const TabletopSpec& spec_;
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<TabletopSample> generate_tabletop_samples(std::size_t n, std::uint64_t seed, const TabletopSpec& spec) {
  if (n == 0) throw UsageError("scenario count must be at least 1");
  spec.validate();
  const Environment env = tabletop_environment();
  TabletopBuilder builder(spec, seed);
  std::vector<TabletopSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto sample = builder.build(i, seed);
    for (auto& a : sample.scenario.true_actions) a = env.canonical_action(a);
    sample.scenario.validate();
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<Scenario> generate_tabletop(std::size_t n, std::uint64_t seed, const TabletopSpec& spec) {
  std::vector<Scenario> out;
  for (auto& s : generate_tabletop_samples(n, seed, spec)) out.push_back(std::move(s.scenario));
  return out;
}

// --- JSONL ------------------------------------------------------------------------

std::vector<Scenario> parse_scenarios(std::istream& in, const Environment& env, const std::string& source) {
  static const std::set<std::string> kTopKeys{"id", "scene", "instruction", "ambiguity", "true_actions"};
  static const std::set<std::string> kSceneKeys{"objects", "description"};
  std::vector<Scenario> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    Scenario s;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw ParseError(source, line_no, "expected a JSON object");
      for (const auto& [key, value] : j.items()) {
        if (!kTopKeys.contains(key)) throw ParseError(source, line_no, "unexpected field '" + key + "'");
      }
      for (const auto& key : kTopKeys) {
        if (!j.contains(key)) throw ParseError(source, line_no, "missing field '" + key + "'");
      }
      const auto& scene = j.at("scene");
      for (const auto& key : kSceneKeys) {
        if (!scene.contains(key)) throw ParseError(source, line_no, "missing field 'scene." + key + "'");
      }
      s.id = j.at("id").get<std::string>();
      s.instruction = j.at("instruction").get<std::string>();
      const auto ambiguity = ambiguity_from_string(j.at("ambiguity").get<std::string>());
      if (!ambiguity) throw ParseError(source, line_no, "unknown ambiguity '" + j.at("ambiguity").get<std::string>() + "'");
      s.ambiguity = *ambiguity;
      s.scene.description = scene.at("description").get<std::string>();
      for (const auto& name : scene.at("objects").get<std::vector<std::string>>()) {
        s.scene.objects.push_back(env.object_from_name(name));
      }
      for (const auto& a : j.at("true_actions").get<std::vector<std::string>>()) {
        s.true_actions.push_back(env.canonical_action(a));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(source, line_no, ex.what());
    }
    try {
      s.validate();
    } catch (const InvariantViolation& ex) {
      throw InvariantViolation(ex.field(), source + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path, const Environment& env) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Category::Data, "cannot open scenario file " + path.string());
  return parse_scenarios(in, env, path.string());
}

std::string scenario_to_json_line(const Scenario& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  nlohmann::ordered_json scene;
  std::vector<std::string> names;
  for (const auto& o : s.scene.objects) names.push_back(o.canonical_name());
  scene["objects"] = names;
  scene["description"] = s.scene.description;
  j["scene"] = scene;
  j["instruction"] = s.instruction;
  j["ambiguity"] = std::string(to_string(s.ambiguity));
  j["true_actions"] = s.true_actions;
  return j.dump();
}

void save_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& scenarios) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Error::Category::Data, "cannot write scenario file " + path.string());
  for (const auto& s : scenarios) out << scenario_to_json_line(s) << '\n';
}

// --- judging ----------------------------------------------------------------------

bool is_true_action(const Scenario& scenario, std::string_view action_text, const Environment& env) {
  const std::string canonical = env.canonical_action(action_text);
  return std::any_of(scenario.true_actions.begin(), scenario.true_actions.end(),
                     [&](const std::string& t) { return env.canonical_action(t) == canonical; });
}

EpisodeOutcome judge(const Scenario& scenario, const Decision& decision,
                     const std::vector<CandidateAction>& candidates, const Environment& env, const McqaConfig& mcqa) {
  auto find = [&](const std::string& label) -> const CandidateAction* {
    for (const auto& c : candidates) {
      if (c.label == label) return &c;
    }
    return nullptr;
  };
  auto member_is_true = [&](const std::string& label) {
    const CandidateAction* c = find(label);
    return c != nullptr && !is_not_listed(*c, mcqa) && is_true_action(scenario, c->text, env);
  };

  EpisodeOutcome out;
  if (const auto* exec = std::get_if<Execute>(&decision)) {
    out.set_size = 1;
    const CandidateAction* c = find(exec->label);
    if (c != nullptr && is_not_listed(*c, mcqa)) {
      out.asked_help = true;
      out.success = std::any_of(candidates.begin(), candidates.end(),
                                [&](const CandidateAction& other) { return member_is_true(other.label); });
    } else {
      out.success = member_is_true(exec->label);
    }
    return out;
  }
  const auto& help = std::get<AskHelp>(decision);
  out.set_size = help.set.size();
  out.asked_help = out.set_size > 1;
  out.success = std::any_of(help.set.members.begin(), help.set.members.end(), member_is_true);
  return out;
}

}  // namespace lbap
