#include "lbap/environment.hpp"

#include <algorithm>
#include <cctype>
#include <initializer_list>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

void SynonymTable::add(std::string_view phrase, std::string_view replacement) {
  auto key = text::tokenize(phrase);
  if (key.empty()) return;
  max_words_ = std::max(max_words_, key.size());
  table_[text::join(key, " ")] = text::tokenize(replacement);
}

std::vector<std::string> SynonymTable::apply_tokens(const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool replaced = false;
    for (std::size_t len = std::min(max_words_, tokens.size() - i); len >= 1 && !replaced; --len) {
      std::vector<std::string> words(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                     tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
      auto it = table_.find(text::join(words, " "));
      bool plural = false;
      if (it == table_.end() && words.back().size() > 2 && words.back().ends_with('s')) {
        const std::string last = words.back();
        words.back() = last.substr(0, last.size() - (last.ends_with("xes") ? 2 : 1));
        it = table_.find(text::join(words, " "));
        plural = it != table_.end();
      }
      if (it == table_.end()) continue;
      std::vector<std::string> replacement = it->second;
      if (plural && !replacement.empty()) replacement.back() += "s";
      out.insert(out.end(), replacement.begin(), replacement.end());
      i += len;
      replaced = true;
    }
    if (!replaced) out.push_back(tokens[i++]);
  }
  return out;
}

std::string SynonymTable::apply(std::string_view input) const {
  return text::join(apply_tokens(text::tokenize(input)), " ");
}

std::vector<ObjectRef> Environment::mentions(std::string_view input) const {
  return parse_objects(synonyms.apply(input), lexicon);
}

std::string Environment::canonical_action(std::string_view input) const {
  auto tokens = synonyms.apply_tokens(text::tokenize(input));
  std::erase_if(tokens, [](const std::string& w) { return w == "a" || w == "an" || w == "the"; });
  return text::join(tokens, " ");
}

ObjectRef Environment::object_from_name(std::string_view name) const {
  auto found = mentions(name);
  if (found.size() == 1) return found.front();
  return ObjectRef({}, text::join(synonyms.apply_tokens(text::tokenize(name)), " "));
}

std::string Environment::surface_phrase(const ObjectRef& object) const {
  if (auto it = surface_forms.find(object.canonical_name()); it != surface_forms.end()) return it->second;
  const std::string& name = object.canonical_name();
  const bool vowel = !name.empty() && std::string_view("aeiou").find(name.front()) != std::string_view::npos;
  return std::string(vowel ? "an " : "a ") + name;
}

std::string oxford_join(const std::vector<std::string>& items) {
  if (items.empty()) return {};
  if (items.size() == 1) return items.front();
  if (items.size() == 2) return items[0] + " and " + items[1];
  std::string out;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) out += items[i] + ", ";
  return out + "and " + items.back();
}

namespace {

constexpr std::string_view kCommonStopwords[] = {
    "a", "an", "the", "of", "to", "on", "in", "into", "onto", "at", "by", "near", "next", "close",
    "beside", "lateral", "along", "line", "sight", "left", "right", "front", "back", "behind", "over",
    "under", "and", "or", "then", "it", "its", "them", "me", "my", "i", "you", "your", "we", "up",
    "down", "away", "out", "please", "can", "could", "would", "will", "want", "need", "with", "for",
    "from", "that", "this", "these", "those", "is", "are", "be", "there", "here", "what", "which",
    "some", "all", "any", "few", "couple", "pair", "handful", "single", "one", "two", "three", "four",
    "five", "both", "each", "every", "object", "objects", "item", "items", "thing", "things", "something",
    "put", "place", "move", "pick", "bring", "get", "give", "take", "grab", "hand", "throw", "dispose",
    "leave", "set", "drop", "stack", "push", "carry", "fetch", "go", "find", "open", "close", "keep",
    "option", "listed", "not", "none", "table", "counter", "floor", "room", "kitchen", "other", "same",
    "between", "around", "toward", "towards", "side", "top-of", "no", "yes", "true", "false",
};

void add_common_stopwords(Lexicon& lex) {
  for (auto w : kCommonStopwords) lex.add_stopword(w);
}

}  // namespace

Environment tabletop_environment() {
  Environment env;
  env.name = "tabletop";
  env.setting_phrase = "On the table";
  env.include_not_listed = false;
  add_common_stopwords(env.lexicon);
  env.lexicon.add_stopword("top");
  for (auto c : {"red", "yellow", "green", "blue", "gold", "orange", "purple", "pink", "white", "black",
                 "brown", "gray", "grey", "silver", "violet"}) {
    env.lexicon.add_attribute(c);
  }
  for (auto s : {"small", "large", "big", "wooden", "plastic", "metal"}) env.lexicon.add_attribute(s);
  for (auto n : {"block", "bowl", "plate", "cup", "mug", "tray"}) env.lexicon.add_noun(n);

  for (auto s : {"cube", "cuboid", "box", "square object"}) env.synonyms.add(s, "block");
  for (auto s : {"container", "round object", "receptacle"}) env.synonyms.add(s, "bowl");
  env.synonyms.add("navy", "blue");
  env.synonyms.add("cyan", "blue");
  env.synonyms.add("greenish", "green");
  env.synonyms.add("grass-colored", "green");
  env.synonyms.add("place", "put");
  env.synonyms.add("move", "put");

  env.hallucination_pool = {"gold bowl",   "gold block",   "blue bowl",   "blue block",
                            "purple bowl", "purple block", "orange bowl", "orange block",
                            "white plate", "pink cup"};
  return env;
}

Environment mobile_environment() {
  Environment env;
  env.name = "mobile";
  env.setting_phrase = "On the counter";
  env.include_not_listed = true;
  add_common_stopwords(env.lexicon);
  for (auto a : {"metal", "plastic", "clean", "dirty", "top", "bottom", "landfill", "compost", "recycling",
                 "portable", "glass", "paper"}) {
    env.lexicon.add_attribute(a);
  }
  for (auto n : {"bottled water", "bottled tea", "orange soda", "redbull", "coke", "pepsi", "sprite",
                 "rice chips", "jalapeno chips", "kettle chips", "multigrain chips", "apple", "orange",
                 "energy bar", "sponge", "bowl", "bin", "drawer", "microwave", "stove", "fruit", "mug", "cup",
                 "soda", "chips", "drink", "bottle", "snack", "banana", "water", "tea", "towel", "plate",
                 "granola bar", "candy"}) {
    env.lexicon.add_noun(n);
  }
  env.synonyms.add("red bull", "redbull");
  env.synonyms.add("coca cola", "coke");
  env.synonyms.add("coca-cola", "coke");
  env.synonyms.add("trash can", "landfill bin");
  env.synonyms.add("trash bin", "landfill bin");
  env.synonyms.add("garbage bin", "landfill bin");
  env.synonyms.add("recycle bin", "recycling bin");
  env.synonyms.add("place", "put");
  env.synonyms.add("move", "put");

  env.surface_forms = {
      {"rice chips", "a bag of rice chips"},
      {"jalapeno chips", "a bag of jalapeno chips"},
      {"kettle chips", "a bag of kettle chips"},
      {"multigrain chips", "a bag of multigrain chips"},
      {"redbull", "a RedBull"},
      {"coke", "a Coke"},
      {"pepsi", "a Pepsi"},
      {"sprite", "a Sprite"},
      {"bottled water", "a bottled water"},
      {"bottled tea", "a bottled tea"},
  };
  env.hallucination_pool = {"coffee mug", "banana", "fruit", "granola bar", "glass bowl", "paper towel",
                            "candy", "plastic cup"};
  return env;
}

Environment environment_by_name(std::string_view name) {
  if (name == "tabletop") return tabletop_environment();
  if (name == "mobile") return mobile_environment();
  throw UsageError("unknown environment '" + std::string(name) + "' (expected tabletop or mobile)");
}

}  // namespace lbap
