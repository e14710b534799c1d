#include "lbap/backend.hpp"

#include <array>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

namespace {

constexpr std::array<std::pair<QueryKind, std::string_view>, 5> kKindNames{{
    {QueryKind::GenerateCandidates, "generate_candidates"},
    {QueryKind::ScoreMCQA, "score_mcqa"},
    {QueryKind::WorldKnowledge, "world_knowledge"},
    {QueryKind::PromptSet, "prompt_set"},
    {QueryKind::BinaryCertainty, "binary_certainty"},
}};

}  // namespace

std::string_view to_string(QueryKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<QueryKind> query_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames) {
    if (name == s) return k;
  }
  return std::nullopt;
}

std::string BackendQuery::key_hash() const {
  std::uint64_t h = text::fnv1a(to_string(kind));
  h = text::fnv1a("\x1f", h);
  h = text::fnv1a(prompt, h);
  h = text::fnv1a("\x1f", h);
  for (const auto& t : answer_tokens) {
    h = text::fnv1a(t, h);
    h = text::fnv1a("\x1e", h);
  }
  return text::hex64(h);
}

void BackendQuery::validate() const {
  const bool needs_tokens =
      kind == QueryKind::ScoreMCQA || kind == QueryKind::WorldKnowledge || kind == QueryKind::BinaryCertainty;
  if (needs_tokens && answer_tokens.empty()) {
    throw InvariantViolation("answer_tokens", std::string("required for ") + std::string(to_string(kind)));
  }
}

double logprob_or_floor(const BackendResponse& response, const std::string& token) {
  auto it = response.token_logprobs.find(token);
  return it == response.token_logprobs.end() ? kMissingTokenLogprob : it->second;
}

// --- fixtures ------------------------------------------------------------------

std::vector<FixtureEntry> read_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Category::Data, "cannot open fixture file " + path.string());
  std::vector<FixtureEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FixtureEntry e;
      e.key_hash = j.at("key_hash").get<std::string>();
      auto kind = query_kind_from_string(j.at("kind").get<std::string>());
      if (!kind) throw ParseError(path.string(), line_no, "unknown query kind");
      e.kind = *kind;
      e.text = j.at("text").get<std::string>();
      for (const auto& [token, lp] : j.at("token_logprobs").items()) {
        const double v = lp.get<double>();
        if (!(v <= 0.0)) throw ParseError(path.string(), line_no, "positive or NaN logprob for '" + token + "'");
        e.token_logprobs[token] = v;
      }
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path.string(), line_no, ex.what());
    }
  }
  return entries;
}

void write_fixtures(const std::filesystem::path& path, const std::vector<FixtureEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Error::Category::Data, "cannot write fixture file " + path.string());
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["key_hash"] = e.key_hash;
    j["kind"] = std::string(to_string(e.kind));
    j["text"] = e.text;
    j["token_logprobs"] = nlohmann::ordered_json::object();
    for (const auto& [token, lp] : e.token_logprobs) j["token_logprobs"][token] = lp;
    out << j.dump() << '\n';
  }
}

// --- replay --------------------------------------------------------------------

ReplayBackend::ReplayBackend(std::vector<FixtureEntry> entries) {
  for (auto& e : entries) {
    std::string key = e.key_hash;
    table_.insert_or_assign(std::move(key), std::move(e));
  }
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
  return ReplayBackend(read_fixtures(path));
}

BackendResponse ReplayBackend::query(const BackendQuery& q) {
  q.validate();
  const std::string key = q.key_hash();
  auto it = table_.find(key);
  if (it == table_.end()) throw ReplayMiss(key);
  return BackendResponse{it->second.text, it->second.token_logprobs};
}

// --- recording -----------------------------------------------------------------

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path path, bool reuse)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (reuse && std::filesystem::exists(path_)) {
    for (auto& e : read_fixtures(path_)) {
      std::string key = e.key_hash;
      entries_.insert_or_assign(std::move(key), std::move(e));
    }
  }
}

RecordingBackend::~RecordingBackend() {
  try {
    flush();
  } catch (...) {
    // destructor must not throw; an explicit flush() reports write failures
  }
}

BackendResponse RecordingBackend::query(const BackendQuery& q) {
  q.validate();
  const std::string key = q.key_hash();
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++cache_hits_;
      return BackendResponse{it->second.text, it->second.token_logprobs};
    }
  }
  BackendResponse response = inner_->query(q);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.try_emplace(key, FixtureEntry{key, q.kind, response.text, response.token_logprobs});
  if (inserted) {
    ++recorded_;
    dirty_ = true;
  }
  return BackendResponse{it->second.text, it->second.token_logprobs};
}

void RecordingBackend::flush() {
  std::lock_guard lock(mutex_);
  if (!dirty_) return;
  std::vector<FixtureEntry> sorted;
  sorted.reserve(entries_.size());
  for (const auto& [key, e] : entries_) sorted.push_back(e);
  write_fixtures(path_, sorted);
  dirty_ = false;
}

std::size_t RecordingBackend::recorded() const {
  std::lock_guard lock(mutex_);
  return recorded_;
}

std::size_t RecordingBackend::served_from_cache() const {
  std::lock_guard lock(mutex_);
  return cache_hits_;
}

// --- routing -------------------------------------------------------------------

RoutingBackend::RoutingBackend(std::shared_ptr<Backend> fallback) : fallback_(std::move(fallback)) {}

void RoutingBackend::route(QueryKind kind, std::shared_ptr<Backend> backend) { routes_[kind] = std::move(backend); }

BackendResponse RoutingBackend::query(const BackendQuery& q) {
  if (auto it = routes_.find(q.kind); it != routes_.end()) return it->second->query(q);
  return fallback_->query(q);
}

}  // namespace lbap
