#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lbap {

enum class QueryKind { GenerateCandidates, ScoreMCQA, WorldKnowledge, PromptSet, BinaryCertainty };

std::string_view to_string(QueryKind kind);
std::optional<QueryKind> query_kind_from_string(std::string_view s);

struct BackendQuery {
  QueryKind kind = QueryKind::GenerateCandidates;
  std::string prompt;
  std::vector<std::string> answer_tokens;
  // Routing hint for simulated backends; not part of the fixture key.
  std::string scenario_id;

  // Stable hash of (kind, prompt, answer_tokens) as 16 hex digits.
  [[nodiscard]] std::string key_hash() const;
  // Throws InvariantViolation when answer_tokens is empty for a scoring kind.
  void validate() const;
};

struct BackendResponse {
  std::string text;
  std::map<std::string, double> token_logprobs;  // natural log, every value <= 0

  friend bool operator==(const BackendResponse&, const BackendResponse&) = default;
};

// ln(1e-5): log-probability assumed for a requested token missing from the
// provider's top-k list.
inline constexpr double kMissingTokenLogprob = -11.512925464970229;

// Looks up `token` in the response, falling back to kMissingTokenLogprob.
double logprob_or_floor(const BackendResponse& response, const std::string& token);

// Implementations must be safe to call from several worker threads at once.
class Backend {
public:
  virtual ~Backend() = default;
  virtual BackendResponse query(const BackendQuery& q) = 0;
};

// One line of a replay fixture file.
struct FixtureEntry {
  std::string key_hash;
  QueryKind kind = QueryKind::GenerateCandidates;
  std::string text;
  std::map<std::string, double> token_logprobs;
};

std::vector<FixtureEntry> read_fixtures(const std::filesystem::path& path);
void write_fixtures(const std::filesystem::path& path, const std::vector<FixtureEntry>& entries);

// Read-only after construction; a pure function of the query.
class ReplayBackend final : public Backend {
public:
  explicit ReplayBackend(std::vector<FixtureEntry> entries);
  static ReplayBackend from_file(const std::filesystem::path& path);

  BackendResponse query(const BackendQuery& q) override;
  [[nodiscard]] std::size_t size() const noexcept { return table_.size(); }

private:
  std::map<std::string, FixtureEntry> table_;
};

// Wraps another backend and keeps every answered query as a fixture entry.
// With `reuse` set, entries already present in `path` are served without
// touching the inner backend, which turns the recorder into a disk cache.
// The file is rewritten sorted by key on flush() and on destruction.
class RecordingBackend final : public Backend {
public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path path, bool reuse);
  ~RecordingBackend() override;

  RecordingBackend(const RecordingBackend&) = delete;
  RecordingBackend& operator=(const RecordingBackend&) = delete;

  BackendResponse query(const BackendQuery& q) override;
  void flush();

  [[nodiscard]] std::size_t recorded() const;
  [[nodiscard]] std::size_t served_from_cache() const;

private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, FixtureEntry> entries_;
  std::size_t recorded_ = 0;
  std::size_t cache_hits_ = 0;
  bool dirty_ = false;
};

// Sends each query kind to its own backend, e.g. a cheaper model for the
// world-knowledge check.
class RoutingBackend final : public Backend {
public:
  explicit RoutingBackend(std::shared_ptr<Backend> fallback);

  void route(QueryKind kind, std::shared_ptr<Backend> backend);
  BackendResponse query(const BackendQuery& q) override;

private:
  std::shared_ptr<Backend> fallback_;
  std::map<QueryKind, std::shared_ptr<Backend>> routes_;
};

}  // namespace lbap
