#include <gtest/gtest.h>

#include <filesystem>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lbap/backend.hpp"
#include "lbap/errors.hpp"
#include "lbap/http_backend.hpp"

using namespace lbap;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "lbap_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

BackendQuery scoring_query() { return {QueryKind::ScoreMCQA, "Which option?", {"A", "B"}, ""}; }

class CountingBackend final : public Backend {
public:
  BackendResponse query(const BackendQuery& q) override {
    ++calls;
    return {"echo:" + q.prompt, {{"A", -0.5}}};
  }
  int calls = 0;
};

}  // namespace

TEST(BackendQuery, KeyHashMatchesIndependentFnv) {
  // FNV-1a over "score_mcqa" 0x1f prompt 0x1f ("A" 0x1e "B" 0x1e), computed outside the library
  EXPECT_EQ(scoring_query().key_hash(), "a4ac52a340012eae");
}

TEST(BackendQuery, ScenarioIdIsNotPartOfTheKey) {
  auto a = scoring_query();
  auto b = scoring_query();
  b.scenario_id = "tabletop-s1-00001";
  EXPECT_EQ(a.key_hash(), b.key_hash());
  b.answer_tokens = {"B", "A"};
  EXPECT_NE(a.key_hash(), b.key_hash());
}

TEST(BackendQuery, ScoringKindsNeedAnswerTokens) {
  EXPECT_THROW((BackendQuery{QueryKind::ScoreMCQA, "p", {}, ""}.validate()), InvariantViolation);
  EXPECT_THROW((BackendQuery{QueryKind::WorldKnowledge, "p", {}, ""}.validate()), InvariantViolation);
  EXPECT_THROW((BackendQuery{QueryKind::BinaryCertainty, "p", {}, ""}.validate()), InvariantViolation);
  EXPECT_NO_THROW((BackendQuery{QueryKind::GenerateCandidates, "p", {}, ""}.validate()));
  EXPECT_NO_THROW((BackendQuery{QueryKind::PromptSet, "p", {}, ""}.validate()));
}

TEST(ReplayBackend, TableLookup) {
  const auto q = scoring_query();
  ReplayBackend replay({{q.key_hash(), q.kind, "A", {{"A", -0.105}, {"B", -2.303}}}});
  const auto r = replay.query(q);
  EXPECT_EQ(r.token_logprobs.size(), 2u);
  EXPECT_DOUBLE_EQ(r.token_logprobs.at("A"), -0.105);
  EXPECT_DOUBLE_EQ(r.token_logprobs.at("B"), -2.303);
  EXPECT_EQ(replay.query(q), r);
}

TEST(ReplayBackend, AbsentTokenStaysAbsent) {
  BackendQuery q{QueryKind::WorldKnowledge, "Is it safe?", {"True", "False"}, ""};
  ReplayBackend replay({{q.key_hash(), q.kind, "True", {{"True", -0.03}}}});
  const auto r = replay.query(q);
  EXPECT_EQ(r.token_logprobs.size(), 1u);
  EXPECT_FALSE(r.token_logprobs.contains("False"));
  EXPECT_DOUBLE_EQ(logprob_or_floor(r, "False"), kMissingTokenLogprob);
  EXPECT_DOUBLE_EQ(kMissingTokenLogprob, std::log(1e-5));
}

TEST(ReplayBackend, MissNamesTheHash) {
  ReplayBackend replay({});
  try {
    replay.query(scoring_query());
    FAIL() << "expected ReplayMiss";
  } catch (const ReplayMiss& e) {
    EXPECT_EQ(e.key_hash(), "a4ac52a340012eae");
    EXPECT_NE(std::string(e.what()).find("a4ac52a340012eae"), std::string::npos);
    EXPECT_EQ(e.category(), Error::Category::Backend);
  }
}

TEST(Fixtures, RoundTripThroughFile) {
  const auto path = temp_path("roundtrip.jsonl");
  std::vector<FixtureEntry> entries{{"00000000000000ff", QueryKind::GenerateCandidates, "A) x\nB) y", {}},
                                    {"0000000000000001", QueryKind::ScoreMCQA, "", {{"A", -0.25}, {"B", -1.5}}}};
  write_fixtures(path, entries);
  const auto back = read_fixtures(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].text, "A) x\nB) y");
  EXPECT_EQ(back[1].kind, QueryKind::ScoreMCQA);
  EXPECT_DOUBLE_EQ(back[1].token_logprobs.at("B"), -1.5);
}

TEST(Fixtures, RejectPositiveLogprobWithLine) {
  const auto path = temp_path("bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"key_hash":"1","kind":"score_mcqa","text":"","token_logprobs":{"A":-1.0}})" << '\n';
    out << R"({"key_hash":"2","kind":"score_mcqa","text":"","token_logprobs":{"A":0.5}})" << '\n';
  }
  try {
    read_fixtures(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(RecordingBackend, RecordsAndServesFromCache) {
  const auto path = temp_path("recording.jsonl");
  std::filesystem::remove(path);
  auto inner = std::make_shared<CountingBackend>();
  {
    RecordingBackend rec(inner, path, true);
    rec.query(scoring_query());
    rec.query(scoring_query());
    EXPECT_EQ(rec.recorded(), 1u);
    EXPECT_EQ(rec.served_from_cache(), 1u);
  }
  EXPECT_EQ(inner->calls, 1);
  RecordingBackend again(inner, path, true);
  const auto r = again.query(scoring_query());
  EXPECT_EQ(inner->calls, 1);
  EXPECT_EQ(r.text, "echo:Which option?");
  auto replay = ReplayBackend::from_file(path);
  EXPECT_EQ(replay.query(scoring_query()), r);
}

TEST(RoutingBackend, SendsKindsToTheirBackends) {
  auto main = std::make_shared<CountingBackend>();
  auto cheap = std::make_shared<CountingBackend>();
  RoutingBackend routing(main);
  routing.route(QueryKind::WorldKnowledge, cheap);
  routing.query(scoring_query());
  routing.query({QueryKind::WorldKnowledge, "w", {"True", "False"}, ""});
  EXPECT_EQ(main->calls, 1);
  EXPECT_EQ(cheap->calls, 1);
}

// --- HTTP -------------------------------------------------------------------------

namespace {

std::string completion_body(const std::string& content, const std::string& top) {
  return R"({"choices":[{"message":{"content":")" + content + R"("},"logprobs":{"content":[{"token":")" + content +
         R"(","logprob":-0.1,"top_logprobs":)" + top + "}]}}]}";
}

}  // namespace

TEST(HttpWire, RequestCarriesTemperatureAndTopLogprobs) {
  HttpBackendConfig cfg;
  cfg.model = "test-model";
  const auto body = nlohmann::json::parse(wire::build_request(cfg, scoring_query()));
  EXPECT_EQ(body.at("model"), "test-model");
  EXPECT_EQ(body.at("temperature"), 0.0);
  EXPECT_EQ(body.at("logprobs"), true);
  EXPECT_EQ(body.at("top_logprobs"), 5);
  EXPECT_EQ(body.at("max_tokens"), 1);
  EXPECT_EQ(body.at("messages").at(0).at("content"), "Which option?");
}

TEST(HttpWire, ParsesRequestedTokensOnly) {
  const auto r = wire::parse_response(
      completion_body("A", R"([{"token":"A","logprob":-0.1},{"token":" B","logprob":-2.5},{"token":"Z","logprob":-3}])"),
      scoring_query());
  EXPECT_EQ(r.token_logprobs.size(), 2u);
  EXPECT_DOUBLE_EQ(r.token_logprobs.at("A"), -0.1);
  EXPECT_DOUBLE_EQ(r.token_logprobs.at("B"), -2.5);
}

TEST(HttpWire, MalformedPayloadsAreTransportErrors) {
  EXPECT_THROW(wire::parse_response("not json", scoring_query()), TransportError);
  EXPECT_THROW(wire::parse_response(R"({"choices":[]})", scoring_query()), TransportError);
  EXPECT_THROW(wire::parse_response(completion_body("A", R"([{"token":"A","logprob":0.2}])"), scoring_query()),
               TransportError);
  EXPECT_THROW(wire::parse_response(completion_body("A", R"([{"token":"A","logprob":"nan"}])"), scoring_query()),
               TransportError);
}

TEST(HttpBackend, RetriesServerErrorsThenSucceeds) {
  int calls = 0;
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackendConfig cfg;
  cfg.requests_per_minute = 1e6;
  HttpTransport transport = [&](const HttpBackendConfig&, const std::string&) {
    ++calls;
    if (calls < 3) return HttpResult{503, "busy", std::nullopt, ""};
    return HttpResult{200, completion_body("A", R"([{"token":"A","logprob":-0.1}])"), std::nullopt, ""};
  };
  HttpBackend http(cfg, transport, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  const auto r = http.query(scoring_query());
  EXPECT_DOUBLE_EQ(r.token_logprobs.at("A"), -0.1);
  EXPECT_EQ(calls, 3);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[0], std::chrono::milliseconds(500));
  EXPECT_EQ(sleeps[1], std::chrono::milliseconds(1000));
}

TEST(HttpBackend, GivesUpAfterMaxAttempts) {
  int calls = 0;
  HttpBackendConfig cfg;
  cfg.max_attempts = 3;
  cfg.requests_per_minute = 1e6;
  HttpTransport transport = [&](const HttpBackendConfig&, const std::string&) {
    ++calls;
    return HttpResult{0, "", std::nullopt, "connection refused"};
  };
  HttpBackend http(cfg, transport, [](std::chrono::milliseconds) {});
  EXPECT_THROW(http.query(scoring_query()), TransportError);
  EXPECT_EQ(calls, 3);
}

TEST(HttpBackend, ClientErrorsAreNotRetried) {
  int calls = 0;
  HttpBackendConfig cfg;
  cfg.requests_per_minute = 1e6;
  HttpTransport transport = [&](const HttpBackendConfig&, const std::string&) {
    ++calls;
    return HttpResult{401, R"({"error":"bad key"})", std::nullopt, ""};
  };
  HttpBackend http(cfg, transport, [](std::chrono::milliseconds) {});
  EXPECT_THROW(http.query(scoring_query()), TransportError);
  EXPECT_EQ(calls, 1);
}

TEST(HttpBackend, RetryAfterOverridesBackoff) {
  int calls = 0;
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackendConfig cfg;
  cfg.requests_per_minute = 1e6;
  HttpTransport transport = [&](const HttpBackendConfig&, const std::string&) {
    ++calls;
    if (calls == 1) return HttpResult{429, "", std::chrono::seconds(2), ""};
    return HttpResult{200, completion_body("A", R"([{"token":"A","logprob":-0.1}])"), std::nullopt, ""};
  };
  HttpBackend http(cfg, transport, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  http.query(scoring_query());
  ASSERT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(sleeps[0], std::chrono::milliseconds(2000));
}

TEST(Backoff, DoublesUpToCap) {
  BackoffPolicy p{std::chrono::milliseconds(100), std::chrono::milliseconds(1000)};
  EXPECT_EQ(p.delay(0).count(), 100);
  EXPECT_EQ(p.delay(1).count(), 200);
  EXPECT_EQ(p.delay(3).count(), 800);
  EXPECT_EQ(p.delay(4).count(), 1000);
  EXPECT_EQ(p.delay(40).count(), 1000);
}

TEST(TokenBucket, ReportsWaitWhenEmpty) {
  TokenBucket bucket(60.0, 2.0);
  const auto now = TokenBucket::Clock::now();
  EXPECT_EQ(bucket.try_acquire(now).count(), 0);
  EXPECT_EQ(bucket.try_acquire(now).count(), 0);
  const auto wait = bucket.try_acquire(now);
  EXPECT_GT(wait.count(), 0);
  EXPECT_LE(wait, std::chrono::seconds(1));
  EXPECT_EQ(bucket.try_acquire(now + std::chrono::seconds(1)).count(), 0);
}
