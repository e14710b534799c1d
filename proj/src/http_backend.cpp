#include "lbap/http_backend.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

// --- rate limiting ---------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_minute, double capacity)
    : rate_per_second_(rate_per_minute / 60.0),
      capacity_(std::max(1.0, capacity)),
      tokens_(std::max(1.0, capacity)),
      last_(Clock::now()) {
  if (!(rate_per_minute > 0.0)) throw UsageError("requests_per_minute must be positive");
}

void TokenBucket::refill(Clock::time_point now) {
  const double elapsed = std::chrono::duration<double>(now - last_).count();
  if (elapsed > 0.0) {
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_second_);
    last_ = now;
  }
}

TokenBucket::Clock::duration TokenBucket::try_acquire(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  refill(now);
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return Clock::duration::zero();
  }
  const double missing = 1.0 - tokens_;
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(missing / rate_per_second_));
}

void TokenBucket::acquire() {
  for (;;) {
    const auto wait = try_acquire(Clock::now());
    if (wait == Clock::duration::zero()) return;
    std::this_thread::sleep_for(wait);
  }
}

std::chrono::milliseconds BackoffPolicy::delay(int retry) const {
  const int shift = std::clamp(retry, 0, 30);
  const auto scaled = base.count() * (std::int64_t{1} << shift);
  return std::chrono::milliseconds(std::min<std::int64_t>(scaled, max.count()));
}

// --- wire format -----------------------------------------------------------------

namespace wire {

std::string build_request(const HttpBackendConfig& cfg, const BackendQuery& q) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", q.prompt}}});
  body["temperature"] = cfg.temperature;
  const bool generative = q.kind == QueryKind::GenerateCandidates || q.kind == QueryKind::PromptSet;
  body["max_tokens"] = generative ? cfg.max_generation_tokens : 1;
  body["logprobs"] = true;
  body["top_logprobs"] = cfg.top_logprobs;
  return body.dump();
}

namespace {

std::string trim_token(std::string_view token) {
  const auto first = token.find_first_not_of(" \t\n\r");
  if (first == std::string_view::npos) return {};
  const auto last = token.find_last_not_of(" \t\n\r");
  return std::string(token.substr(first, last - first + 1));
}

void keep_logprob(BackendResponse& out, const BackendQuery& q, const std::string& raw_token, double lp) {
  if (std::isnan(lp) || lp > 0.0) {
    throw TransportError("provider returned invalid logprob " + std::to_string(lp) + " for token '" + raw_token + "'");
  }
  const std::string token = trim_token(raw_token);
  if (std::find(q.answer_tokens.begin(), q.answer_tokens.end(), token) == q.answer_tokens.end()) return;
  auto [it, inserted] = out.token_logprobs.try_emplace(token, lp);
  if (!inserted) it->second = std::max(it->second, lp);
}

}  // namespace

BackendResponse parse_response(std::string_view body, const BackendQuery& q) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& ex) {
    throw TransportError(std::string("malformed response body: ") + ex.what());
  }
  try {
    const auto& choice = j.at("choices").at(0);
    BackendResponse out;
    const auto& content = choice.at("message").at("content");
    if (content.is_string()) out.text = content.get<std::string>();
    if (q.answer_tokens.empty()) return out;

    const auto& first = choice.at("logprobs").at("content").at(0);
    keep_logprob(out, q, first.at("token").get<std::string>(), first.at("logprob").get<double>());
    if (first.contains("top_logprobs")) {
      for (const auto& alt : first.at("top_logprobs")) {
        keep_logprob(out, q, alt.at("token").get<std::string>(), alt.at("logprob").get<double>());
      }
    }
    return out;
  } catch (const nlohmann::json::exception& ex) {
    throw TransportError(std::string("unexpected response shape: ") + ex.what());
  }
}

}  // namespace wire

// --- transport -------------------------------------------------------------------

HttpTransport default_transport() {
  return [](const HttpBackendConfig& cfg, const std::string& body) -> HttpResult {
    const auto scheme_end = cfg.endpoint.find("://");
    if (scheme_end == std::string::npos) return HttpResult{0, {}, {}, "endpoint lacks a scheme: " + cfg.endpoint};
    const auto path_start = cfg.endpoint.find('/', scheme_end + 3);
    const std::string origin = cfg.endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : cfg.endpoint.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    client.set_write_timeout(cfg.timeout);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return HttpResult{0, {}, {}, httplib::to_string(res.error())};
    HttpResult out{res->status, res->body, {}, {}};
    if (res->has_header("Retry-After")) {
      try {
        out.retry_after = std::chrono::seconds(std::stoi(res->get_header_value("Retry-After")));
      } catch (const std::exception&) {
        // HTTP-date form is not supported; fall back to exponential backoff
      }
    }
    return out;
  };
}

// --- backend ---------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig cfg, HttpTransport transport,
                         std::function<void(std::chrono::milliseconds)> sleeper)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleep_(sleeper ? std::move(sleeper) : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      bucket_(cfg_.requests_per_minute, std::max(1.0, static_cast<double>(cfg_.max_in_flight))),
      in_flight_(std::clamp(cfg_.max_in_flight, 1, 1024)) {
  if (cfg_.max_attempts < 1) throw UsageError("retry count must allow at least one attempt");
  if (cfg_.top_logprobs < 1 || cfg_.top_logprobs > 20) throw UsageError("top_logprobs must be in [1, 20]");
}

BackendResponse HttpBackend::query(const BackendQuery& q) {
  q.validate();
  const std::string body = wire::build_request(cfg_, q);
  const BackoffPolicy backoff{cfg_.base_backoff, cfg_.max_backoff};
  std::string last_error;
  std::optional<std::chrono::milliseconds> server_delay;

  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0) sleep_(server_delay.value_or(backoff.delay(attempt - 1)));
    server_delay.reset();
    bucket_.acquire();
    HttpResult result;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      ++attempts_;
      result = transport_(cfg_, body);
    }

    if (!result.error.empty()) {
      last_error = "transport failure: " + result.error;
      continue;
    }
    if (result.status == 429 || result.status >= 500) {
      last_error = "HTTP " + std::to_string(result.status);
      if (result.retry_after) server_delay = std::chrono::duration_cast<std::chrono::milliseconds>(*result.retry_after);
      continue;
    }
    if (result.status < 200 || result.status >= 300) {
      throw TransportError("HTTP " + std::to_string(result.status) + ": " + result.body.substr(0, 200));
    }
    try {
      return wire::parse_response(result.body, q);
    } catch (const TransportError& ex) {
      last_error = ex.what();
    }
  }
  throw TransportError("giving up after " + std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
}

}  // namespace lbap
