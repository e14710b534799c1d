#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include "lbap/backend.hpp"

namespace lbap {

struct HttpBackendConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  std::string api_key;  // read from the environment by the caller, never from config
  int top_logprobs = 5;
  double temperature = 0.0;
  int max_in_flight = 4;
  double requests_per_minute = 60.0;
  int max_attempts = 4;  // first try plus retries
  std::chrono::milliseconds base_backoff{500};
  std::chrono::milliseconds max_backoff{30000};
  std::chrono::seconds timeout{60};
  int max_generation_tokens = 256;
};

// Token bucket: `rate_per_minute` sustained, bursts up to `capacity`.
class TokenBucket {
public:
  using Clock = std::chrono::steady_clock;

  TokenBucket(double rate_per_minute, double capacity);

  // Blocks until a token is available.
  void acquire();
  // Non-blocking; returns how long the caller would have to wait (zero when a
  // token was taken).
  Clock::duration try_acquire(Clock::time_point now);

private:
  void refill(Clock::time_point now);

  std::mutex mutex_;
  double rate_per_second_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

// Exponential backoff with a cap: base * 2^retry, never above max.
struct BackoffPolicy {
  std::chrono::milliseconds base{500};
  std::chrono::milliseconds max{30000};

  [[nodiscard]] std::chrono::milliseconds delay(int retry) const;
};

namespace wire {

// Chat-completions request body for one query. All provider field names live
// in this unit.
std::string build_request(const HttpBackendConfig& cfg, const BackendQuery& q);

// Throws TransportError on malformed payloads or positive/NaN logprobs.
BackendResponse parse_response(std::string_view body, const BackendQuery& q);

}  // namespace wire

struct HttpResult {
  int status = 0;
  std::string body;
  std::optional<std::chrono::seconds> retry_after;
  std::string error;  // non-empty when no HTTP response was received
};

// Performs a single POST. Replaceable for tests.
using HttpTransport =
    std::function<HttpResult(const HttpBackendConfig& cfg, const std::string& body)>;

HttpTransport default_transport();

class HttpBackend final : public Backend {
public:
  explicit HttpBackend(HttpBackendConfig cfg, HttpTransport transport = default_transport(),
                       std::function<void(std::chrono::milliseconds)> sleeper = {});

  BackendResponse query(const BackendQuery& q) override;

  [[nodiscard]] std::uint64_t attempts() const noexcept { return attempts_.load(); }

private:
  HttpBackendConfig cfg_;
  HttpTransport transport_;
  std::function<void(std::chrono::milliseconds)> sleep_;
  TokenBucket bucket_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace lbap
