#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace lbap {

// Every failure surfaced by the library derives from Error. The CLI maps the
// category to a process exit code.
class Error : public std::runtime_error {
public:
  enum class Category { Usage, Backend, Data, Internal };

  Error(Category category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  [[nodiscard]] Category category() const noexcept { return category_; }

private:
  Category category_;
};

class UsageError : public Error {
public:
  explicit UsageError(const std::string& message) : Error(Category::Usage, message) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& source, std::size_t line, const std::string& message)
      : Error(Category::Data, source + ":" + std::to_string(line) + ": " + message), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class InvariantViolation : public Error {
public:
  InvariantViolation(std::string field, const std::string& message)
      : Error(Category::Data, field + ": " + message), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

// Retryable transport-level failure (network, HTTP status, malformed payload).
class TransportError : public Error {
public:
  explicit TransportError(const std::string& message) : Error(Category::Backend, message) {}
};

// The replay table has no entry for a query. Never retried.
class ReplayMiss : public Error {
public:
  explicit ReplayMiss(std::string key_hash)
      : Error(Category::Backend, "replay miss: no fixture for query hash " + key_hash),
        key_hash_(std::move(key_hash)) {}

  [[nodiscard]] const std::string& key_hash() const noexcept { return key_hash_; }

private:
  std::string key_hash_;
};

class EmptyGeneration : public Error {
public:
  explicit EmptyGeneration(const std::string& message) : Error(Category::Data, message) {}
};

class NoLabelMass : public Error {
public:
  explicit NoLabelMass(const std::string& message) : Error(Category::Data, message) {}
};

class DegenerateMass : public Error {
public:
  explicit DegenerateMass(const std::string& message) : Error(Category::Data, message) {}
};

class ZeroArea : public Error {
public:
  ZeroArea() : Error(Category::Data, "iou: both boxes have zero area") {}
};

class DetectorUnavailable : public Error {
public:
  explicit DetectorUnavailable(const std::string& message) : Error(Category::Usage, message) {}
};

class InsufficientCalibration : public Error {
public:
  InsufficientCalibration(std::size_t have, std::size_t need)
      : Error(Category::Data, "insufficient calibration data: have n = " + std::to_string(have) +
                                  ", need n \xE2\x89\xA5 " + std::to_string(need)),
        have_(have),
        need_(need) {}

  [[nodiscard]] std::size_t have() const noexcept { return have_; }
  [[nodiscard]] std::size_t need() const noexcept { return need_; }

private:
  std::size_t have_;
  std::size_t need_;
};

}  // namespace lbap
