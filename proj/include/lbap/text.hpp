#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lbap::text {

std::string to_lower(std::string_view s);

// Lowercase, trim, and collapse interior whitespace runs to one space.
std::string collapse_whitespace(std::string_view s);

// Lowercase word tokens. Hyphens and apostrophes stay inside a word; every
// other non-alphanumeric byte separates words.
std::vector<std::string> tokenize(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

// 64-bit FNV-1a. Stable across platforms and runs; used for fixture keys and
// for deriving per-item RNG seeds.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::uint64_t mix(std::uint64_t a, std::uint64_t b);

std::string hex64(std::uint64_t v);

}  // namespace lbap::text
