#include "lbap/posterior.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "lbap/errors.hpp"

namespace lbap {

namespace {

constexpr std::array<std::pair<MethodMode, std::string_view>, 7> kModeNames{{
    {MethodMode::Full, "full"},
    {MethodMode::SceneOnly, "scene-only"},
    {MethodMode::WorldOnly, "world-only"},
    {MethodMode::PriorOnly, "prior-only"},
    {MethodMode::NoHelp, "no-help"},
    {MethodMode::Prompt, "prompt"},
    {MethodMode::Binary, "binary"},
}};

}  // namespace

std::string_view to_string(MethodMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::optional<MethodMode> method_mode_from_string(std::string_view s) {
  for (const auto& [m, name] : kModeNames) {
    if (name == s) return m;
  }
  return std::nullopt;
}

bool uses_scene(MethodMode mode) { return mode == MethodMode::Full || mode == MethodMode::SceneOnly; }
bool uses_world(MethodMode mode) { return mode == MethodMode::Full || mode == MethodMode::WorldOnly; }
bool uses_threshold(MethodMode mode) {
  return mode == MethodMode::Full || mode == MethodMode::SceneOnly || mode == MethodMode::WorldOnly ||
         mode == MethodMode::PriorOnly;
}

std::vector<double> compute_posterior(std::span<const double> prior, std::span<const double> scene_lik,
                                      std::span<const double> world_lik, MethodMode mode) {
  const std::size_t n = prior.size();
  if (n == 0) throw InvariantViolation("prior", "empty");
  if (scene_lik.size() != n || world_lik.size() != n) {
    throw InvariantViolation("likelihoods", "length differs from prior");
  }
  const bool scene = uses_scene(mode);
  const bool world = uses_world(mode);

  std::vector<double> out(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = prior[i];
    if (scene) v *= scene_lik[i];
    if (world) v *= world_lik[i];
    out[i] = v;
    total += v;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateMass("posterior products carry no mass; cannot normalize");
  }
  for (auto& v : out) v /= total;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

PredictionSet build_prediction_set(std::span<const double> posterior, const std::vector<std::string>& labels,
                                   double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvariantViolation("threshold", "must lie in (0,1)");
  if (posterior.empty() || posterior.size() != labels.size()) {
    throw InvariantViolation("posterior", "must be non-empty and aligned with labels");
  }
  PredictionSet set;
  set.threshold = threshold;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    if (posterior[i] > threshold) set.members.push_back(labels[i]);
  }
  if (set.members.empty()) {
    set.members.push_back(labels[argmax(posterior)]);
    set.fallback = true;
  }
  return set;
}

Decision decide(const PredictionSet& set) {
  if (set.members.size() == 1) return Execute{set.members.front()};
  return AskHelp{set};
}

}  // namespace lbap
