#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lbap/domain.hpp"

namespace lbap {

// Scoring method. The first five differ only in which likelihood factors
// refine the prior; Prompt and Binary are query-driven baselines that use the
// prior solely to rank options.
enum class MethodMode { Full, SceneOnly, WorldOnly, PriorOnly, NoHelp, Prompt, Binary };

std::string_view to_string(MethodMode mode);
std::optional<MethodMode> method_mode_from_string(std::string_view s);

[[nodiscard]] bool uses_scene(MethodMode mode);
[[nodiscard]] bool uses_world(MethodMode mode);
[[nodiscard]] bool uses_threshold(MethodMode mode);

// prior_i * (applicable factors), renormalized. Throws DegenerateMass when the
// products carry no mass and InvariantViolation on misaligned inputs.
std::vector<double> compute_posterior(std::span<const double> prior, std::span<const double> scene_lik,
                                      std::span<const double> world_lik, MethodMode mode);

// First index of the maximum.
std::size_t argmax(std::span<const double> values);

// Labels whose posterior strictly exceeds t; the argmax label alone when none
// does. t must lie in (0,1).
PredictionSet build_prediction_set(std::span<const double> posterior, const std::vector<std::string>& labels,
                                   double threshold);

Decision decide(const PredictionSet& set);

}  // namespace lbap
