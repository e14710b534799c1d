#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lbap/backend.hpp"
#include "lbap/domain.hpp"
#include "lbap/environment.hpp"

namespace lbap {

// Behavior of the simulated planner LLM. Every response is a pure function of
// (profile, scenario, query), so runs replay exactly without fixtures.
struct SyntheticProfile {
  std::uint64_t seed = 0;
  std::size_t options = 4;
  double hallucination_rate = 0.3;  // per generated slot
  double infeasible_rate = 0.3;     // chance that one non-true slot is self-referential
  double miss_rate = 0.05;          // chance the generation omits every true action

  // Prior: the true options share `true_mass` on average (logit-normal across
  // scenarios); the remaining mass is split by class weight and noise.
  double true_mass = 0.55;
  double true_mass_spread = 1.0;
  double hallucination_weight = 2.5;
  double infeasible_weight = 1.5;
  double wrong_weight = 1.0;
  double not_listed_weight = 0.05;
  double option_noise = 0.6;

  // World-knowledge verdicts: mean P(True) per class, Beta concentration.
  double knowledge_true = 0.9;
  double knowledge_wrong = 0.8;
  double knowledge_hallucinated = 0.3;
  double knowledge_infeasible = 0.05;
  double knowledge_concentration = 20.0;

  void validate() const;
};

enum class OptionClass { True, Wrong, Infeasible, Hallucinated, NotListed };

std::string_view to_string(OptionClass c);

struct PlannedOption {
  std::string text;
  OptionClass cls = OptionClass::Wrong;
};

class SyntheticBackend final : public Backend {
public:
  SyntheticBackend(SyntheticProfile profile, Environment env, const std::vector<Scenario>& scenarios);

  BackendResponse query(const BackendQuery& q) override;

  // The candidate list the generation query returns for a scenario.
  [[nodiscard]] std::vector<PlannedOption> plan(const Scenario& scenario) const;

  // Class of an arbitrary option text relative to a scenario.
  [[nodiscard]] OptionClass classify(const Scenario& scenario, std::string_view option_text) const;

  // Prior the scoring query encodes for the given options (labels in order).
  [[nodiscard]] std::vector<double> prior_for(const Scenario& scenario,
                                              const std::vector<std::string>& option_texts) const;

  [[nodiscard]] const SyntheticProfile& profile() const noexcept { return profile_; }

private:
  [[nodiscard]] const Scenario& scenario_for(const BackendQuery& q) const;
  [[nodiscard]] std::map<std::string, std::string> options_in_prompt(const BackendQuery& q) const;
  [[nodiscard]] BackendResponse generate(const Scenario& s) const;
  [[nodiscard]] BackendResponse score(const Scenario& s, const BackendQuery& q) const;
  [[nodiscard]] BackendResponse knowledge(const Scenario& s, const BackendQuery& q) const;
  [[nodiscard]] BackendResponse prompt_set(const Scenario& s, const BackendQuery& q) const;
  [[nodiscard]] BackendResponse binary(const Scenario& s, const BackendQuery& q) const;
  [[nodiscard]] std::uint64_t stream(const Scenario& s, std::string_view purpose, std::string_view item = {}) const;

  SyntheticProfile profile_;
  Environment env_;
  std::map<std::string, Scenario> scenarios_;
};

}  // namespace lbap
