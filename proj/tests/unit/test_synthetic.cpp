#include <gtest/gtest.h>

#include "lbap/errors.hpp"
#include "lbap/evalharness.hpp"
#include "lbap/synthetic.hpp"

using namespace lbap;

namespace {

SyntheticBackend backend_with(double h, std::uint64_t seed, const std::vector<Scenario>& scenarios) {
  SyntheticProfile p;
  p.seed = seed;
  p.hallucination_rate = h;
  return SyntheticBackend(p, tabletop_environment(), scenarios);
}

std::size_t out_of_scene(const Environment& env, const Scenario& s, const std::string& text) {
  std::size_t n = 0;
  for (const auto& o : env.mentions(text)) n += s.scene.contains(o) ? 0 : 1;
  return n;
}

}  // namespace

TEST(Synthetic, ZeroHallucinationStaysInScene) {
  const auto env = tabletop_environment();
  const auto scenarios = generate_tabletop(300, 1, {});
  auto backend = backend_with(0.0, 3, scenarios);
  const auto pipeline = Pipeline::for_environment("tabletop");
  for (const auto& s : scenarios) {
    const auto c = generate_candidates(s, backend, pipeline.templates, env, pipeline.mcqa);
    for (const auto& cand : c) EXPECT_EQ(out_of_scene(env, s, cand.text), 0u) << cand.text;
  }
}

TEST(Synthetic, FullHallucinationMentionsExactlyOneOutsider) {
  const auto env = tabletop_environment();
  const auto scenarios = generate_tabletop(300, 2, {});
  auto backend = backend_with(1.0, 3, scenarios);
  const auto pipeline = Pipeline::for_environment("tabletop");
  for (const auto& s : scenarios) {
    const auto c = generate_candidates(s, backend, pipeline.templates, env, pipeline.mcqa);
    ASSERT_EQ(c.size(), 4u);
    for (const auto& cand : c) EXPECT_EQ(out_of_scene(env, s, cand.text), 1u) << cand.text;
  }
}

TEST(Synthetic, SeededDeterminism) {
  const auto scenarios = generate_tabletop(50, 4, {});
  auto a = backend_with(0.3, 7, scenarios);
  auto b = backend_with(0.3, 7, scenarios);
  auto c = backend_with(0.3, 8, scenarios);
  const auto pipeline = Pipeline::for_environment("tabletop");
  bool differs = false;
  for (const auto& s : scenarios) {
    BackendQuery q{QueryKind::GenerateCandidates, render_generation_prompt(pipeline.templates, s), {}, s.id};
    EXPECT_EQ(a.query(q), b.query(q));
    differs = differs || a.query(q) != c.query(q);
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, ScoringIsAValidDistributionIndependentOfOrder) {
  const auto env = tabletop_environment();
  const auto scenarios = generate_tabletop(100, 5, {});
  auto backend = backend_with(0.3, 1, scenarios);
  const auto pipeline = Pipeline::for_environment("tabletop");
  for (const auto& s : scenarios) {
    auto c = generate_candidates(s, backend, pipeline.templates, env, pipeline.mcqa);
    const auto prior = score_prior(build_prompt_bundle(pipeline.templates, s, c), s, backend);
    double sum = 0.0;
    for (double p : prior) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);

    std::vector<std::string> texts;
    for (auto it = c.rbegin(); it != c.rend(); ++it) texts.push_back(it->text);
    const auto reordered = make_candidates(texts, env, pipeline.mcqa);
    const auto prior2 = score_prior(build_prompt_bundle(pipeline.templates, s, reordered), s, backend);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(prior2[c.size() - 1 - i], prior[i], 1e-12);
  }
}

TEST(Synthetic, KnowledgeSeparatesClasses) {
  const auto env = tabletop_environment();
  const auto scenarios = generate_tabletop(400, 6, {});
  auto backend = backend_with(0.3, 2, scenarios);
  const auto pipeline = Pipeline::for_environment("tabletop");
  double sum_true = 0, sum_hall = 0;
  int n_true = 0, n_hall = 0;
  for (const auto& s : scenarios) {
    for (const auto& o : backend.plan(s)) {
      CandidateAction c{"A", o.text, env.mentions(o.text)};
      const double k = knowledge_score(c, s.scene, pipeline.knowledge, backend, env, s.id);
      if (o.cls == OptionClass::True) sum_true += k, ++n_true;
      if (o.cls == OptionClass::Hallucinated) sum_hall += k, ++n_hall;
    }
  }
  ASSERT_GT(n_true, 0);
  ASSERT_GT(n_hall, 0);
  EXPECT_GT(sum_true / n_true, 0.8);
  EXPECT_LT(sum_hall / n_hall, 0.4);
}

TEST(Synthetic, UnknownScenarioIsABackendError) {
  auto backend = backend_with(0.3, 1, {});
  try {
    backend.query({QueryKind::GenerateCandidates, "p", {}, "nope"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), Error::Category::Backend);
  }
}

TEST(Synthetic, ProfileValidation) {
  SyntheticProfile p;
  p.hallucination_rate = 1.5;
  EXPECT_THROW(p.validate(), InvariantViolation);
  p = {};
  p.true_mass = 1.0;
  EXPECT_THROW(p.validate(), InvariantViolation);
}
