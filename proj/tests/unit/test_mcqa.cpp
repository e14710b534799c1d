#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "lbap/errors.hpp"
#include "lbap/mcqa.hpp"
#include "lbap/scenarios.hpp"

using namespace lbap;

TEST(ParseOptionLines, LetteredCompletion) {
  const auto texts =
      parse_option_lines("A) put blue bowl on yellow block\nB) put green bowl on yellow block");
  EXPECT_EQ(texts, (std::vector<std::string>{"put blue bowl on yellow block", "put green bowl on yellow block"}));
}

TEST(ParseOptionLines, DeduplicatesNormalizedText) {
  const auto texts = parse_option_lines("A) put the red block on the green bowl\n"
                                        "B)   Put the red block  on the green bowl \n"
                                        "C) put the red block on the red bowl\n"
                                        "preamble without a label\n"
                                        "4. put the red block on the yellow bowl");
  EXPECT_EQ(texts.size(), 3u);
  EXPECT_EQ(texts[2], "put the red block on the yellow bowl");
}

TEST(MakeCandidates, LabelsCapAndNotListed) {
  const auto env = tabletop_environment();
  McqaConfig cfg;
  cfg.max_options = 2;
  cfg.include_not_listed = true;
  const auto c = make_candidates({"put red block on green bowl", "put red block on red bowl", "put x on y",
                                  "an option not listed here"},
                                 env, cfg);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].label, "A");
  EXPECT_EQ(c[2].label, "C");
  EXPECT_EQ(c[2].text, "an option not listed here");
  EXPECT_TRUE(c[2].mentioned_objects.empty());
  EXPECT_EQ(c[0].mentioned_objects.size(), 2u);
  EXPECT_TRUE(is_not_listed(c[2], cfg));
  EXPECT_THROW(make_candidates({}, env, cfg), EmptyGeneration);
}

TEST(PromptBundle, ScoringPromptListsEveryOption) {
  const auto env = tabletop_environment();
  const auto templates = builtin_templates("tabletop");
  Scenario s;
  s.id = "x";
  s.instruction = "Put the cube on the green bowl.";
  s.scene.description = "On the table there are a red block and a green bowl.";
  const auto c = make_candidates({"put red block on green bowl", "put green bowl on red block"}, env, {});
  const auto bundle = build_prompt_bundle(templates, s, c);
  EXPECT_NE(bundle.scoring_prompt.find("\nA) put red block on green bowl\n"), std::string::npos);
  EXPECT_NE(bundle.scoring_prompt.find("\nB) put green bowl on red block\n"), std::string::npos);
  EXPECT_NE(bundle.generation_prompt.find("Put the cube on the green bowl."), std::string::npos);
  EXPECT_EQ(bundle.option_labels, (std::vector<std::string>{"A", "B"}));
}

TEST(GenerateCandidates, CokeDrawerCompletion) {
  const auto env = mobile_environment();
  const auto templates = builtin_templates("mobile");
  const auto scenarios = load_scenarios(LBAP_DATA_DIR "/scenarios/mobile_tasks.jsonl", env);
  const auto it = std::find_if(scenarios.begin(), scenarios.end(),
                               [](const Scenario& s) { return s.instruction == "Put the Coke in the drawer."; });
  ASSERT_NE(it, scenarios.end());
  BackendQuery q{QueryKind::GenerateCandidates, render_generation_prompt(templates, *it), {}, it->id};
  ReplayBackend replay({{q.key_hash(), q.kind,
                         "\nA) put the Coke in the top drawer\nB) put the Coke in the bottom drawer\n"
                         "C) put the apple in the top drawer\nD) put the Coke in the landfill bin",
                         {}}});
  McqaConfig cfg;
  cfg.include_not_listed = env.include_not_listed;
  const auto c = generate_candidates(*it, replay, templates, env, cfg);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].text, "put the Coke in the top drawer");
  EXPECT_EQ(c[1].text, "put the Coke in the bottom drawer");
  EXPECT_TRUE(is_true_action(*it, c[0].text, env));
  EXPECT_TRUE(is_true_action(*it, c[1].text, env));
  EXPECT_FALSE(is_true_action(*it, c[2].text, env));
  EXPECT_EQ(c[4].label, "E");
}

TEST(PriorFromLogprobs, MatchesIndependentSoftmax) {
  // exp/normalize evaluated outside the library
  const auto p = prior_from_logprobs({"A", "B"}, {"", {{"A", -0.105}, {"B", -2.303}}});
  EXPECT_NEAR(p[0], 0.9000697663968664, 1e-12);
  EXPECT_NEAR(p[1], 0.09993023360313365, 1e-12);
}

TEST(PriorFromLogprobs, SingleLabelAndSymmetry) {
  EXPECT_EQ(prior_from_logprobs({"A"}, {"", {{"A", -3.0}}}), std::vector<double>{1.0});
  const auto p = prior_from_logprobs({"A", "B", "C"}, {"", {{"A", -1.0}, {"B", -1.0}, {"C", -1.0}}});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(PriorFromLogprobs, MissingLabelsGetTheFloor) {
  const auto p = prior_from_logprobs({"A", "B"}, {"", {{"A", 0.0}}});
  EXPECT_NEAR(p[1], 1e-5 / (1.0 + 1e-5), 1e-15);
  EXPECT_THROW(prior_from_logprobs({"A", "B"}, {"", {{"Z", -0.1}}}), NoLabelMass);
}

TEST(PriorFromLogprobs, ShiftInvariantAndPermutationEquivariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lp(-12.0, 0.0);
  std::uniform_real_distribution<double> shift(-5.0, 0.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const auto labels = option_labels(n);
    BackendResponse r;
    for (const auto& l : labels) r.token_logprobs[l] = lp(rng);
    const auto p = prior_from_logprobs(labels, r);

    BackendResponse shifted;
    const double c = shift(rng);
    for (const auto& [k, v] : r.token_logprobs) shifted.token_logprobs[k] = v + c;
    const auto q = prior_from_logprobs(labels, shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(p[i], q[i], 1e-12);
      sum += p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    BackendResponse permuted;
    for (std::size_t i = 0; i < n; ++i) permuted.token_logprobs[labels[i]] = r.token_logprobs.at(labels[perm[i]]);
    const auto pp = prior_from_logprobs(labels, permuted);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(pp[i], p[perm[i]], 1e-15);
  }
}
