#include <gtest/gtest.h>

#include "lbap/domain.hpp"
#include "lbap/environment.hpp"
#include "lbap/errors.hpp"

using namespace lbap;

namespace {

std::vector<std::string> names(const std::vector<ObjectRef>& objs) {
  std::vector<std::string> out;
  for (const auto& o : objs) out.push_back(o.canonical_name());
  return out;
}

}  // namespace

TEST(ParseObjects, TwoColoredObjects) {
  const auto env = tabletop_environment();
  EXPECT_EQ(names(env.mentions("put the blue bowl on the yellow block")),
            (std::vector<std::string>{"blue bowl", "yellow block"}));
}

TEST(ParseObjects, EmptyText) {
  EXPECT_TRUE(parse_objects("", tabletop_environment().lexicon).empty());
}

TEST(ParseObjects, UngroundedAttributeStillParsed) {
  EXPECT_EQ(names(tabletop_environment().mentions("pick up the gold bowl")), (std::vector<std::string>{"gold bowl"}));
}

TEST(ParseObjects, UnknownModifierBeforeKnownNoun) {
  EXPECT_EQ(names(tabletop_environment().mentions("put the magenta block on the red bowl")),
            (std::vector<std::string>{"magenta block", "red bowl"}));
}

TEST(ParseObjects, SynonymsNormalize) {
  const auto env = tabletop_environment();
  EXPECT_EQ(names(env.mentions("move the navy cube into the green container")),
            (std::vector<std::string>{"blue block", "green bowl"}));
}

TEST(ParseObjects, PluralsAndMultiWordNouns) {
  const auto env = mobile_environment();
  EXPECT_EQ(names(env.mentions("put two red blocks on the bowl")), (std::vector<std::string>{"bowl"}));
  EXPECT_EQ(names(env.mentions("bring the bag of rice chips and the metal bowl")),
            (std::vector<std::string>{"rice chips", "metal bowl"}));
  EXPECT_EQ(names(tabletop_environment().mentions("put two red blocks on the green bowl")),
            (std::vector<std::string>{"red block", "green bowl"}));
}

TEST(ParseObjects, IdempotentOnCanonicalNames) {
  for (const auto& env : {tabletop_environment(), mobile_environment()}) {
    for (const char* text : {"put the blue bowl on the yellow block", "pick up the gold bowl",
                             "put the coke in the top drawer", "throw the dirty sponge into the landfill bin",
                             "put the large red wooden block left of the purple plate"}) {
      for (const auto& o : env.mentions(text)) {
        const auto again = parse_objects(o.canonical_name(), env.lexicon);
        ASSERT_EQ(again.size(), 1u) << o.canonical_name();
        EXPECT_EQ(again.front(), o);
      }
    }
  }
}

TEST(ObjectRef, CanonicalNameSortsAttributes) {
  ObjectRef a({"wooden", "red"}, "block");
  ObjectRef b({"red", "wooden"}, "block");
  EXPECT_EQ(a.canonical_name(), "red wooden block");
  EXPECT_EQ(a, b);
}

TEST(CandidateSet, ValidateChecksSumsAndRanges) {
  CandidateSet set;
  set.candidates = {{"A", "put red block on green bowl", {}}, {"B", "put red block on red block", {}}};
  set.prior = {0.6, 0.4};
  set.posterior = {0.6, 0.4};
  set.scene_lik = {1.0, 1.0};
  set.world_lik = {1.0, 0.5};
  EXPECT_NO_THROW(set.validate());
  set.prior = {0.6, 0.41};
  EXPECT_THROW(set.validate(), InvariantViolation);
  set.prior = {0.6, 0.4};
  set.world_lik = {1.0, 0.0};
  EXPECT_THROW(set.validate(), InvariantViolation);
  set.world_lik = {1.0, 1.0};
  set.candidates[1].label = "A";
  EXPECT_THROW(set.validate(), InvariantViolation);
}

TEST(SceneContext, RejectsDuplicatesAndBadDetections) {
  SceneContext scene;
  scene.objects = {ObjectRef({"red"}, "block"), ObjectRef({"red"}, "block")};
  EXPECT_THROW(scene.validate(), InvariantViolation);
  scene.objects.pop_back();
  scene.detections = std::vector<Detection>{{ObjectRef({"red"}, "block"), Box{0.2, 0.2, 0.1, 0.4}, 0.5}};
  EXPECT_THROW(scene.validate(), InvariantViolation);
  scene.detections = std::vector<Detection>{{ObjectRef({"red"}, "block"), Box{0.1, 0.2, 0.3, 0.4}, 1.5}};
  EXPECT_THROW(scene.validate(), InvariantViolation);
}

TEST(Ambiguity, NamesRoundTrip) {
  for (const char* name : {"attribute", "numeric", "spatial", "single-label", "creative-single-label", "multi-label",
                           "creative-multi-label", "spatially-ambiguous", "unsafe", "winograd", "none"}) {
    const auto a = ambiguity_from_string(name);
    ASSERT_TRUE(a.has_value()) << name;
    EXPECT_EQ(to_string(*a), name);
  }
  EXPECT_FALSE(ambiguity_from_string("vague").has_value());
}

TEST(Scenario, ValidateRequiresTruthAndInstruction) {
  Scenario s;
  s.id = "x";
  s.instruction = "put it somewhere";
  EXPECT_THROW(s.validate(), InvariantViolation);
  s.true_actions = {"put red block on green bowl"};
  EXPECT_NO_THROW(s.validate());
  s.instruction.clear();
  EXPECT_THROW(s.validate(), InvariantViolation);
}

TEST(Environment, CanonicalActionDropsArticlesAndSynonyms) {
  const auto env = tabletop_environment();
  EXPECT_EQ(env.canonical_action("Place the Cube on the Container"), "put block on bowl");
  EXPECT_EQ(env.canonical_action("put  a red block  to the left of the green bowl"),
            "put red block to left of green bowl");
}

TEST(Environment, SurfacePhrases) {
  const auto env = mobile_environment();
  EXPECT_EQ(env.surface_phrase(env.object_from_name("apple")), "an apple");
  EXPECT_EQ(env.surface_phrase(env.object_from_name("rice chips")), "a bag of rice chips");
  EXPECT_EQ(env.surface_phrase(env.object_from_name("redbull")), "a RedBull");
  EXPECT_EQ(oxford_join({"x"}), "x");
  EXPECT_EQ(oxford_join({"x", "y"}), "x and y");
  EXPECT_EQ(oxford_join({"x", "y", "z"}), "x, y, and z");
  EXPECT_THROW(environment_by_name("garden"), UsageError);
}
