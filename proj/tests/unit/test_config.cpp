#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lbap/config.hpp"
#include "lbap/errors.hpp"

using namespace lbap;

namespace {

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "lbap_config_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(RunConfig, ShippedSyntheticConfigsLoad) {
  for (const char* name : {"synthetic_tabletop.json", "synthetic_mobile.json"}) {
    const auto cfg = load_run_config(std::filesystem::path(LBAP_DATA_DIR) / "config" / name);
    EXPECT_EQ(cfg.backend.kind, BackendKind::Synthetic);
    EXPECT_TRUE(cfg.seed.has_value());
    EXPECT_NO_THROW(cfg.validate());
  }
}

TEST(RunConfig, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_run_config(R"({"environment":"tabletop","temprature":0})", "."), UsageError);
  EXPECT_THROW(parse_run_config(R"({"backend":{"kind":"synthetic","synthetic":{"halucination_rate":0.1}}})", "."),
               UsageError);
}

TEST(RunConfig, ApiKeyInFileIsRefused) {
  try {
    parse_run_config(R"({"backend":{"kind":"http","api_key":"sk-123"}})", ".");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("api_key_env"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("sk-123"), std::string::npos);
  }
}

TEST(RunConfig, RelativePathsResolveAgainstTheConfigDirectory) {
  const auto dir = scratch();
  std::ofstream(dir / "fx.jsonl") << "";
  std::ofstream(dir / "c.json") << R"({"backend":{"kind":"replay","fixtures":"fx.jsonl"}})";
  const auto cfg = load_run_config(dir / "c.json");
  EXPECT_EQ(cfg.backend.fixtures, dir / "fx.jsonl");
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfig, MissingFixturesIsADataError) {
  const auto cfg = parse_run_config(R"({"backend":{"kind":"replay","fixtures":"nope.jsonl"}})", scratch());
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), Error::Category::Data);
  }
}

TEST(RunConfig, RangesAreChecked) {
  auto cfg = parse_run_config(R"({"seed":1,"threshold":1.5})", ".");
  EXPECT_THROW(cfg.validate(), InvariantViolation);
  cfg = parse_run_config(R"({"seed":1,"workers":0})", ".");
  EXPECT_THROW(cfg.validate(), InvariantViolation);
  cfg = parse_run_config(R"({"mode":"full"})", ".");
  EXPECT_THROW(cfg.validate(), UsageError);  // synthetic without seed
  EXPECT_THROW(parse_run_config(R"({"mode":"bayes"})", "."), UsageError);
  EXPECT_THROW(parse_run_config("{not json", "."), ParseError);
}

TEST(RunConfig, ThresholdGridDefaultsAndOverride) {
  auto cfg = parse_run_config(R"({"seed":1})", ".");
  EXPECT_EQ(cfg.threshold_grid(), default_threshold_grid());
  cfg = parse_run_config(R"({"seed":1,"thresholds":[0.1,0.2]})", ".");
  EXPECT_EQ(cfg.threshold_grid(), (std::vector<double>{0.1, 0.2}));
}

TEST(RunConfig, PipelineTakesGroundingSettings) {
  const auto cfg = parse_run_config(R"({"seed":3,"epsilon":0.01,"grounding":"perception","max_options":3})", ".");
  const auto p = build_pipeline(cfg);
  EXPECT_DOUBLE_EQ(p.grounding.epsilon, 0.01);
  EXPECT_EQ(p.grounding.mode, GroundingMode::Perception);
  EXPECT_NE(p.detector, nullptr);
  EXPECT_EQ(p.mcqa.max_options, 3u);
}

TEST(RunConfig, CacheDirServesRepeatQueries) {
  const auto dir = scratch() / "cache";
  std::filesystem::remove_all(dir);
  auto cfg = parse_run_config(R"({"seed":3})", ".");
  cfg.cache_dir = dir;
  const auto scenarios = generate_tabletop(3, 1, {});
  const auto pipeline = build_pipeline(cfg);
  {
    auto backend = build_backend(cfg, scenarios);
    for (const auto& s : scenarios) generate_candidates(s, *backend, pipeline.templates, pipeline.env, pipeline.mcqa);
  }
  EXPECT_EQ(read_fixtures(dir / "llm_cache.jsonl").size(), scenarios.size());
}
