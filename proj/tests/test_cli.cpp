#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome cli(const std::string& args, const fs::path& scratch, const std::string& env = {}) {
  const auto log = scratch / "cli.log";
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(MASKCL_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.output = test::slurp(log);
  return o;
}

std::string bundle_text(const fs::path& dir) {
  return test::slurp(dir / "meta.json") + test::slurp(dir / "truth.json") + test::slurp(dir / "responses.csv");
}

}  // namespace

TEST(CliGenerate, SameFlagsGiveByteEqualBundles) {
  test::TempDir dir("cli-gen");
  const auto a = dir.path / "a", b = dir.path / "b";
  ASSERT_EQ(cli("--seed 5 --out " + a.string() + " generate --preset small", dir.path).code, 0);
  ASSERT_EQ(cli("--seed 5 --out " + b.string() + " generate --preset small", dir.path).code, 0);
  EXPECT_EQ(bundle_text(a), bundle_text(b));
  EXPECT_FALSE(test::slurp(a / "responses.csv").empty());
}

TEST(CliGenerate, MediumPresetHasDimension210) {
  test::TempDir dir("cli-medium");
  const auto out = cli("--seed 7 --out " + (dir.path / "m").string() + " generate --preset medium", dir.path);
  ASSERT_EQ(out.code, 0) << out.output;
  EXPECT_NE(out.output.find("n 21  D 210"), std::string::npos) << out.output;
}

TEST(CliGenerate, CustomSizeHasDimensionSix) {
  test::TempDir dir("cli-n4");
  const auto out = cli("--seed 1 --out " + (dir.path / "c").string() + " generate --n 4 --density 0.3", dir.path);
  ASSERT_EQ(out.code, 0) << out.output;
  EXPECT_NE(out.output.find("D 6 "), std::string::npos) << out.output;
}

TEST(CliGenerate, UnwritablePathIsIoError) {
  test::TempDir dir("cli-io");
  EXPECT_EQ(cli("--out /proc/maskcl-cannot-exist/x generate --preset tiny", dir.path).code, 3);
}

TEST(CliGenerate, BadValuesAreValidationErrors) {
  test::TempDir dir("cli-bad");
  EXPECT_EQ(cli("--out " + (dir.path / "x").string() + " generate --density 2", dir.path).code, 2);
  EXPECT_EQ(cli("generate --preset enormous", dir.path).code, 2);
  EXPECT_EQ(cli("frobnicate", dir.path).code, 2);
}

class CliLearn : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(cli("--seed 3 --out " + tiny().string() + " generate --preset tiny", dir.path).code, 0);
  }
  fs::path tiny() const { return dir.path / "tiny"; }
  test::TempDir dir{"cli-learn"};
};

TEST_F(CliLearn, TinyRuleRunReachesZeroLoss) {
  const auto out = cli("--seed 3 --out " + (dir.path / "r").string() + " learn " + tiny().string() +
                           " --agent-backend rule --max-fe 2000",
                       dir.path);
  ASSERT_EQ(out.code, 0) << out.output;
  EXPECT_NE(out.output.find("final loss 0 "), std::string::npos) << out.output;
  for (const char* f : {"result.json", "convergence.csv", "decisions.jsonl", "best_graph.json"}) {
    EXPECT_TRUE(fs::exists(dir.path / "r" / f)) << f;
  }
  EXPECT_EQ(test::slurp(dir.path / "r" / "best_graph.json"), test::slurp(tiny() / "truth.json"));
}

TEST_F(CliLearn, SameSeedGivesIdenticalResult) {
  const std::string args = " learn " + tiny().string() + " --max-fe 600";
  ASSERT_EQ(cli("--seed 3 --out " + (dir.path / "r1").string() + args, dir.path).code, 0);
  ASSERT_EQ(cli("--seed 3 --out " + (dir.path / "r2").string() + args, dir.path).code, 0);
  for (const char* f : {"result.json", "convergence.csv", "decisions.jsonl"}) {
    EXPECT_EQ(test::slurp(dir.path / "r1" / f), test::slurp(dir.path / "r2" / f)) << f;
  }
}

TEST_F(CliLearn, AgentsOffLogsOnlyFrozenDecisions) {
  ASSERT_EQ(cli("--out " + (dir.path / "off").string() + " learn " + tiny().string() +
                    " --agent-backend off --max-fe 200",
                dir.path)
                .code,
            0);
  std::istringstream lines(test::slurp(dir.path / "off" / "decisions.jsonl"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j["frozen"].get<bool>());
    ++count;
  }
  EXPECT_GT(count, 0u);
}

TEST_F(CliLearn, RecoveryWithoutTruthIsConfigError) {
  fs::remove(tiny() / "truth.json");
  const auto out = cli("learn " + tiny().string() + " --fitness recovery --out " + (dir.path / "x").string(), dir.path);
  EXPECT_EQ(out.code, 2) << out.output;
  EXPECT_NE(out.output.find("ground truth"), std::string::npos);
}

TEST_F(CliLearn, MissingDatasetIsIoError) {
  EXPECT_EQ(cli("learn " + (dir.path / "nope").string(), dir.path).code, 3);
}

TEST_F(CliLearn, LlmBackendWithoutTokenIsValidationError) {
  const auto out = cli("learn " + tiny().string() + " --agent-backend llm --llm-key-env MASKCL_UNSET_TOKEN_VAR",
                       dir.path, "env -u MASKCL_UNSET_TOKEN_VAR");
  EXPECT_EQ(out.code, 2) << out.output;
  EXPECT_NE(out.output.find("MASKCL_UNSET_TOKEN_VAR"), std::string::npos);
}

TEST_F(CliLearn, FlagsOverrideConfigFile) {
  std::ofstream(dir.path / "cfg.json") << R"({"engine": {"population": 8, "max_fe": 100}})";
  ASSERT_EQ(cli("--config " + (dir.path / "cfg.json").string() + " --out " + (dir.path / "c").string() + " learn " +
                    tiny().string() + " --population 12",
                dir.path)
                .code,
            0);
  const auto j = nlohmann::json::parse(test::slurp(dir.path / "c" / "result.json"));
  EXPECT_EQ(j["engine"]["population"], 12);
  EXPECT_EQ(j["engine"]["max_fe"], 100);
}

TEST_F(CliLearn, BenchmarkAndAblate) {
  std::ofstream(dir.path / "plan.json") << R"({"datasets": ["tiny"], "variants": ["full", "-MAS"],
      "seeds": [1, 2, 3], "engine": {"max_fe": 200}, "output_dir": "bench"})";
  const auto bench = cli("--out " + (dir.path / "bench").string() + " benchmark " + (dir.path / "plan.json").string(),
                         dir.path);
  ASSERT_EQ(bench.code, 0) << bench.output;
  EXPECT_TRUE(fs::exists(dir.path / "bench" / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir.path / "bench" / "tiny" / "-MAS" / "seed-2" / "convergence.csv"));

  const auto abl = cli("--out " + (dir.path / "abl").string() + " ablate " + tiny().string() +
                           " --seeds 3 --max-fe 200 --jobs 2",
                       dir.path);
  ASSERT_EQ(abl.code, 0) << abl.output;
  EXPECT_TRUE(fs::exists(dir.path / "abl" / "ablation.csv"));
  EXPECT_NE(abl.output.find("-NFA"), std::string::npos);
}

TEST_F(CliLearn, BenchmarkWithFailedCellExitsNonzero) {
  std::ofstream(dir.path / "plan.json") << R"({"datasets": ["tiny", "missing"], "variants": ["full"],
      "seeds": [1, 2, 3], "engine": {"max_fe": 100}})";
  const auto out = cli("--out " + (dir.path / "b").string() + " benchmark " + (dir.path / "plan.json").string(),
                       dir.path);
  EXPECT_EQ(out.code, 4) << out.output;
}

TEST_F(CliLearn, EmptyPlanIsValidationError) {
  std::ofstream(dir.path / "plan.json") << "{}";
  EXPECT_EQ(cli("benchmark " + (dir.path / "plan.json").string(), dir.path).code, 2);
}
