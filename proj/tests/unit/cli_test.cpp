#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mock_llm.hpp"
#include "pipeline_fixture.hpp"

using namespace ssbc;
using ssbc::testing::TempDir;

namespace {
struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err, [] { return std::make_unique<mock::MockTransport>(); });
  return {code, out.str(), err.str()};
}

std::string write_config(const TempDir& dir) {
  const auto path = dir / "config.json";
  std::ofstream(path) << ssbc::testing::mock_config_json(dir / "runs", "r1").dump(2);
  return path.string();
}
}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"frobnicate"}).code, 0);
  EXPECT_EQ(run({"run", "bogus", "--config", "x"}).code, 2);
  const auto r = run({"shard", "--runs-root", "/nonexistent", "--run", "zz"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no --config"), std::string::npos);
}

TEST(Cli, RunAllPrintsStagesAndCounters) {
  TempDir dir;
  const auto cfg = write_config(dir);
  auto r = run({"--config", cfg, "run", "all"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ingest: "), std::string::npos);
  EXPECT_NE(r.out.find("report: "), std::string::npos);
  EXPECT_EQ(r.out.find("network_calls=0 "), std::string::npos);

  // manifest snapshot stands in for --config
  r = run({"--runs-root", (dir / "runs").string(), "--run", "r1", "shard"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("shard: skipped"), std::string::npos);
  EXPECT_NE(r.out.find("network_calls=0 cache_hits=0"), std::string::npos);

  r = run({"--config", cfg, "all", "--force"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("network_calls=0 "), std::string::npos);

  r = run({"--config", cfg, "probe", "select", "--k", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("probe select: "), std::string::npos);
}

TEST(Cli, StageFlagsAndAgreement) {
  TempDir dir;
  const auto cfg = write_config(dir);
  ASSERT_EQ(run({"--config", cfg, "all"}).code, 0);
  auto r = run({"--config", cfg, "annotate", "--temps", "0,0.5,1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("annotate: skipped"), std::string::npos);
  EXPECT_NE(run({"--config", cfg, "annotate", "--temps", "0,x,1"}).code, 0);

  std::ofstream(dir / "human.jsonl") << R"({"conv_id":"p1","turn":0,"labels":["Advice"]})" << "\n";
  r = run({"--config", cfg, "agreement", "--human", (dir / "human.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("out of date"), std::string::npos) << r.err;
  ASSERT_EQ(run({"--config", cfg, "consensus"}).code, 0);

  r = run({"--config", cfg, "agreement", "--human", (dir / "human.jsonl").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("agreement: "), std::string::npos);

  r = run({"--config", cfg, "report", "--vignette", "nope"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unknown conversation"), std::string::npos);
}

TEST(Cli, DependencyFailureExitsNonZero) {
  TempDir dir;
  const auto cfg = write_config(dir);
  const auto r = run({"--config", cfg, "simulate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("requires"), std::string::npos);
}
