#include <gtest/gtest.h>

#include <fstream>

#include "pipeline_fixture.hpp"
#include "ssbc/pipeline_config.hpp"

using namespace ssbc;

namespace {
EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}
}  // namespace

TEST(Config, EnvInterpolation) {
  const auto env = env_of({{"HOST", "example.org"}});
  EXPECT_EQ(interpolate_env(json("http://${HOST}/v1"), env), "http://example.org/v1");
  EXPECT_EQ(interpolate_env(json("${PORT:-8080}"), env), "8080");
  EXPECT_EQ(interpolate_env(json{{"a", {"${HOST}", 3}}}, env), (json{{"a", {"example.org", 3}}}));
  EXPECT_THROW(interpolate_env(json("${MISSING}"), env), ConfigError);
}

TEST(Config, RoundTripAndDefaults) {
  const auto c = config_from_json(ssbc::testing::mock_config_json("runs", "r1"));
  EXPECT_EQ(c.run_id, "r1");
  EXPECT_EQ(c.annotator.temperatures, (std::vector<double>{0.0, 0.3, 0.7}));
  EXPECT_EQ(c.analysis.reference_community, "r/TwoXChromosomes");
  EXPECT_EQ(resolve_endpoint(c, "mock"), "http://mock.invalid/v1");
  EXPECT_EQ(resolve_endpoint(c, "https://direct/v1"), "https://direct/v1");
  EXPECT_THROW(resolve_endpoint(c, "nope"), ConfigError);
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = ssbc::testing::mock_config_json("runs", "r1");
  j["agent"]["temprature"] = 0.5;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = ssbc::testing::mock_config_json("runs", "r1");
  j["seed"] = "seven";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = ssbc::testing::mock_config_json("runs", "r1");
  j["annotator"]["temperatures"] = {0.0, 0.0, 0.7};
  EXPECT_THROW(validate(config_from_json(j)), ConfigError);
  j = ssbc::testing::mock_config_json("runs", "r1");
  j["analysis"] = {{"regression_method", "ols"}};
  EXPECT_THROW(validate(config_from_json(j)), ConfigError);
  j = ssbc::testing::mock_config_json("runs", "");
  EXPECT_THROW(validate(config_from_json(j)), ConfigError);
}

TEST(Config, LoadResolvesRelativePaths) {
  ssbc::testing::TempDir dir;
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "cfg.json") << R"({"run_id": "r", "corpus": "data/c.jsonl",
    "endpoints": {"m": {"url": "http://${H:-localhost}:1/v1", "api_key_env": "KEY"}}})";
  const auto c = load_config(dir / "sub" / "cfg.json", env_of({}));
  EXPECT_EQ(c.corpus, dir / "sub" / "data" / "c.jsonl");
  EXPECT_EQ(c.endpoints.at("m").url, "http://localhost:1/v1");
  EXPECT_EQ(c.endpoints.at("m").api_key_env, "KEY");
  EXPECT_THROW(load_config(dir / "missing.json", env_of({})), std::exception);
}
