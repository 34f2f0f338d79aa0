#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssbc/json_io.hpp"

namespace ssbc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EndpointSpec {
  std::string url;
  std::string api_key_env;  // empty = no Authorization header
};

struct ShardTeacherSection {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 4096;
  int max_attempts = 3;
};

struct AgentSection {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  std::string system_prompt;  // empty = built-in support-agent prompt
  bool single_turn = true;
};

struct AnnotatorSection {
  std::string endpoint;
  std::string model;
  std::vector<double> temperatures{0.0, 0.3, 0.7};
  int max_tokens = 2048;
};

struct DistressTeacherSection {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct HiddenStatesSection {
  std::string endpoint;
  std::string model_id;
  bool include_reply = false;  // extract after the agent reply instead of at the user message
};

struct ProbeSection {
  std::filesystem::path hsd;        // pre-extracted training states
  std::filesystem::path dialogues;  // or dialogues to label and extract
  double l2 = 1.0;
  int max_iterations = 200;
  int folds = 5;
  std::size_t k = 3;
  std::optional<int> min_layer;
  std::optional<int> max_layer;
};

struct AnalysisSection {
  std::string reference_community = "r/TwoXChromosomes";
  std::string turn_coding = "index";
  double q = 0.05;
  std::string regression_method = "random_intercept";
  bool include_partial = false;
};

struct GatewaySection {
  int max_retries = 4;
  std::size_t concurrency = 4;
  double rate_limit_rps = 0.0;
  std::int64_t timeout_ms = 120000;
  std::int64_t base_delay_ms = 500;
  std::int64_t max_delay_ms = 30000;
  bool offline = false;
};

struct PipelineConfig {
  std::string run_id;
  std::filesystem::path runs_root{"runs"};
  std::filesystem::path corpus;
  std::uint64_t seed = 0;
  std::map<std::string, EndpointSpec> endpoints;
  ShardTeacherSection shard_teacher;
  AgentSection agent;
  AnnotatorSection annotator;
  DistressTeacherSection distress_teacher;
  HiddenStatesSection hidden_states;
  ProbeSection probe;
  AnalysisSection analysis;
  GatewaySection gateway;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Replaces ${NAME} and ${NAME:-default} in every string value. An unset
/// variable without a default raises ConfigError.
json interpolate_env(const json& value, const EnvLookup& env);

/// Unknown keys and wrongly typed values raise ConfigError.
PipelineConfig config_from_json(const json& j);
json to_json(const PipelineConfig& config);

/// Reads, interpolates and parses a config file. Relative paths resolve
/// against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

/// URL for an endpoint alias; values starting with http:// or https:// are
/// taken as URLs directly.
std::string resolve_endpoint(const PipelineConfig& config, const std::string& alias);

/// Checks aliases, the annotation temperature set and numeric ranges.
void validate(const PipelineConfig& config);

}  // namespace ssbc
