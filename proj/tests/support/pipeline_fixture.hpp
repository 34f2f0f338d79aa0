#pragma once

#include <filesystem>
#include <string>

#include "ssbc/json_io.hpp"
#include "temp_dir.hpp"

namespace ssbc::testing {

/// Config for the small corpus against the mock services at `base` (an
/// origin such as http://127.0.0.1:8080).
inline json mock_config_json(const std::filesystem::path& runs_root, const std::string& run_id,
                             const std::string& base = "http://mock.invalid") {
  return {{"run_id", run_id},
          {"runs_root", runs_root.string()},
          {"corpus", fixture("corpus_small.jsonl").string()},
          {"seed", 7},
          {"endpoints", {{"mock", base + "/v1"}, {"hs", base}}},
          {"shard_teacher", {{"endpoint", "mock"}, {"model", "teacher"}}},
          {"agent", {{"endpoint", "mock"}, {"model", "agent"}}},
          {"annotator", {{"endpoint", "mock"}, {"model", "annotator"}}},
          {"distress_teacher", {{"endpoint", "mock"}, {"model", "teacher"}}},
          {"hidden_states", {{"endpoint", "hs"}, {"model_id", "agent"}}},
          {"probe", {{"dialogues", fixture("probe_dialogues.jsonl").string()}, {"folds", 3}, {"k", 2}}},
          {"gateway", {{"concurrency", 4}, {"base_delay_ms", 1}, {"max_retries", 1}}}};
}

}  // namespace ssbc::testing
