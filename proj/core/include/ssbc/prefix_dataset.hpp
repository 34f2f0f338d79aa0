#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssbc/distress_probe.hpp"
#include "ssbc/json_io.hpp"
#include "ssbc/types.hpp"

namespace ssbc {

class LlmGateway;

/// One source dialogue: {dialogue_id, source, messages:[{role, content}]}.
struct SourceDialogue {
  std::string dialogue_id;
  std::string source;
  std::vector<ChatMessage> messages;
};

SourceDialogue source_dialogue_from_json(const json& record);
std::vector<SourceDialogue> read_dialogues(const std::filesystem::path& path);

json messages_to_json(const std::vector<ChatMessage>& messages);
std::vector<ChatMessage> messages_from_json(const json& array);

/// Every prefix of the dialogue that ends on a user message.
std::vector<std::vector<ChatMessage>> user_terminated_prefixes(const SourceDialogue& dialogue);

/// When more than one source is present, each source is subsampled (seeded,
/// original order kept) to the size of the smallest one.
std::vector<SourceDialogue> equal_contribution_sample(const std::vector<SourceDialogue>& dialogues,
                                                      std::uint64_t seed);

struct LabeledPrefix {
  std::string record_id;  // <dialogue_id>#<prefix index>
  std::string group_id;   // dialogue_id
  std::string source;
  std::vector<ChatMessage> messages;
  std::optional<DistressLevel> label;
};

/// Prefix file record {record_id, group_id, source, messages, label?}.
json to_json(const LabeledPrefix& prefix);
LabeledPrefix labeled_prefix_from_json(const json& record);

struct PrefixDataset {
  std::vector<LabeledPrefix> prefixes;
  std::size_t dropped = 0;  // teacher failures
  std::map<std::string, std::size_t> dialogues_per_source;
};

/// Samples the sources to equal size, expands user-terminated prefixes and
/// labels each with the teacher. Prefixes the teacher fails on are dropped
/// and counted.
PrefixDataset build_prefix_dataset(const std::vector<SourceDialogue>& dialogues, LlmGateway& gateway,
                                   const DistressTeacherConfig& teacher, std::uint64_t seed,
                                   std::size_t concurrency = 4);

}  // namespace ssbc
