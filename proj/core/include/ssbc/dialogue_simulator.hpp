#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ssbc/corpus_store.hpp"
#include "ssbc/shard_engine.hpp"
#include "ssbc/ssbc_labels.hpp"
#include "ssbc/types.hpp"

namespace ssbc {

class LlmGateway;

struct DistressEstimate {
  DistressLevel level = DistressLevel::none;
  std::array<double, 3> probabilities{};
};

struct Turn {
  std::size_t index = 0;
  std::string user_text;
  std::string assistant_text;
  std::optional<LabelSet> consensus_labels;
  std::optional<DistressEstimate> distress_estimate;
};

struct Conversation {
  std::string conv_id;
  std::string post_id;
  std::string agent_model;
  std::vector<Turn> turns;
  bool complete = true;
  std::string failure;  // gateway error that stopped a partial transcript

  /// Index of the last completed turn, or nullopt when none completed.
  std::optional<std::size_t> last_completed_turn() const;
};

/// Transcript record: {conv_id, post_id, agent_model, complete, failure?,
/// turns:[{index, user_text, assistant_text}]}. Annotation and distress
/// fields are not part of the transcript record.
json to_json(const Conversation& conv);
Conversation conversation_from_json(const json& record);

struct SingleTurnResult {
  std::string post_id;
  std::string prompt_text;
  std::string assistant_text;
  std::optional<LabelSet> labels;
};

json to_json(const SingleTurnResult& result);
SingleTurnResult single_turn_from_json(const json& record);

struct AgentConfig {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  std::string system_prompt;  // empty = default support-agent prompt
};

/// Message list for turn t: system prompt, then the alternating history of
/// earlier shards and replies, then shard t as the user message.
std::vector<ChatMessage> turn_messages(const AgentConfig& agent, const std::vector<Turn>& history,
                                       const std::string& user_text);

/// Replays shards as sequential user turns. A gateway failure stops the
/// conversation and marks it partial; completed turns are kept.
Conversation simulate_conversation(const std::vector<Shard>& shards, const AgentConfig& agent,
                                   LlmGateway& gateway);

/// Title and body separated by a blank line (body alone when untitled).
std::string single_turn_prompt(const Post& post);

/// One request with the same system prompt and the full post as the only
/// user message. Returns nullopt on gateway failure and fills `error`.
std::optional<SingleTurnResult> simulate_single_turn(const Post& post, const AgentConfig& agent,
                                                     LlmGateway& gateway, std::string* error = nullptr);

}  // namespace ssbc
