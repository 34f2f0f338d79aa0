#include "ssbc/dialogue_simulator.hpp"

#include "ssbc/llm_gateway.hpp"
#include "ssbc/prompts.hpp"

namespace ssbc {

std::optional<std::size_t> Conversation::last_completed_turn() const {
  if (turns.empty()) return std::nullopt;
  return turns.back().index;
}

json to_json(const Conversation& conv) {
  json turns = json::array();
  for (const auto& t : conv.turns) {
    turns.push_back({{"index", t.index}, {"user_text", t.user_text}, {"assistant_text", t.assistant_text}});
  }
  json j{{"conv_id", conv.conv_id},
         {"post_id", conv.post_id},
         {"agent_model", conv.agent_model},
         {"complete", conv.complete},
         {"turns", std::move(turns)}};
  if (!conv.complete) j["failure"] = conv.failure;
  return j;
}

Conversation conversation_from_json(const json& record) {
  Conversation conv;
  conv.conv_id = record.at("conv_id").get<std::string>();
  conv.post_id = record.at("post_id").get<std::string>();
  conv.agent_model = record.at("agent_model").get<std::string>();
  conv.complete = record.value("complete", true);
  conv.failure = record.value("failure", std::string{});
  for (const auto& t : record.at("turns")) {
    Turn turn;
    turn.index = t.at("index").get<std::size_t>();
    turn.user_text = t.at("user_text").get<std::string>();
    turn.assistant_text = t.at("assistant_text").get<std::string>();
    conv.turns.push_back(std::move(turn));
  }
  return conv;
}

json to_json(const SingleTurnResult& result) {
  json j{{"post_id", result.post_id},
         {"prompt_text", result.prompt_text},
         {"assistant_text", result.assistant_text}};
  if (result.labels) j["labels"] = to_json(*result.labels);
  return j;
}

SingleTurnResult single_turn_from_json(const json& record) {
  SingleTurnResult r;
  r.post_id = record.at("post_id").get<std::string>();
  r.prompt_text = record.at("prompt_text").get<std::string>();
  r.assistant_text = record.at("assistant_text").get<std::string>();
  if (record.contains("labels")) r.labels = label_set_from_json(record.at("labels"));
  return r;
}

namespace {
std::string system_prompt(const AgentConfig& agent) {
  return agent.system_prompt.empty() ? std::string(prompts::support_agent_system()) : agent.system_prompt;
}
}  // namespace

std::vector<ChatMessage> turn_messages(const AgentConfig& agent, const std::vector<Turn>& history,
                                       const std::string& user_text) {
  std::vector<ChatMessage> messages;
  messages.reserve(2 * history.size() + 2);
  messages.push_back({Role::system, system_prompt(agent)});
  for (const auto& t : history) {
    messages.push_back({Role::user, t.user_text});
    messages.push_back({Role::assistant, t.assistant_text});
  }
  messages.push_back({Role::user, user_text});
  return messages;
}

Conversation simulate_conversation(const std::vector<Shard>& shards, const AgentConfig& agent,
                                   LlmGateway& gateway) {
  if (shards.empty()) throw PreconditionError("conversation needs at least one shard");
  for (std::size_t i = 0; i < shards.size(); ++i) {
    if (shards[i].index != i || shards[i].post_id != shards.front().post_id) {
      throw PreconditionError("shards must belong to one post and be ordered by index");
    }
  }
  Conversation conv;
  conv.post_id = shards.front().post_id;
  conv.conv_id = conv.post_id;
  conv.agent_model = agent.model;
  for (const auto& shard : shards) {
    ChatRequest req{agent.endpoint, agent.model, turn_messages(agent, conv.turns, shard.text),
                    agent.temperature, agent.max_tokens, agent.seed};
    try {
      auto response = gateway.chat_complete(req);
      Turn turn;
      turn.index = shard.index;
      turn.user_text = shard.text;
      turn.assistant_text = std::move(response.content);
      conv.turns.push_back(std::move(turn));
    } catch (const GatewayError& e) {
      conv.complete = false;
      conv.failure = e.what();
      break;
    }
  }
  return conv;
}

std::string single_turn_prompt(const Post& post) {
  if (post.title.empty()) return post.body;
  return post.title + "\n\n" + post.body;
}

std::optional<SingleTurnResult> simulate_single_turn(const Post& post, const AgentConfig& agent,
                                                     LlmGateway& gateway, std::string* error) {
  if (normalize_whitespace(post.body).empty()) throw PreconditionError("post body is empty");
  SingleTurnResult result;
  result.post_id = post.post_id;
  result.prompt_text = single_turn_prompt(post);
  ChatRequest req{agent.endpoint, agent.model, turn_messages(agent, {}, result.prompt_text),
                  agent.temperature, agent.max_tokens, agent.seed};
  try {
    result.assistant_text = gateway.chat_complete(req).content;
  } catch (const GatewayError& e) {
    if (error) *error = e.what();
    return std::nullopt;
  }
  return result;
}

}  // namespace ssbc
