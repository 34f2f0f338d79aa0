#include "ssbc/prefix_dataset.hpp"

#include <algorithm>
#include <random>

#include "ssbc/parallel.hpp"

namespace ssbc {

json messages_to_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return out;
}

std::vector<ChatMessage> messages_from_json(const json& array) {
  std::vector<ChatMessage> out;
  for (const auto& m : array) {
    const auto role = parse_role(m.at("role").get<std::string>());
    if (!role) throw ParseError("unknown message role " + m.at("role").dump());
    out.push_back({*role, m.at("content").get<std::string>()});
  }
  return out;
}

SourceDialogue source_dialogue_from_json(const json& record) {
  try {
    return {record.at("dialogue_id").get<std::string>(), record.value("source", std::string{}),
            messages_from_json(record.at("messages"))};
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed dialogue record: ") + e.what());
  }
}

std::vector<SourceDialogue> read_dialogues(const std::filesystem::path& path) {
  std::vector<SourceDialogue> out;
  for (const auto& r : read_jsonl(path)) out.push_back(source_dialogue_from_json(r));
  return out;
}

std::vector<std::vector<ChatMessage>> user_terminated_prefixes(const SourceDialogue& dialogue) {
  std::vector<std::vector<ChatMessage>> out;
  for (std::size_t i = 0; i < dialogue.messages.size(); ++i) {
    if (dialogue.messages[i].role == Role::user) {
      out.emplace_back(dialogue.messages.begin(), dialogue.messages.begin() + static_cast<std::ptrdiff_t>(i + 1));
    }
  }
  return out;
}

std::vector<SourceDialogue> equal_contribution_sample(const std::vector<SourceDialogue>& dialogues,
                                                      std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < dialogues.size(); ++i) by_source[dialogues[i].source].push_back(i);
  if (by_source.size() < 2) return dialogues;
  std::size_t target = dialogues.size();
  for (const auto& [_, idx] : by_source) target = std::min(target, idx.size());

  std::vector<std::size_t> keep;
  std::mt19937_64 rng(seed);
  for (auto& [_, idx] : by_source) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::ranges::sort(keep);
  std::vector<SourceDialogue> out;
  for (auto i : keep) out.push_back(dialogues[i]);
  return out;
}

json to_json(const LabeledPrefix& prefix) {
  json j{{"record_id", prefix.record_id},
         {"group_id", prefix.group_id},
         {"source", prefix.source},
         {"messages", messages_to_json(prefix.messages)}};
  if (prefix.label) j["label"] = to_string(*prefix.label);
  return j;
}

LabeledPrefix labeled_prefix_from_json(const json& record) {
  LabeledPrefix p;
  p.record_id = record.at("record_id").get<std::string>();
  p.group_id = record.at("group_id").get<std::string>();
  p.source = record.value("source", std::string{});
  p.messages = messages_from_json(record.at("messages"));
  if (record.contains("label") && !record.at("label").is_null()) {
    p.label = parse_distress_level(record.at("label").get<std::string>());
    if (!p.label) throw ParseError("invalid prefix label " + record.at("label").dump());
  }
  return p;
}

PrefixDataset build_prefix_dataset(const std::vector<SourceDialogue>& dialogues, LlmGateway& gateway,
                                   const DistressTeacherConfig& teacher, std::uint64_t seed,
                                   std::size_t concurrency) {
  PrefixDataset dataset;
  std::vector<LabeledPrefix> candidates;
  for (const auto& d : equal_contribution_sample(dialogues, seed)) {
    ++dataset.dialogues_per_source[d.source];
    auto prefixes = user_terminated_prefixes(d);
    for (std::size_t k = 0; k < prefixes.size(); ++k) {
      candidates.push_back({d.dialogue_id + "#" + std::to_string(k), d.dialogue_id, d.source,
                            std::move(prefixes[k]), std::nullopt});
    }
  }
  parallel_for(candidates.size(), concurrency, [&](std::size_t i) {
    if (auto judgment = label_prefix(candidates[i].messages, gateway, teacher)) candidates[i].label = judgment->level;
  });
  for (auto& c : candidates) {
    if (c.label) {
      dataset.prefixes.push_back(std::move(c));
    } else {
      ++dataset.dropped;
    }
  }
  return dataset;
}

}  // namespace ssbc
