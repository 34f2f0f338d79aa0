#include "ssbc/stats/tidy.hpp"

namespace ssbc::stats {

std::vector<TidyTurnRecord> build_tidy(const std::vector<Conversation>& conversations,
                                       const std::map<std::string, Post>& posts, bool include_partial) {
  std::vector<TidyTurnRecord> out;
  for (const auto& conv : conversations) {
    if (!conv.complete && !include_partial) continue;
    auto post = posts.find(conv.post_id);
    if (post == posts.end()) throw PreconditionError("conversation " + conv.conv_id + " references unknown post");
    for (const auto& turn : conv.turns) {
      if (!turn.consensus_labels) {
        throw PreconditionError("turn " + conv.conv_id + "#" + std::to_string(turn.index) + " has no consensus labels");
      }
      TidyTurnRecord r;
      r.conv_id = conv.conv_id;
      r.turn_index = turn.index;
      r.conversation_turns = conv.turns.size();
      r.community = post->second.community;
      if (turn.distress_estimate) r.distress_level = ordinal(turn.distress_estimate->level);
      r.tags = turn.consensus_labels->mask();
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string tidy_csv(const std::vector<TidyTurnRecord>& records) {
  std::string out = "conv_id,turn_index,conversation_turns,community,distress_level";
  for (auto l : kAllLabels) (out += ',') += to_string(l);
  out += '\n';
  for (const auto& r : records) {
    out += csv_field(r.conv_id) + ',' + std::to_string(r.turn_index) + ',' + std::to_string(r.conversation_turns) +
           ',' + csv_field(r.community) + ',';
    if (r.distress_level) out += std::to_string(*r.distress_level);
    for (auto l : kAllLabels) out += r.has(l) ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

}  // namespace ssbc::stats
