#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssbc/corpus_store.hpp"
#include "ssbc/dialogue_simulator.hpp"
#include "ssbc/ssbc_labels.hpp"

namespace ssbc::stats {

/// One completed turn joined with its post's community, consensus labels and
/// estimated distress.
struct TidyTurnRecord {
  std::string conv_id;
  std::size_t turn_index = 0;
  std::size_t conversation_turns = 0;
  std::string community;
  std::optional<int> distress_level;  // 0-2; absent when no estimate exists
  LabelMask tags = 0;

  bool has(SsbcLabel label) const { return (tags & bit(label)) != 0; }
  friend bool operator==(const TidyTurnRecord&, const TidyTurnRecord&) = default;
};

/// Throws PreconditionError when a completed turn lacks consensus labels or
/// a conversation's post is unknown. Partial conversations are skipped
/// unless `include_partial`.
std::vector<TidyTurnRecord> build_tidy(const std::vector<Conversation>& conversations,
                                       const std::map<std::string, Post>& posts, bool include_partial = false);

/// Comma-separated table with a header row; tags as 0/1 columns.
std::string tidy_csv(const std::vector<TidyTurnRecord>& records);

/// RFC 4180 quoting for one field.
std::string csv_field(const std::string& value);

}  // namespace ssbc::stats
