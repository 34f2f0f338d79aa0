#pragma once

#include <cstddef>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/corpus_store.hpp"
#include "ssbc/json_io.hpp"

namespace ssbc {

class LlmGateway;

/// A verbatim fragment of a post. Offsets index the whitespace-normalized
/// body: text == normalized_body.substr(match_start, match_end - match_start).
struct Shard {
  std::string post_id;
  std::size_t index = 0;
  std::string text;
  std::size_t match_start = 0;
  std::size_t match_end = 0;

  friend bool operator==(const Shard&, const Shard&) = default;
};

json to_json(const Shard& shard);
Shard shard_from_json(const json& record);

enum class RejectReason { not_substring, too_short, out_of_order, artifact_suspect };
std::string_view to_string(RejectReason reason);

struct RejectedCandidate {
  std::string text;
  RejectReason reason;
};

struct ShardValidationReport {
  std::vector<Shard> accepted;
  std::vector<RejectedCandidate> rejected;

  bool has_rejection(RejectReason reason) const;
};

/// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::size_t word_count(std::string_view text);

struct ShardRules {
  std::size_t min_words = 3;
  /// Case-insensitive audience-address patterns.
  std::vector<std::string> artifact_patterns{"has anyone", "do any of you", "edit:", "update:"};
};

/// Stateless validator; compiled patterns are shared across calls.
class ShardValidator {
 public:
  explicit ShardValidator(ShardRules rules = {});

  ShardValidationReport validate(const Post& post, const std::vector<std::string>& candidates) const;
  const ShardRules& rules() const { return rules_; }

 private:
  ShardRules rules_;
  std::vector<std::regex> patterns_;
};

ShardValidationReport validate_shards(const Post& post, const std::vector<std::string>& candidates);

/// Segmentation instruction followed by the post body.
std::string build_shard_prompt(const Post& post);

/// Last well-formed JSON array whose elements are all strings, if any.
std::optional<std::vector<std::string>> find_last_string_array(std::string_view text);

/// Elements of the last well-formed JSON array of strings in `text`.
/// Throws ParseError when no such array exists.
std::vector<std::string> parse_shard_response(std::string_view text);

struct ShardTeacherConfig {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 4096;
  int max_attempts = 3;
  std::int64_t seed = 0;
};

struct ShardExtraction {
  std::string post_id;
  std::vector<Shard> shards;
  bool excluded = false;
  std::string exclusion_reason;
  int attempts = 0;
  std::vector<std::string> attempt_errors;
};

json to_json(const ShardExtraction& extraction);

/// Queries the teacher up to max_attempts times (seed advanced per attempt)
/// and returns the first attempt that accepts at least one shard and rejects
/// none as not_substring. Posts failing every attempt are excluded.
ShardExtraction extract_shards(const Post& post, LlmGateway& gateway, const ShardTeacherConfig& config,
                               const ShardValidator& validator);

struct Distribution {
  double mean = 0;
  double median = 0;
  double sd = 0;
  double q1 = 0;
  double q3 = 0;
};

/// Linear-interpolation quantile over sorted values (p in [0,1]).
double quantile_sorted(const std::vector<double>& sorted, double p);
Distribution describe(std::vector<double> values);

struct ShardStats {
  std::size_t posts = 0;
  std::size_t shards = 0;
  Distribution count;
  double share_3_to_8 = 0;
  Distribution word_length;
};

json to_json(const ShardStats& stats);

/// Statistics over accepted posts; each inner vector holds one post's shards.
ShardStats shard_statistics(const std::vector<std::vector<Shard>>& shards_per_post);

}  // namespace ssbc
