#pragma once

#include <array>
#include <compare>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/dialogue_simulator.hpp"
#include "ssbc/ssbc_labels.hpp"

namespace ssbc {

class LlmGateway;

struct TurnKey {
  std::string conv_id;
  std::size_t turn = 0;

  friend auto operator<=>(const TurnKey&, const TurnKey&) = default;
};

/// Annotation template with the codebook and both messages interpolated.
std::string build_annotation_prompt(std::string_view user_msg, std::string_view assistant_msg);

struct ParsedAnnotation {
  LabelSet labels;
  std::vector<std::string> dropped;  // unknown or excluded label strings
  bool truncated = false;            // more than three valid labels were listed
};

/// Reads the array on the last line starting with "Final answer:" (falling
/// back to the last array of strings anywhere in the text), normalizes label
/// spellings, drops unknown labels and keeps the first three valid ones.
/// Throws ParseError when no array is found, or when a non-empty array yields
/// no valid label.
ParsedAnnotation parse_annotation_response(std::string_view text);

enum class AnnotationStatus { ok, parse_failed, missing };
std::string_view to_string(AnnotationStatus status);

struct TurnAnnotation {
  LabelSet labels;
  AnnotationStatus status = AnnotationStatus::ok;
  std::string raw_response;
};

struct AnnotationRun {
  double temperature = 0.0;
  std::map<TurnKey, TurnAnnotation> turns;
};

/// Records {conv_id, turn, temperature, labels, status, raw_response_ref}.
/// Raw responses are stored separately, keyed by their SHA-256.
std::vector<json> annotation_records(const AnnotationRun& run);
std::vector<json> raw_response_records(const AnnotationRun& run);
AnnotationRun annotation_run_from_records(const std::vector<json>& records,
                                          const std::vector<json>& raw_records);

struct AnnotatorConfig {
  std::string endpoint;
  std::string model;
  int max_tokens = 2048;
  std::int64_t seed = 0;
  std::size_t concurrency = 4;
};

/// Hash identifying the annotator (endpoint, model, prompt template and
/// codebook). Cross-run comparisons require equal hashes.
std::string annotator_hash(const AnnotatorConfig& config, const std::vector<double>& temperatures);

/// One request per completed turn at `temperature`. A parse failure is
/// retried once with the next seed and then recorded as an empty flagged
/// set; a gateway failure marks the turn missing.
AnnotationRun annotate_run(const std::vector<Conversation>& conversations, double temperature,
                           LlmGateway& gateway, const AnnotatorConfig& config);

/// Annotates a single (user, assistant) exchange with the same retry policy.
TurnAnnotation annotate_exchange(std::string_view user_msg, std::string_view assistant_msg,
                                 double temperature, LlmGateway& gateway, const AnnotatorConfig& config);

struct ConsensusRecord {
  LabelSet labels;
  std::array<int, kLabelCount> votes{};
};

/// Labels present in at least two of three runs. When more than three reach
/// quorum the three with the most votes are kept, ties broken by table order.
ConsensusRecord consensus_of(const std::array<LabelMask, 3>& runs);

class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ConsistencyError when the runs do not cover identical turn keys.
std::map<TurnKey, ConsensusRecord> consensus(const std::array<const AnnotationRun*, 3>& runs);

/// {conv_id, turn, labels, votes: {label: count}}
json to_json(const TurnKey& key, const ConsensusRecord& record);
std::pair<TurnKey, ConsensusRecord> consensus_from_json(const json& record);

}  // namespace ssbc
