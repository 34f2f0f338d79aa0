#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssbc/dialogue_simulator.hpp"
#include "ssbc/json_io.hpp"
#include "ssbc/ssbc_labels.hpp"
#include "ssbc/stats/per_tag.hpp"

namespace ssbc {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

/// A rendered table: header plus string cells.
struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string note;
};

std::string render_csv(const Table& table);
std::string render_markdown(const Table& table);

struct TagRate {
  SsbcLabel tag{};
  std::size_t count = 0;
  double rate = 0;
  double ci_low = 0;
  double ci_high = 0;
};

struct PrevalenceReport {
  std::size_t n_turns = 0;
  std::vector<TagRate> rates;  // descending rate, ties in table order
};

/// Turn-level tag rates with normal-approximation 95% intervals clipped to
/// [0, 1]. Requires at least one turn.
PrevalenceReport prevalence_report(std::span<const LabelSet> consensus);
json to_json(const PrevalenceReport& report);
PrevalenceReport prevalence_from_json(const json& j);
Table prevalence_table(const PrevalenceReport& report);

/// FDR-significant tags sorted by chi-square, descending.
Table distress_report(std::span<const stats::ContingencyResult> results);

struct CommunityTables {
  Table spread;       // highest and lowest community per significant tag
  Table odds_ratios;  // adjusted community odds ratios per tag
};

/// Requires at least two communities in the contingency results.
CommunityTables community_report(std::span<const stats::ContingencyResult> contingency,
                                 std::span<const stats::RegressionResult> regressions);

struct CrossModelRow {
  SsbcLabel tag{};
  double rate_a = 0;
  double rate_b = 0;
  double delta_pp = 0;  // (rate_b - rate_a) * 100
};

struct CrossModelReport {
  std::string run_a;
  std::string run_b;
  std::vector<CrossModelRow> rows;  // table order
};

/// Refuses (PreconditionError) when the annotator hashes differ.
CrossModelReport cross_model_report(const std::string& run_a, const PrevalenceReport& a, const std::string& hash_a,
                                    const std::string& run_b, const PrevalenceReport& b, const std::string& hash_b);
json to_json(const CrossModelReport& report);
Table cross_model_table(const CrossModelReport& report);

struct VignetteComparison {
  std::string conv_id;
  std::vector<LabelSet> trajectory;
  LabelSet single_turn;
  std::size_t late_start = 0;  // first turn of the late half
  LabelMask late_only = 0;     // in late turns, absent from the single-turn reply
  LabelMask single_only = 0;   // in the single-turn reply, absent from every turn
};

/// Late half = turns with index >= ceil(n / 2). Requires every turn and the
/// single-turn reply to carry labels.
VignetteComparison vignette_comparison(const Conversation& conv, const std::optional<SingleTurnResult>& single);
json to_json(const VignetteComparison& v);
Table vignette_table(const VignetteComparison& v);

}  // namespace ssbc
