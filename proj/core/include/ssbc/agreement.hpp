#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssbc/ssbc_annotator.hpp"

namespace ssbc {

/// Micro F1 over (turn, label) incidences: 2 sum|A&B| / sum(|A|+|B|).
/// Both sides empty everywhere counts as full agreement (1.0).
double pairwise_f1(std::span<const LabelMask> a, std::span<const LabelMask> b);
/// sum|A&B| / sum|A|B|, 1.0 when the union is empty everywhere.
double pairwise_jaccard(std::span<const LabelMask> a, std::span<const LabelMask> b);
/// Fraction of items where every run holds the same set.
double exact_match_rate(std::span<const std::vector<LabelMask>> runs);

struct StabilityReport {
  /// Keyed by run index pair (i < j).
  std::map<std::pair<std::size_t, std::size_t>, double> pairwise_f1;
  std::map<std::pair<std::size_t, std::size_t>, double> pairwise_jaccard;
  double exact_threeway_match_rate = 0;
  double mean_f1 = 0;
  double mean_jaccard = 0;
  std::size_t turns = 0;
};

json to_json(const StabilityReport& report, const std::vector<double>& temperatures);

/// Requires at least two runs over identical turn keys.
StabilityReport agreement_metrics(std::span<const AnnotationRun* const> runs);

/// Cohen's kappa for two binary raters. nullopt when chance agreement is 1
/// (both raters constant and identical). Throws on length mismatch or empty input.
std::optional<double> cohen_kappa(std::span<const bool> rater_a, std::span<const bool> rater_b);

/// MASI agreement: Jaccard times a monotonicity weight (1 identical,
/// 2/3 subset, 1/3 overlap, 0 disjoint). Two empty sets score 1.
double masi_similarity(LabelMask a, LabelMask b);
/// 1 - masi_similarity.
double masi_distance(LabelMask a, LabelMask b);

struct LabelAgreement {
  SsbcLabel label{};
  int model_positives = 0;
  int human_positives = 0;
  std::optional<double> kappa;  // nullopt when excluded or undefined
  bool excluded = false;        // fewer than min_positives for a rater
};

struct HumanAgreementReport {
  std::size_t items = 0;
  std::vector<LabelAgreement> per_label;
  double micro_f1 = 0;
  double macro_f1 = 0;
  double mean_masi = 0;
  std::optional<double> mean_kappa;  // over non-excluded labels
};

json to_json(const HumanAgreementReport& report);

/// Compares model labels with one human rater over the turns both cover.
/// Labels with fewer than `min_positives` positives for either rater are
/// excluded from the kappa table.
HumanAgreementReport compare_with_rater(const std::map<TurnKey, LabelSet>& model,
                                        const std::map<TurnKey, LabelSet>& human, int min_positives = 5);

/// Human label file: one {conv_id, turn, labels} record per line.
std::map<TurnKey, LabelSet> human_labels_from_records(const std::vector<json>& records);

}  // namespace ssbc
