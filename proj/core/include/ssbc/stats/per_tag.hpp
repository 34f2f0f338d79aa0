#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/json_io.hpp"
#include "ssbc/ssbc_labels.hpp"
#include "ssbc/stats/contingency.hpp"
#include "ssbc/stats/random_intercept.hpp"
#include "ssbc/stats/tidy.hpp"

namespace ssbc::stats {

enum class Condition { distress, community };
enum class RegressionMethod { plain, cluster_robust, random_intercept };
enum class TurnCoding { index, normalized };

std::string_view to_string(Condition c);
std::string_view to_string(RegressionMethod m);
std::string_view to_string(TurnCoding t);
Condition parse_condition(std::string_view text);
RegressionMethod parse_method(std::string_view text);
TurnCoding parse_turn_coding(std::string_view text);

inline constexpr std::string_view kDefaultReferenceCommunity = "r/TwoXChromosomes";

struct AnalysisOptions {
  std::string reference_community{kDefaultReferenceCommunity};
  TurnCoding turn_coding = TurnCoding::index;
  double q = 0.05;
  RandomInterceptOptions random_intercept;
  std::size_t concurrency = 1;
};

/// Rows are condition levels (distress in ordinal order, communities
/// sorted); columns are {tag present, tag absent}.
struct LevelTable {
  std::vector<std::string> levels;
  CountTable table;
};

/// Throws PreconditionError when fewer than two levels are present.
LevelTable contingency_table(const std::vector<TidyTurnRecord>& records, SsbcLabel tag, Condition condition);

struct ContingencyResult {
  SsbcLabel tag{};
  std::vector<std::string> levels;
  CountTable table;
  std::size_t n = 0;
  double chi2 = 0;
  int df = 0;
  double p = 1;
  double p_fdr = 1;
  bool reject = false;
  double cramers_v = 0;
  double delta_pp = 0;
  std::map<std::string, double> per_level_rates;
  double min_expected = 0;
  bool low_expected = false;
  bool degenerate = false;  // tag never or always present; excluded from the FDR family
  std::string error;
};

/// Chi-square per tag with BH adjustment across the tags that could be tested.
std::vector<ContingencyResult> per_tag_contingency(const std::vector<TidyTurnRecord>& records, Condition condition,
                                                   const AnalysisOptions& options = {});

struct RegressionResult {
  SsbcLabel tag{};
  RegressionMethod method = RegressionMethod::plain;
  std::vector<std::string> terms;
  std::map<std::string, double> coefficients;
  std::map<std::string, double> std_errors;
  std::map<std::string, double> p_values;
  std::map<std::string, double> p_fdr;  // per term, across tags
  std::map<std::string, double> odds_ratios;
  std::optional<double> random_intercept_sd;
  std::size_t n = 0;
  std::size_t clusters = 0;
  bool converged = true;
  bool fallback_used = false;
  std::string warning;
  std::string error;
};

/// Logit of each tag on distress (0-2) and turn position, plus community
/// dummies against the reference level when condition = community. Rows
/// without a distress estimate are dropped. A failing tag records its error.
std::vector<RegressionResult> per_tag_regression(const std::vector<TidyTurnRecord>& records, Condition condition,
                                                 RegressionMethod method, const AnalysisOptions& options = {});

json to_json(const ContingencyResult& r);
json to_json(const RegressionResult& r);
/// Inverse of to_json; non-finite values stored as null read back as NaN.
ContingencyResult contingency_from_json(const json& j);
RegressionResult regression_from_json(const json& j);

}  // namespace ssbc::stats
