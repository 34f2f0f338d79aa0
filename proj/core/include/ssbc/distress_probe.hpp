#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/dialogue_simulator.hpp"
#include "ssbc/hsd_format.hpp"
#include "ssbc/json_io.hpp"
#include "ssbc/types.hpp"

namespace ssbc {

class LlmGateway;

// ---- teacher labeling -------------------------------------------------------

/// Conversation prefix rendered as "User: ..." / "Assistant: ..." blocks.
std::string render_prefix(std::span<const ChatMessage> prefix);

/// Distress template with the rubric as codebook and the prefix as the post.
std::string build_distress_prompt(std::span<const ChatMessage> prefix);

enum class Confidence { high, low };
std::string_view to_string(Confidence c);

struct DistressJudgment {
  DistressLevel level = DistressLevel::none;
  std::optional<Confidence> confidence;
};

/// Reads the object on the last "Final answer:" line; without one, the last
/// "severity": "<value>" pair in the text. Severity must be None, Mild or
/// Moderate+ (case-insensitive). Throws ParseError otherwise.
DistressJudgment parse_distress_response(std::string_view text);

struct DistressTeacherConfig {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::int64_t seed = 0;
};

/// One teacher request; a parse failure is retried once with the next seed.
/// Returns nullopt when both attempts fail or the gateway errors.
std::optional<DistressJudgment> label_prefix(std::span<const ChatMessage> prefix, LlmGateway& gateway,
                                             const DistressTeacherConfig& config);

// ---- probes -----------------------------------------------------------------

struct ProbeHyperparams {
  double l2 = 1.0;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  std::size_t lbfgs_memory = 10;
};

/// Labeled rows of one layer, row-major.
struct LayerData {
  std::uint16_t layer = 0;
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::string> groups;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
};

/// Labeled records of `layer`; unlabeled records are skipped.
LayerData layer_data(std::span<const HiddenStateRecord> records, std::uint16_t layer);
LayerData subset(const LayerData& data, std::span<const std::size_t> rows);
std::vector<std::uint16_t> layers_of(std::span<const HiddenStateRecord> records);

/// Per-dimension z-scoring; zero-variance dimensions get scale 1.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  friend bool operator==(const Standardization&, const Standardization&) = default;
};
Standardization fit_standardization(const LayerData& data);

struct ClassificationMetrics {
  double macro_f1 = 0;
  std::array<double, 3> per_class_f1{};
  double accuracy = 0;
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [truth][predicted]
};

/// Macro-F1 averages over classes that occur in the truth or the predictions.
ClassificationMetrics classification_metrics(std::span<const int> truth, std::span<const int> predicted);

/// Mean penalized cross-entropy over standardized rows `z` (n x d):
///   (1/n) [ sum_i -log p(y_i | z_i) + (l2/2) ||W||^2 ]
/// params = W (3 x d, row-major) followed by the 3 biases; the bias is not
/// penalized. Fills `grad` (same layout) when non-null.
double softmax_objective(std::span<const double> z, std::size_t d, std::span<const int> y, double l2,
                         std::span<const double> params, std::vector<double>* grad);

struct TrainingTrace {
  std::vector<double> loss;  // objective after each accepted iterate (index 0 = start)
  int iterations = 0;
  double gradient_max_norm = 0;
  bool converged = false;
};

struct ProbeModel {
  std::uint16_t layer = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // 3 x dim, row-major
  std::array<double, 3> bias{};
  Standardization standardization;
  ClassificationMetrics cv_metrics;

  std::array<double, 3> predict_proba(std::span<const double> v) const;
  std::array<double, 3> predict_proba(std::span<const float> v) const;
};

/// Softmax regression on standardized features, fit with L-BFGS. Requires at
/// least 10 rows, two classes and finite features.
ProbeModel train_probe(const LayerData& data, const ProbeHyperparams& hyper = {}, TrainingTrace* trace = nullptr);

/// Fold index per row. Unique group ids are shuffled with `seed` and dealt
/// round-robin, so a group never spans two folds.
std::vector<int> grouped_folds(std::span<const std::string> groups, int k, std::uint64_t seed);

struct CvResult {
  ClassificationMetrics metrics;  // pooled over held-out predictions
  std::vector<int> fold_of_row;
  std::vector<Standardization> fold_standardization;
};

CvResult cross_validate(const LayerData& data, int k, std::uint64_t seed, const ProbeHyperparams& hyper = {});

struct ProbeTrainingConfig {
  ProbeHyperparams hyper;
  int folds = 5;
  std::uint64_t seed = 0;
  std::optional<std::uint16_t> min_layer;
  std::optional<std::uint16_t> max_layer;
  std::size_t concurrency = 1;
};

struct LayerEvaluation {
  std::uint16_t layer = 0;
  ClassificationMetrics metrics;
};

/// Cross-validated metrics for every layer in range.
std::vector<LayerEvaluation> evaluate_layers(std::span<const HiddenStateRecord> records,
                                             const ProbeTrainingConfig& config);

/// K layers with the highest macro-F1, ties broken toward the lower layer.
std::vector<std::uint16_t> select_layers(const std::map<std::uint16_t, double>& macro_f1, std::size_t k);

struct EnsembleProbe {
  std::vector<ProbeModel> members;  // descending macro-F1
};

/// Selects the top-K layers and refits each on all labeled rows.
EnsembleProbe build_ensemble(std::span<const HiddenStateRecord> records,
                             const std::vector<LayerEvaluation>& evaluations, std::size_t k,
                             const ProbeHyperparams& hyper = {});

/// Averages member probabilities and renormalizes; argmax ties (within
/// 1e-12) go to the higher severity.
DistressEstimate combine_probabilities(std::span<const std::array<double, 3>> member_probs);

DistressEstimate ensemble_predict(const EnsembleProbe& ensemble,
                                  const std::map<std::uint16_t, std::vector<float>>& vectors);

json to_json(const ClassificationMetrics& m);
ClassificationMetrics classification_metrics_from_json(const json& j);

/// Named fields; weights, bias and standardization as base-16 float64 payloads.
json to_json(const ProbeModel& model);
ProbeModel probe_model_from_json(const json& j);
json to_json(const EnsembleProbe& ensemble);
EnsembleProbe ensemble_from_json(const json& j);

// ---- human comparison -------------------------------------------------------

struct DistressPair {
  DistressLevel estimated;
  DistressLevel human;
};

struct HumanDistressComparison {
  std::size_t items = 0;
  double exact_match_rate = 0;
  std::optional<double> quadratic_weighted_kappa;  // undefined when expected disagreement is 0
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [human][estimated]
  std::array<std::array<double, 3>, 3> row_shares{};      // confusion rows normalized
};

/// Throws PreconditionError when `pairs` is empty.
HumanDistressComparison compare_with_human(std::span<const DistressPair> pairs);
json to_json(const HumanDistressComparison& c);

}  // namespace ssbc
