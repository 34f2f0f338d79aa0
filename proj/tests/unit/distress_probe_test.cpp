#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ssbc/distress_probe.hpp"
#include "synthetic.hpp"

using namespace ssbc;

TEST(DistressPrompt, FormatBlockAndPrefix) {
  const std::vector<ChatMessage> prefix{{Role::system, "sys"}, {Role::user, "hi"}, {Role::assistant, "hello"},
                                        {Role::user, "I can't cope"}};
  EXPECT_EQ(render_prefix(prefix), "User: hi\n\nAssistant: hello\n\nUser: I can't cope");
  const auto p = build_distress_prompt(prefix);
  EXPECT_NE(p.find(R"(Final answer: {"severity": "<value>", "confidence": "<value>"})"), std::string::npos);
  EXPECT_TRUE(p.ends_with("Post: User: hi\n\nAssistant: hello\n\nUser: I can't cope\n\n---"));
  EXPECT_EQ(p.find("{{"), std::string::npos);
  EXPECT_THROW(build_distress_prompt({}), PreconditionError);
}

TEST(DistressParse, Variants) {
  auto j = parse_distress_response("reasoning\nFinal answer: {\"severity\": \"Moderate+\", \"confidence\": \"High\"}");
  EXPECT_EQ(j.level, DistressLevel::moderate_plus);
  EXPECT_EQ(j.confidence, Confidence::high);
  j = parse_distress_response("I'd say \"severity\": \"mild\" overall");
  EXPECT_EQ(j.level, DistressLevel::mild);
  EXPECT_FALSE(j.confidence.has_value());
  // the final answer line wins over earlier mentions
  j = parse_distress_response("\"severity\": \"None\"\nFinal answer: {\"severity\": \"Mild\", \"confidence\": \"Low\"}");
  EXPECT_EQ(j.level, DistressLevel::mild);
  EXPECT_EQ(j.confidence, Confidence::low);
  EXPECT_THROW(parse_distress_response("Final answer: {\"severity\": \"Severe\"}"), ParseError);
  EXPECT_THROW(parse_distress_response("nothing"), ParseError);
}

TEST(ProbeObjective, GradientMatchesFiniteDifferences) {
  const std::size_t n = 10, d = 4;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0, 1);
  std::vector<double> x(n * d), params(3 * d + 3);
  std::vector<int> y(n);
  for (auto& v : x) v = z(rng);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 3);
  for (auto& v : params) v = 0.5 * z(rng);
  std::vector<double> grad;
  const double f = softmax_objective(x, d, y, 0.7, params, &grad);
  EXPECT_TRUE(std::isfinite(f));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto hi = params, lo = params;
    hi[k] += 1e-6;
    lo[k] -= 1e-6;
    const double fd = (softmax_objective(x, d, y, 0.7, hi, nullptr) - softmax_objective(x, d, y, 0.7, lo, nullptr)) / 2e-6;
    EXPECT_NEAR(grad[k], fd, 1e-4 * std::max(1.0, std::abs(fd))) << k;
  }
}

TEST(Probe, SeparableGaussians) {
  const auto train = synthetic::gaussian_classes(200, 64, 5.0, 1);
  const auto test = synthetic::gaussian_classes(100, 64, 5.0, 2);
  TrainingTrace trace;
  const auto model = train_probe(train, {}, &trace);
  EXPECT_TRUE(trace.converged);
  for (std::size_t i = 1; i < trace.loss.size(); ++i) EXPECT_LE(trace.loss[i], trace.loss[i - 1] + 1e-12);
  std::vector<int> pred;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto p = model.predict_proba(test.row(i));
    pred.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  EXPECT_GE(classification_metrics(test.y, pred).macro_f1, 0.95);
}

TEST(Probe, Preconditions) {
  auto small = synthetic::gaussian_classes(3, 4, 5.0, 1);
  EXPECT_THROW(train_probe(small), PreconditionError);
  auto one_class = synthetic::gaussian_classes(10, 4, 5.0, 1);
  std::fill(one_class.y.begin(), one_class.y.end(), 1);
  EXPECT_THROW(train_probe(one_class), PreconditionError);
}

TEST(Metrics, MacroF1AndConfusion) {
  const std::vector<int> t{0, 0, 1, 1, 2, 2}, p{0, 1, 1, 1, 2, 0};
  const auto m = classification_metrics(t, p);
  EXPECT_NEAR(m.per_class_f1[0], 0.5, 1e-12);
  EXPECT_NEAR(m.per_class_f1[1], 0.8, 1e-12);
  EXPECT_NEAR(m.per_class_f1[2], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.macro_f1, (0.5 + 0.8 + 2.0 / 3.0) / 3, 1e-12);
  EXPECT_NEAR(m.accuracy, 4.0 / 6.0, 1e-12);
  EXPECT_EQ(m.confusion[2][0], 1u);
  const std::vector<int> perfect{0, 1, 1};
  EXPECT_DOUBLE_EQ(classification_metrics(perfect, perfect).macro_f1, 1.0);
}

TEST(GroupedFolds, NoGroupSpansTwoFolds) {
  std::vector<std::string> groups;
  for (int i = 0; i < 50; ++i) groups.push_back("g" + std::to_string(i % 13));
  for (int k = 2; k <= 6; ++k) {
    const auto folds = grouped_folds(groups, k, 9);
    std::map<std::string, std::set<int>> seen;
    for (std::size_t i = 0; i < groups.size(); ++i) seen[groups[i]].insert(folds[i]);
    for (const auto& [g, f] : seen) EXPECT_EQ(f.size(), 1u) << g;
    EXPECT_EQ(std::set<int>(folds.begin(), folds.end()).size(), static_cast<std::size_t>(k));
    EXPECT_EQ(grouped_folds(groups, k, 9), folds);
  }
  EXPECT_THROW(grouped_folds(groups, 14, 1), PreconditionError);
  EXPECT_THROW(grouped_folds(groups, 1, 1), PreconditionError);
}

TEST(CrossValidation, StandardizationFromTrainingFoldOnly) {
  const auto data = synthetic::gaussian_classes(20, 8, 3.0, 4, 3);
  const auto cv = cross_validate(data, 4, 1);
  ASSERT_EQ(cv.fold_standardization.size(), 4u);
  for (int f = 0; f < 4; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (cv.fold_of_row[i] != f) train.push_back(i);
    }
    EXPECT_EQ(cv.fold_standardization[f], fit_standardization(subset(data, train)));
  }
  EXPECT_EQ(cross_validate(data, 4, 1).metrics.macro_f1, cv.metrics.macro_f1);
}

TEST(Ensemble, SelectionAndCombination) {
  EXPECT_EQ(select_layers({{10, 0.756}, {14, 0.760}, {15, 0.758}}, 3), (std::vector<std::uint16_t>{14, 15, 10}));
  EXPECT_EQ(select_layers({{18, 0.70}, {19, 0.70}}, 1), (std::vector<std::uint16_t>{18}));
  EXPECT_THROW(select_layers({{1, 0.5}}, 2), PreconditionError);

  const std::vector<std::array<double, 3>> two{{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}};
  const auto e = combine_probabilities(two);
  EXPECT_NEAR(e.probabilities[0], 0.4, 1e-12);
  EXPECT_NEAR(e.probabilities[1], 0.4, 1e-12);
  EXPECT_EQ(e.level, DistressLevel::mild);
  const std::vector<std::array<double, 3>> uniform{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  EXPECT_EQ(combine_probabilities(uniform).level, DistressLevel::moderate_plus);
}

TEST(Ensemble, SingleMemberIdentityAndSerialization) {
  const auto data = synthetic::gaussian_classes(20, 6, 4.0, 8);
  std::vector<HiddenStateRecord> recs;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::uint16_t layer : {0, 1}) {
      HiddenStateRecord r{"r" + std::to_string(i), data.groups[i], layer, static_cast<DistressLevel>(data.y[i]), {}};
      for (double v : data.row(i)) r.vector.push_back(static_cast<float>(v * (layer + 1)));
      recs.push_back(r);
    }
  }
  const std::vector<LayerEvaluation> evals{{0, {}}, {1, {}}};
  auto ens = build_ensemble(recs, evals, 1);
  ASSERT_EQ(ens.members.size(), 1u);
  const auto& probe = ens.members[0];
  const auto& v = recs[0].vector;
  const auto direct = probe.predict_proba(std::span<const float>(v));
  const auto via = ensemble_predict(ens, {{probe.layer, v}});
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(via.probabilities[c], direct[c], 1e-15);
  EXPECT_THROW(ensemble_predict(ens, {{static_cast<std::uint16_t>(probe.layer + 7), v}}), PreconditionError);

  const auto back = ensemble_from_json(to_json(ens));
  const auto again = ensemble_predict(back, {{probe.layer, v}});
  EXPECT_EQ(again.probabilities, via.probabilities);
}

TEST(HumanComparison, PerfectAndShifted) {
  std::vector<DistressPair> perfect{{DistressLevel::none, DistressLevel::none},
                                    {DistressLevel::mild, DistressLevel::mild},
                                    {DistressLevel::moderate_plus, DistressLevel::moderate_plus}};
  auto c = compare_with_human(perfect);
  EXPECT_DOUBLE_EQ(c.exact_match_rate, 1.0);
  EXPECT_NEAR(*c.quadratic_weighted_kappa, 1.0, 1e-12);

  // estimates one level above the human label where possible
  std::vector<DistressPair> shifted{{DistressLevel::mild, DistressLevel::none},
                                    {DistressLevel::mild, DistressLevel::none},
                                    {DistressLevel::moderate_plus, DistressLevel::mild},
                                    {DistressLevel::moderate_plus, DistressLevel::mild}};
  c = compare_with_human(shifted);
  EXPECT_DOUBLE_EQ(c.exact_match_rate, 0.0);
  std::array<std::array<double, 3>, 3> conf{};
  for (const auto& p : shifted) conf[ordinal(p.human)][ordinal(p.estimated)] += 1;
  EXPECT_NEAR(*c.quadratic_weighted_kappa, *oracle::quadratic_kappa(conf), 1e-12);
  EXPECT_DOUBLE_EQ(c.row_shares[0][1], 1.0);
  EXPECT_THROW(compare_with_human({}), PreconditionError);
}
