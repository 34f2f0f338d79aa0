#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ssbc/agreement.hpp"

using namespace ssbc;

namespace {
// vector<bool> is bit-packed, so copy into contiguous storage
std::optional<double> kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::unique_ptr<bool[]> x(new bool[a.size() + 1]), y(new bool[b.size() + 1]);
  std::copy(a.begin(), a.end(), x.get());
  std::copy(b.begin(), b.end(), y.get());
  return cohen_kappa(std::span<const bool>(x.get(), a.size()), std::span<const bool>(y.get(), b.size()));
}

constexpr auto A = SsbcLabel::sympathy;
constexpr auto B = SsbcLabel::empathy;
constexpr auto C = SsbcLabel::advice;

AnnotationRun run_of(const std::vector<LabelSet>& sets) {
  AnnotationRun r;
  for (std::size_t i = 0; i < sets.size(); ++i) r.turns[{"c", i}] = {sets[i], AnnotationStatus::ok, ""};
  return r;
}
}  // namespace

TEST(Agreement, SingleTurnFormula) {
  const std::vector<LabelMask> a{static_cast<LabelMask>(bit(A) | bit(B))}, b{bit(A)};
  EXPECT_NEAR(pairwise_f1(a, b), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(pairwise_jaccard(a, b), 0.5, 1e-15);
}

TEST(Agreement, BothEmptyTurnsContributeNothing) {
  const std::vector<LabelMask> a{bit(A), 0}, b{static_cast<LabelMask>(bit(A) | bit(C)), 0};
  EXPECT_NEAR(pairwise_f1(a, b), 2.0 / 3.0, 1e-15);
  const std::vector<std::vector<LabelMask>> runs{{0, bit(A)}, {0, bit(B)}};
  EXPECT_NEAR(exact_match_rate(runs), 0.5, 1e-15);
  const std::vector<LabelMask> empty{0, 0};
  EXPECT_DOUBLE_EQ(pairwise_f1(empty, empty), 1.0);
  EXPECT_DOUBLE_EQ(pairwise_jaccard(empty, empty), 1.0);
}

TEST(Agreement, IdenticalRuns) {
  const auto r = run_of({LabelSet{A}, LabelSet{A, B}, LabelSet{}});
  const std::array<const AnnotationRun*, 3> runs{&r, &r, &r};
  const auto s = agreement_metrics(runs);
  EXPECT_DOUBLE_EQ(s.mean_f1, 1.0);
  EXPECT_DOUBLE_EQ(s.mean_jaccard, 1.0);
  EXPECT_DOUBLE_EQ(s.exact_threeway_match_rate, 1.0);
  EXPECT_EQ(s.pairwise_f1.size(), 3u);
}

TEST(Agreement, MismatchedKeysThrow) {
  const auto r1 = run_of({LabelSet{A}});
  const auto r2 = run_of({LabelSet{A}, LabelSet{B}});
  const std::array<const AnnotationRun*, 2> runs{&r1, &r2};
  EXPECT_THROW(agreement_metrics(runs), std::runtime_error);
}

TEST(Kappa, Examples) {
  std::vector<bool> a, b;
  auto push = [&](bool x, bool y, int n) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  push(true, true, 40);
  push(false, false, 40);
  push(true, false, 10);
  push(false, true, 10);
  EXPECT_NEAR(*kappa(a, b), 0.6, 1e-12);

  const std::vector<bool> x{true, false, true, false}, all_yes{true, true, true, true};
  EXPECT_NEAR(*kappa(x, x), 1.0, 1e-12);
  EXPECT_NEAR(*kappa(all_yes, x), 0.0, 1e-12);
  EXPECT_FALSE(kappa(all_yes, all_yes).has_value());
  EXPECT_THROW(kappa(x, std::vector<bool>{true}), PreconditionError);
  EXPECT_THROW(kappa(std::vector<bool>{}, std::vector<bool>{}), PreconditionError);
}

TEST(Kappa, ExhaustiveSmallTables) {
  for (int n = 1; n <= 5; ++n) {
    for (int bits = 0; bits < (1 << (2 * n)); ++bits) {
      std::vector<bool> a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a[i] = (bits >> i) & 1;
        b[i] = (bits >> (n + i)) & 1;
      }
      const auto got = kappa(a, b);
      const auto want = oracle::cohen_kappa(a, b);
      ASSERT_EQ(got.has_value(), want.has_value());
      if (got) {
        ASSERT_NEAR(*got, *want, 1e-12);
      }
    }
  }
}

TEST(Masi, ExhaustiveOverFourLabels) {
  for (LabelMask a = 0; a < 16; ++a) {
    for (LabelMask b = 0; b < 16; ++b) {
      const double want = oracle::masi(oracle::to_set(a), oracle::to_set(b));
      ASSERT_NEAR(masi_similarity(a, b), want, 1e-12);
      ASSERT_NEAR(masi_distance(a, b), 1 - want, 1e-12);
    }
  }
  EXPECT_NEAR(masi_similarity(bit(A), static_cast<LabelMask>(bit(A) | bit(B))), 0.5 * 2.0 / 3.0, 1e-12);
}

TEST(HumanRater, PerLabelKappaAndExclusion) {
  std::map<TurnKey, LabelSet> model, human;
  for (std::size_t i = 0; i < 20; ++i) {
    model[{"c", i}] = i % 2 ? LabelSet{A} : LabelSet{B};
    human[{"c", i}] = i % 2 ? LabelSet{A} : LabelSet{};
  }
  const auto r = compare_with_rater(model, human, 5);
  EXPECT_EQ(r.items, 20u);
  for (const auto& l : r.per_label) {
    if (l.label == A) {
      ASSERT_TRUE(l.kappa.has_value());
      EXPECT_NEAR(*l.kappa, 1.0, 1e-12);
    }
    if (l.label == B) {
      EXPECT_TRUE(l.excluded);  // no human positives
    }
    if (l.label == C) {
      EXPECT_TRUE(l.excluded);
    }
  }
  // micro F1: 10 shared A, 10 model-only B
  EXPECT_NEAR(r.micro_f1, 2.0 * 10 / (20 + 10), 1e-12);
}

TEST(HumanRater, RecordsAndEmptyOverlap) {
  const auto labels = human_labels_from_records(
      {json{{"conv_id", "c1"}, {"turn", 0}, {"labels", {"Advice", "Teaching"}}}});
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels.begin()->second, (LabelSet{SsbcLabel::advice, SsbcLabel::teaching}));
  std::map<TurnKey, LabelSet> other{{{"zz", 0}, LabelSet{A}}};
  EXPECT_THROW(compare_with_rater(labels, other), PreconditionError);
}
