#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ssbc/stats/contingency.hpp"
#include "ssbc/types.hpp"

using namespace ssbc;
using namespace ssbc::stats;

TEST(ChiSquare, TwoByTwoExample) {
  const auto r = chi_square({2, 2, {10, 20, 20, 10}});
  EXPECT_NEAR(r.chi2, 20.0 / 3.0, 1e-12);
  EXPECT_EQ(r.df, 1);
  EXPECT_NEAR(r.p, 0.00982, 1e-5);
  EXPECT_FALSE(r.low_expected);
  EXPECT_DOUBLE_EQ(r.min_expected, 15.0);
}

TEST(ChiSquare, ZeroMarginIsRejected) {
  EXPECT_THROW(chi_square({2, 2, {0, 0, 3, 4}}), PreconditionError);
  EXPECT_THROW(chi_square({2, 2, {1, -1, 3, 4}}), PreconditionError);
  EXPECT_THROW(chi_square({1, 2, {1, 2}}), PreconditionError);
}

TEST(ChiSquare, LowExpectedFlag) {
  const auto r = chi_square({2, 2, {1, 9, 2, 8}});
  EXPECT_TRUE(r.low_expected);
}

TEST(ChiSquare, RandomTablesMatchOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 5), cell(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = dim(rng), cols = dim(rng);
    std::vector<std::vector<double>> t(rows, std::vector<double>(cols));
    CountTable table{rows, cols, {}};
    for (auto& row : t) {
      for (auto& v : row) {
        v = cell(rng);
        table.counts.push_back(v);
      }
    }
    const auto got = chi_square(table);
    const auto want = oracle::chi_square(t);
    EXPECT_NEAR(got.chi2, want.chi2, 1e-9);
    EXPECT_EQ(got.df, want.df);
    EXPECT_NEAR(got.p, want.p, 1e-6);
  }
}

TEST(CramersV, Examples) {
  EXPECT_NEAR(cramers_v(20.0 / 3.0, 60, 2, 2), 1.0 / 3.0, 1e-12);
  // distress x teaching back-check
  EXPECT_NEAR(cramers_v(143.5, 3170, 3, 2), 0.2128, 5e-4);
  EXPECT_NEAR(cramers_v(143.5, 3170, 3, 2), 0.213, 5e-4);
  EXPECT_THROW(cramers_v(1.0, 0, 2, 2), PreconditionError);
}

TEST(BhFdr, HandStepUp) {
  const std::vector<double> p{0.01, 0.02, 0.03, 0.5};
  const auto r = bh_fdr(p, 0.05);
  ASSERT_EQ(r.adjusted.size(), 4u);
  EXPECT_NEAR(r.adjusted[0], 0.04, 1e-12);
  EXPECT_NEAR(r.adjusted[1], 0.04, 1e-12);
  EXPECT_NEAR(r.adjusted[2], 0.04, 1e-12);
  EXPECT_NEAR(r.adjusted[3], 0.5, 1e-12);
  EXPECT_EQ(r.reject, (std::vector<bool>{true, true, true, false}));
}

TEST(BhFdr, InputOrderAndTies) {
  const std::vector<double> p{0.5, 0.01, 0.03, 0.03, 0.2};
  const auto r = bh_fdr(p);
  const auto want = oracle::bh_adjust(p);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(r.adjusted[i], want[i], 1e-12);
  EXPECT_THROW(bh_fdr(std::vector<double>{0.1, 1.5}), PreconditionError);
  EXPECT_TRUE(bh_fdr(std::vector<double>{}).adjusted.empty());
}

TEST(DeltaPp, Examples) {
  EXPECT_NEAR(delta_pp(std::vector<double>{0.358, 0.083}), 27.5, 1e-9);
  EXPECT_NEAR(delta_pp(std::vector<double>{0.284, 0.594}), 31.0, 1e-9);
  EXPECT_NEAR(delta_pp(std::vector<double>{0.2, 0.5, 0.1}), 40.0, 1e-9);
  EXPECT_THROW(delta_pp(std::vector<double>{0.2}), PreconditionError);
}
