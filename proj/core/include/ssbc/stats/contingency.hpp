#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ssbc::stats {

/// Row-major count table.
struct CountTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> counts;

  double operator()(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
  double total() const;
};

struct ChiSquareResult {
  double chi2 = 0;
  int df = 0;
  double p = 1;
  double min_expected = 0;
  bool low_expected = false;  // some expected count < 5
};

/// Pearson statistic without continuity correction. Throws PreconditionError
/// when any row or column sum is zero.
ChiSquareResult chi_square(const CountTable& table);

/// sqrt(chi2 / (n (min(rows, cols) - 1)))
double cramers_v(double chi2, double n, std::size_t rows, std::size_t cols);

struct FdrResult {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

/// Benjamini-Hochberg step-up adjustment, returned in input order.
FdrResult bh_fdr(std::span<const double> p_values, double q = 0.05);

/// (max - min) * 100 over at least two rates.
double delta_pp(std::span<const double> rates);

}  // namespace ssbc::stats
