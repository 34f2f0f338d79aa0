#include "ssbc/stats/contingency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssbc/stats/special_functions.hpp"
#include "ssbc/types.hpp"

namespace ssbc::stats {

double CountTable::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

ChiSquareResult chi_square(const CountTable& table) {
  if (table.rows < 2 || table.cols < 2 || table.counts.size() != table.rows * table.cols) {
    throw PreconditionError("chi-square needs at least a 2x2 table");
  }
  std::vector<double> row(table.rows, 0.0), col(table.cols, 0.0);
  for (std::size_t r = 0; r < table.rows; ++r) {
    for (std::size_t c = 0; c < table.cols; ++c) {
      const double v = table(r, c);
      if (v < 0 || !std::isfinite(v)) throw PreconditionError("counts must be finite and non-negative");
      row[r] += v;
      col[c] += v;
    }
  }
  if (std::ranges::any_of(row, [](double v) { return v <= 0; }) ||
      std::ranges::any_of(col, [](double v) { return v <= 0; })) {
    throw PreconditionError("chi-square undefined: zero row or column total");
  }
  const double n = std::accumulate(row.begin(), row.end(), 0.0);
  ChiSquareResult out;
  out.min_expected = n;
  for (std::size_t r = 0; r < table.rows; ++r) {
    for (std::size_t c = 0; c < table.cols; ++c) {
      const double e = row[r] * col[c] / n;
      const double diff = table(r, c) - e;
      out.chi2 += diff * diff / e;
      out.min_expected = std::min(out.min_expected, e);
    }
  }
  out.df = static_cast<int>((table.rows - 1) * (table.cols - 1));
  out.p = chi_square_sf(out.chi2, out.df);
  out.low_expected = out.min_expected < 5.0;
  return out;
}

double cramers_v(double chi2, double n, std::size_t rows, std::size_t cols) {
  if (!(n > 0) || std::min(rows, cols) < 2 || chi2 < 0) throw PreconditionError("cramers_v domain violation");
  return std::sqrt(chi2 / (n * static_cast<double>(std::min(rows, cols) - 1)));
}

FdrResult bh_fdr(std::span<const double> p_values, double q) {
  const auto m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0 && p <= 1)) throw PreconditionError("p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  FdrResult out{std::vector<double>(m), std::vector<bool>(m)};
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const auto i = order[k];
    running = std::min(running, p_values[i] * static_cast<double>(m) / static_cast<double>(k + 1));
    out.adjusted[i] = std::min(running, 1.0);
  }
  for (std::size_t i = 0; i < m; ++i) out.reject[i] = out.adjusted[i] <= q;
  return out;
}

double delta_pp(std::span<const double> rates) {
  if (rates.size() < 2) throw PreconditionError("delta_pp needs at least two rates");
  const auto [lo, hi] = std::ranges::minmax_element(rates);
  return (*hi - *lo) * 100.0;
}

}  // namespace ssbc::stats
