#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace ssbc::oracle {

ChiSquare chi_square(const std::vector<std::vector<double>>& table) {
  const std::size_t r = table.size();
  const std::size_t c = table.front().size();
  std::vector<double> rs(r, 0), cs(c, 0);
  double n = 0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      rs[i] += table[i][j];
      cs[j] += table[i][j];
      n += table[i][j];
    }
  }
  ChiSquare out;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double e = rs[i] * cs[j] / n;
      out.chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  out.df = static_cast<int>((r - 1) * (c - 1));
  out.p = out.chi2 <= 0 ? 1.0 : boost::math::gamma_q(out.df / 2.0, out.chi2 / 2.0);
  return out;
}

double cramers_v(double chi2, double n, std::size_t rows, std::size_t cols) {
  return std::sqrt(chi2 / (n * static_cast<double>(std::min(rows, cols) - 1)));
}

std::vector<double> bh_adjust(const std::vector<double>& p) {
  const double m = static_cast<double>(p.size());
  std::vector<double> out(p.size(), 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[j] < p[i]) continue;
      const double rank = static_cast<double>(std::count_if(p.begin(), p.end(), [&](double v) { return v <= p[j]; }));
      out[i] = std::min(out[i], std::min(1.0, m * p[j] / rank));
    }
  }
  return out;
}

double delta_pp(std::vector<double> rates) {
  std::sort(rates.begin(), rates.end());
  return (rates.back() - rates.front()) * 100.0;
}

std::optional<double> cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) ++n11;
    if (a[i] && !b[i]) ++n10;
    if (!a[i] && b[i]) ++n01;
    if (!a[i] && !b[i]) ++n00;
  }
  const double n = n11 + n10 + n01 + n00;
  const double po = (n11 + n00) / n;
  const double pa = (n11 + n10) / n, pb = (n11 + n01) / n;
  const double pe = pa * pb + (1 - pa) * (1 - pb);
  if (pe == 1.0) return std::nullopt;
  return (po - pe) / (1 - pe);
}

double masi(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::set<int> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
  double m = 0;
  if (a == b) {
    m = 1;
  } else if (std::includes(a.begin(), a.end(), b.begin(), b.end()) ||
             std::includes(b.begin(), b.end(), a.begin(), a.end())) {
    m = 2.0 / 3.0;
  } else if (!inter.empty()) {
    m = 1.0 / 3.0;
  }
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size()) * m;
}

std::optional<double> quadratic_kappa(const std::array<std::array<double, 3>, 3>& o) {
  double n = 0;
  std::array<double, 3> row{}, col{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      n += o[i][j];
      row[i] += o[i][j];
      col[j] += o[i][j];
    }
  }
  double observed = 0, expected = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double w = (i - j) * (i - j) / 4.0;
      observed += w * o[i][j] / n;
      expected += w * row[i] * col[j] / (n * n);
    }
  }
  if (expected == 0) return std::nullopt;
  return 1.0 - observed / expected;
}

std::uint16_t consensus(const std::array<std::uint16_t, 3>& runs, int alphabet) {
  std::vector<std::pair<int, int>> quorum;  // (votes, label)
  for (int l = 0; l < alphabet; ++l) {
    int v = 0;
    for (auto r : runs) v += (r >> l) & 1;
    if (v >= 2) quorum.emplace_back(v, l);
  }
  std::sort(quorum.begin(), quorum.end(), [](auto x, auto y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::uint16_t out = 0;
  for (std::size_t i = 0; i < quorum.size() && i < 3; ++i) out |= static_cast<std::uint16_t>(1u << quorum[i].second);
  return out;
}

std::set<int> to_set(std::uint16_t mask) {
  std::set<int> out;
  for (int l = 0; l < 16; ++l) {
    if (mask & (1u << l)) out.insert(l);
  }
  return out;
}

}  // namespace ssbc::oracle
