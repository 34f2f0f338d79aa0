#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssbc::stats {

/// Dense row-major design matrix with column names.
struct Design {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<std::string> names;

  Design() = default;
  Design(std::size_t r, std::vector<std::string> column_names);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct LogitFit {
  std::vector<double> beta;
  std::vector<double> std_errors;  // model-based
  std::vector<double> covariance;  // cols x cols, row-major
  double log_likelihood = 0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;  // fitted probabilities at 0/1 or degenerate outcome
  std::string warning;
};

/// Maximum-likelihood logit by IRLS. Stops when the largest coefficient
/// change is below 1e-8 or after 100 iterations. Throws PreconditionError
/// when X is rank deficient or n <= cols; separation is flagged, not thrown.
LogitFit fit_logistic(const Design& x, std::span<const int> y);

double logit_log_likelihood(const Design& x, std::span<const int> y, std::span<const double> beta);

struct ClusteredSe {
  std::vector<double> std_errors;
  std::vector<double> covariance;
  std::size_t clusters = 0;
};

/// Sandwich B M B with B the inverse information at the fit, M the sum of
/// outer products of per-cluster score sums, scaled by G/(G-1).
ClusteredSe clustered_se(const LogitFit& fit, const Design& x, std::span<const int> y,
                         std::span<const std::string> clusters);

}  // namespace ssbc::stats
