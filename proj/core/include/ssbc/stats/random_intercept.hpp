#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssbc/stats/logistic.hpp"

namespace ssbc::stats {

struct RandomInterceptOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
};

struct RandomInterceptFit {
  std::vector<double> beta;
  std::vector<double> std_errors;
  double sigma_u = 0;
  double sigma_u_se = 0;
  double log_likelihood = 0;  // Laplace approximation
  int iterations = 0;
  double gradient_max_norm = 0;
  bool converged = false;
  std::string warning;
  /// Plain logit with cluster-robust SEs, filled when the fit did not converge.
  std::optional<LogitFit> fallback;
  std::optional<ClusteredSe> fallback_se;
};

/// Cluster index per observation plus the cluster count.
struct ClusterIndex {
  std::vector<std::size_t> of_row;
  std::size_t count = 0;
};
ClusterIndex index_clusters(std::span<const std::string> clusters);

/// Laplace-approximate marginal log-likelihood at (beta, log sigma_u), with
/// its analytic gradient (beta components then log sigma_u) when requested.
double random_intercept_log_likelihood(const Design& x, std::span<const int> y, const ClusterIndex& clusters,
                                       std::span<const double> beta, double log_sigma,
                                       std::vector<double>* gradient = nullptr);

/// Random-intercept logit: per-cluster Newton solve for the intercept mode,
/// BFGS over (beta, log sigma_u). Requires at least 5 clusters.
RandomInterceptFit fit_random_intercept_logit(const Design& x, std::span<const int> y,
                                              std::span<const std::string> clusters,
                                              const RandomInterceptOptions& options = {});

}  // namespace ssbc::stats
