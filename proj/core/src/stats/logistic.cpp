#include "ssbc/stats/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "ssbc/types.hpp"

namespace ssbc::stats {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> as_matrix(const Design& x) {
  return {x.values.data(), static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(x.cols)};
}

Eigen::VectorXd as_vector(std::span<const int> y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw PreconditionError("logit outcome must be 0/1");
    v[static_cast<Eigen::Index>(i)] = y[i];
  }
  return v;
}

double sigmoid(double eta) { return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta)); }

// log(1 + exp(eta)) without overflow
double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

void check_shapes(const Design& x, std::span<const int> y) {
  if (x.values.size() != x.rows * x.cols || x.rows != y.size()) throw PreconditionError("design/outcome size mismatch");
}

}  // namespace

Design::Design(std::size_t r, std::vector<std::string> column_names)
    : rows(r), cols(column_names.size()), values(r * column_names.size(), 0.0), names(std::move(column_names)) {}

double logit_log_likelihood(const Design& x, std::span<const int> y, std::span<const double> beta) {
  check_shapes(x, y);
  const auto X = as_matrix(x);
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
  const Eigen::VectorXd eta = X * b;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[static_cast<std::size_t>(i)] * eta[i] - log1pexp(eta[i]);
  return ll;
}

LogitFit fit_logistic(const Design& x, std::span<const int> y) {
  check_shapes(x, y);
  if (x.rows <= x.cols) throw PreconditionError("logit needs more observations than columns");
  const auto X = as_matrix(x);
  const auto yv = as_vector(y);
  if (Eigen::ColPivHouseholderQR<RowMat>(X).rank() < static_cast<Eigen::Index>(x.cols)) {
    throw PreconditionError("design matrix is not of full column rank");
  }
  const auto k = static_cast<Eigen::Index>(x.cols);
  LogitFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  const double ybar = yv.mean();
  if (ybar == 0.0 || ybar == 1.0) {
    fit.separation = true;
    fit.warning = "outcome is constant";
  }
  Eigen::VectorXd p(X.rows());
  Eigen::VectorXd w(X.rows());
  auto refresh = [&] {
    const Eigen::VectorXd eta = X * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
  };
  refresh();
  for (fit.iterations = 0; fit.iterations < 100;) {
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd score = X.transpose() * (yv - p);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all()) {
      fit.separation = true;
      break;
    }
    const Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) {
      fit.separation = true;
      break;
    }
    beta += step;
    ++fit.iterations;
    refresh();
    if (step.cwiseAbs().maxCoeff() < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  const Eigen::VectorXd eta = X * beta;
  if (eta.cwiseAbs().maxCoeff() > 30.0 || !fit.converged) {
    fit.separation = true;
    if (fit.warning.empty()) {
      fit.warning = fit.converged ? "fitted probabilities numerically 0 or 1" : "IRLS did not converge";
    }
  }
  fit.beta.assign(beta.data(), beta.data() + k);
  fit.log_likelihood = logit_log_likelihood(x, y, fit.beta);
  const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  fit.covariance.resize(static_cast<std::size_t>(k * k));
  fit.std_errors.resize(static_cast<std::size_t>(k));
  for (Eigen::Index r = 0; r < k; ++r) {
    fit.std_errors[static_cast<std::size_t>(r)] = std::sqrt(std::max(cov(r, r), 0.0));
    for (Eigen::Index c = 0; c < k; ++c) fit.covariance[static_cast<std::size_t>(r * k + c)] = cov(r, c);
  }
  return fit;
}

ClusteredSe clustered_se(const LogitFit& fit, const Design& x, std::span<const int> y,
                         std::span<const std::string> clusters) {
  check_shapes(x, y);
  if (clusters.size() != x.rows) throw PreconditionError("one cluster id per observation required");
  const auto X = as_matrix(x);
  const auto k = static_cast<Eigen::Index>(x.cols);
  const Eigen::Map<const Eigen::VectorXd> beta(fit.beta.data(), k);

  std::map<std::string, Eigen::VectorXd> scores;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k, k);
  const Eigen::VectorXd eta = X * beta;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double p = sigmoid(eta[i]);
    const Eigen::VectorXd xi = X.row(i).transpose();
    info.noalias() += p * (1 - p) * xi * xi.transpose();
    auto [it, inserted] = scores.try_emplace(clusters[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(k));
    it->second += (y[static_cast<std::size_t>(i)] - p) * xi;
  }
  const double g = static_cast<double>(scores.size());
  if (scores.size() < 2) throw PreconditionError("clustered SEs need at least two clusters");
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [_, s] : scores) meat.noalias() += s * s.transpose();
  const Eigen::MatrixXd bread = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd v = (g / (g - 1.0)) * bread * meat * bread;

  ClusteredSe out;
  out.clusters = scores.size();
  out.covariance.resize(static_cast<std::size_t>(k * k));
  out.std_errors.resize(static_cast<std::size_t>(k));
  for (Eigen::Index r = 0; r < k; ++r) {
    out.std_errors[static_cast<std::size_t>(r)] = std::sqrt(std::max(v(r, r), 0.0));
    for (Eigen::Index c = 0; c < k; ++c) out.covariance[static_cast<std::size_t>(r * k + c)] = v(r, c);
  }
  return out;
}

}  // namespace ssbc::stats
