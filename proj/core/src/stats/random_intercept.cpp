#include "ssbc/stats/random_intercept.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "ssbc/types.hpp"

namespace ssbc::stats {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kMinLogSigma = -25.0;
constexpr double kMaxLogSigma = 10.0;
constexpr double kDecrementTolerance = 1e-12;

double sigmoid(double eta) { return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta)); }
double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

}  // namespace

ClusterIndex index_clusters(std::span<const std::string> clusters) {
  std::map<std::string, std::size_t> ids;
  ClusterIndex out;
  out.of_row.reserve(clusters.size());
  for (const auto& c : clusters) {
    auto [it, inserted] = ids.try_emplace(c, ids.size());
    out.of_row.push_back(it->second);
  }
  out.count = ids.size();
  return out;
}

double random_intercept_log_likelihood(const Design& x, std::span<const int> y, const ClusterIndex& clusters,
                                       std::span<const double> beta, double log_sigma,
                                       std::vector<double>* gradient) {
  const auto k = x.cols;
  const double inv_var = std::exp(-2.0 * log_sigma);  // 1 / sigma^2
  std::vector<double> eta0(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double e = 0;
    for (std::size_t j = 0; j < k; ++j) e += x(i, j) * beta[j];
    eta0[i] = e;
  }
  std::vector<std::vector<std::size_t>> members(clusters.count);
  for (std::size_t i = 0; i < x.rows; ++i) members[clusters.of_row[i]].push_back(i);

  if (gradient) gradient->assign(k + 1, 0.0);
  double total = 0;
  std::vector<double> score_x(k), hw_x(k), w_x(k);
  for (const auto& rows : members) {
    // Newton with step halving on the concave mode equation.
    auto objective = [&](double u) {
      double f = -0.5 * u * u * inv_var;
      for (auto i : rows) f += y[i] * (eta0[i] + u) - log1pexp(eta0[i] + u);
      return f;
    };
    double u = 0;
    double fu = objective(u);
    for (int it = 0; it < 200; ++it) {
      double g = -u * inv_var, h = inv_var;
      for (auto i : rows) {
        const double p = sigmoid(eta0[i] + u);
        g += y[i] - p;
        h += p * (1 - p);
      }
      double step = g / h;
      double next = u + step, fn = objective(next);
      while (fn < fu && std::abs(step) > 1e-15) {
        step *= 0.5;
        next = u + step;
        fn = objective(next);
      }
      u = next;
      fu = fn;
      if (std::abs(step) < 1e-12 * std::max(1.0, std::abs(u))) break;
    }

    double h = inv_var, hu = 0;
    std::ranges::fill(score_x, 0.0);
    std::ranges::fill(hw_x, 0.0);
    std::ranges::fill(w_x, 0.0);
    for (auto i : rows) {
      const double p = sigmoid(eta0[i] + u);
      const double w = p * (1 - p);
      h += w;
      hu += w * (1 - 2 * p);
      if (gradient) {
        for (std::size_t j = 0; j < k; ++j) {
          score_x[j] += (y[i] - p) * x(i, j);
          hw_x[j] += w * (1 - 2 * p) * x(i, j);
          w_x[j] += w * x(i, j);
        }
      }
    }
    // log of the Laplace approximation to the cluster integral
    total += fu - log_sigma - 0.5 * std::log(h);
    if (gradient) {
      auto& gr = *gradient;
      for (std::size_t j = 0; j < k; ++j) {
        const double du = -w_x[j] / h;
        gr[j] += score_x[j] - 0.5 / h * (hw_x[j] + hu * du);
      }
      const double sum_w = h - inv_var;
      gr[k] += u * u * inv_var - sum_w / h - hu * u * inv_var / (h * h);
    }
  }
  return total;
}

RandomInterceptFit fit_random_intercept_logit(const Design& x, std::span<const int> y,
                                              std::span<const std::string> clusters,
                                              const RandomInterceptOptions& options) {
  if (clusters.size() != x.rows) throw PreconditionError("one cluster id per observation required");
  const auto index = index_clusters(clusters);
  if (index.count < 5) throw PreconditionError("random-intercept logit needs at least 5 clusters");
  const auto plain = fit_logistic(x, y);
  const auto k = x.cols;
  const auto dim = static_cast<Eigen::Index>(k + 1);

  // Minimize the negative log-likelihood over theta = (beta, log sigma).
  auto negll = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    std::vector<double> g;
    const double ll = random_intercept_log_likelihood(x, y, index, {theta.data(), k}, theta[dim - 1],
                                                      grad ? &g : nullptr);
    if (grad) *grad = -Eigen::Map<const Eigen::VectorXd>(g.data(), dim);
    return -ll;
  };
  auto numeric_hessian = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd hess(dim, dim);
    Eigen::VectorXd gp(dim), gm(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd t = theta;
      t[j] += h;
      negll(t, &gp);
      t[j] -= 2 * h;
      negll(t, &gm);
      hess.col(j) = (gp - gm) / (2 * h);
    }
    return Eigen::MatrixXd(0.5 * (hess + hess.transpose()));
  };

  Eigen::VectorXd theta(dim);
  for (std::size_t j = 0; j < k; ++j) theta[static_cast<Eigen::Index>(j)] = plain.beta[j];
  theta[dim - 1] = std::log(0.5);
  Eigen::VectorXd grad(dim);
  double f = negll(theta, &grad);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(dim, dim);
  {
    const Eigen::MatrixXd h0 = numeric_hessian(theta);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h0);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0).all()) {
      hinv = ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
    } else {
      hinv /= std::max(1.0, grad.cwiseAbs().maxCoeff());
    }
  }

  RandomInterceptFit fit;
  Eigen::VectorXd grad_new(dim);
  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    if (grad.cwiseAbs().maxCoeff() < options.gradient_tolerance) break;
    if (0.5 * grad.dot(hinv * grad) < kDecrementTolerance * (1.0 + std::abs(f))) break;
    Eigen::VectorXd dir = -hinv * grad;
    double slope = grad.dot(dir);
    if (!(slope < 0)) {
      hinv = Eigen::MatrixXd::Identity(dim, dim) / std::max(1.0, grad.cwiseAbs().maxCoeff());
      dir = -hinv * grad;
      slope = grad.dot(dir);
    }
    double step = 1.0;
    bool accepted = false;
    double f_new = f;
    Eigen::VectorXd trial;
    while (step > 1e-14) {
      trial = theta + step * dir;
      if (trial[dim - 1] >= kMinLogSigma && trial[dim - 1] <= kMaxLogSigma) {
        f_new = negll(trial, &grad_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = trial - theta;
    const Eigen::VectorXd yv = grad_new - grad;
    theta = trial;
    f = f_new;
    grad = grad_new;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
      hinv = (id - rho * s * yv.transpose()) * hinv * (id - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
  }

  fit.gradient_max_norm = grad.cwiseAbs().maxCoeff();
  fit.beta.assign(theta.data(), theta.data() + k);
  fit.sigma_u = std::exp(theta[dim - 1]);
  fit.log_likelihood = -f;

  const Eigen::MatrixXd hess = numeric_hessian(theta);
  const Eigen::MatrixXd cov = hess.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
  // an absolute gradient bound is unreachable on large samples once the
  // predicted decrease drops below the objective's rounding error
  const double decrement = 0.5 * grad.dot(cov * grad);
  fit.converged = fit.gradient_max_norm < options.gradient_tolerance ||
                  (std::isfinite(decrement) && decrement >= 0 && decrement < kDecrementTolerance * (1.0 + std::abs(f)));
  fit.std_errors.resize(k);
  bool finite = true;
  for (std::size_t j = 0; j < k; ++j) {
    const double v = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    finite = finite && v > 0 && std::isfinite(v);
    fit.std_errors[j] = v > 0 && std::isfinite(v) ? std::sqrt(v) : std::nan("");
  }
  const double vs = cov(dim - 1, dim - 1);
  fit.sigma_u_se = vs > 0 && std::isfinite(vs) ? fit.sigma_u * std::sqrt(vs) : std::nan("");
  if (!finite) fit.warning = "information matrix not positive definite";

  if (!fit.converged) {
    fit.warning = "random-intercept fit did not converge; cluster-robust logit reported";
    fit.fallback = plain;
    fit.fallback_se = clustered_se(plain, x, y, clusters);
  }
  return fit;
}

}  // namespace ssbc::stats
