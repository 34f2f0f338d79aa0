#pragma once

namespace ssbc::stats {

/// Regularized lower incomplete gamma P(a, x). Series for x < a + 1,
/// continued fraction (modified Lentz) otherwise.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), evaluated
/// directly in the continued-fraction region so small tails keep precision.
double regularized_gamma_q(double a, double x);

/// Upper tail of the chi-squared distribution with `df` degrees of freedom.
double chi_square_sf(double x, double df);

/// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);

}  // namespace ssbc::stats
