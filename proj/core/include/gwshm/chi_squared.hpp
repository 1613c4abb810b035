#pragma once

namespace gwshm {

/// Regularized lower incomplete gamma function P(a, x) = γ(a, x) / Γ(a)
/// for a > 0, x >= 0.  Evaluated by the power series for x < a + 1 and by
/// the Lentz continued fraction for the upper tail otherwise; both
/// converge to near machine precision.
double regularized_lower_gamma(double a, double x);

/// χ² cumulative distribution with d degrees of freedom:
/// F(x; d) = P(d/2, x/2).  Requires x >= 0 and d >= 1.
double chi2_cdf(double x, int dof);

/// Inverse of chi2_cdf in x: the value q with chi2_cdf(q, d) = p, resolved
/// by bracketed bisection on the CDF to 1e-10 relative accuracy.
/// Requires 0 < p < 1.
double chi2_quantile(double p, int dof);

}  // namespace gwshm
