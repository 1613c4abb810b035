#include "gwshm/chi_squared.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gwshm/error.hpp"

namespace gwshm {

namespace {

constexpr int kMaxIterations = 500;
constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Power series for P(a, x): γ(a,x) = x^a e^{-x} Σ_{k>=0} x^k / (a(a+1)...(a+k)).
/// Reliable for x < a + 1 where terms decrease quickly.
double lower_gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int k = 0; k < kMaxIterations; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw NumericError("incomplete gamma series did not converge (a=" +
                     std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

/// Modified Lentz continued fraction for Q(a, x) = 1 - P(a, x).
/// Reliable for x >= a + 1.
double upper_gamma_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw NumericError("incomplete gamma continued fraction did not converge (a=" +
                     std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

}  // namespace

double regularized_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw NumericError("incomplete gamma requires a > 0");
  if (!(x >= 0.0)) throw NumericError("incomplete gamma requires x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return lower_gamma_series(a, x);
  return 1.0 - upper_gamma_fraction(a, x);
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw NumericError("chi-squared needs dof >= 1");
  if (!(x >= 0.0)) throw NumericError("chi-squared CDF needs x >= 0");
  return regularized_lower_gamma(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  if (dof < 1) throw NumericError("chi-squared needs dof >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw NumericError("chi-squared quantile needs p in (0, 1), got " +
                       std::to_string(p));

  // Bracket: the mean d already exceeds the median, so grow the upper end
  // geometrically until the CDF passes p; shrink the lower end likewise for
  // very small p.
  double lo = 0.0;
  double hi = static_cast<double>(dof);
  while (chi2_cdf(hi, dof) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("chi-squared quantile bracket overflow");
  }

  // Bisection to 1e-10 width relative to the root itself, so quantiles far
  // out in either tail (p near 0 or near 1) keep full relative accuracy.
  // The CDF is strictly increasing, so bisection cannot stall.
  for (int i = 0; i < 5000; ++i) {
    if (hi - lo <= lo * 1e-10 + 1e-300) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted at double resolution
    if (chi2_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace gwshm
