#include "drfree/pmax.hpp"

#include <cmath>
#include <stdexcept>

namespace drfree {

double inflation_residual(double lambda, double epsilon, int n) {
  return 0.5 * n * (lambda - 1.0 - std::log(lambda)) - epsilon;
}

double solve_lambda(double epsilon, int n) {
  if (n < 1) throw std::invalid_argument("solve_lambda: dimension must be >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("solve_lambda: epsilon must be finite and >= 0");
  if (epsilon == 0.0) return 1.0;

  double lo = 1.0;
  double hi = 2.0;
  while (inflation_residual(hi, epsilon, n) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  // Bisection until the bracket is tight, then Newton on g(l) = (n/2)(1 - 1/l).
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (inflation_residual(mid, epsilon, n) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double lambda = 0.5 * (lo + hi);
  for (int it = 0; it < 4; ++it) {
    const double r = inflation_residual(lambda, epsilon, n);
    if (std::abs(r) <= 0.25 * kRootTol) break;
    const double slope = 0.5 * n * (1.0 - 1.0 / lambda);
    if (slope <= 0.0) break;
    const double next = lambda - r / slope;
    if (!(next > 1.0)) break;
    lambda = next;
  }
  return lambda;
}

PmaxResult build_pmax(const GaussianKernel& nominal, double epsilon) {
  const double lambda = solve_lambda(epsilon, nominal.dim());
  if (lambda == 1.0) return {nominal, 1.0, epsilon, 0.0};
  GaussianKernel inflated = nominal.scaled(lambda);
  const double achieved = kl_gaussian(inflated, nominal);
  return {std::move(inflated), lambda, epsilon, achieved};
}

double nominal_to_pmax_kl(double lambda, int n) {
  if (!(lambda >= 1.0)) throw std::invalid_argument("nominal_to_pmax_kl: lambda must be >= 1");
  if (n < 1) throw std::invalid_argument("nominal_to_pmax_kl: dimension must be >= 1");
  return 0.5 * n * (1.0 / lambda - 1.0 + std::log(lambda));
}

}  // namespace drfree
