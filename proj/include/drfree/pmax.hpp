#pragma once

#include "drfree/gaussian.hpp"

namespace drfree {

/// Absolute residual tolerance of the inflation root find.
inline constexpr double kRootTol = 1e-10;

/// Maximally diffusive single-step kernel: the nominal covariance inflated
/// uniformly by `lambda` so that KL(kernel || nominal) equals `epsilon`.
struct PmaxResult {
  GaussianKernel kernel;
  double lambda = 1.0;
  double epsilon = 0.0;
  double achieved_kl = 0.0;
};

/// Residual (n/2)(lambda - 1 - ln lambda) - epsilon.
double inflation_residual(double lambda, double epsilon, int n);

/// Unique lambda >= 1 with (n/2)(lambda - 1 - ln lambda) == epsilon.
/// Bisection on a doubling bracket, finished with Newton polish.
double solve_lambda(double epsilon, int n);

PmaxResult build_pmax(const GaussianKernel& nominal, double epsilon);

/// KL(N(mu, Sigma) || N(mu, lambda Sigma)) = (n/2)(1/lambda - 1 + ln lambda).
double nominal_to_pmax_kl(double lambda, int n);

}  // namespace drfree
