#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "drfree/gaussian.hpp"

namespace drfree {

/// Cost-to-go evaluated on a next state.
using CostToGo = std::function<double(const Vector&)>;

/// Cost-to-go of every column of a dim x count sample matrix.
using BatchCostToGo = std::function<Vector(const Matrix&)>;

struct MCSettings {
  int count = 256;
  std::uint64_t seed = 0;
};

/// Search interval for the dual multiplier, golden section over ln(alpha).
struct AlphaBracket {
  double lo = 1e-3;
  double hi = 1e3;
  int iterations = 60;
};

/// Per state-action ambiguity parameters. The effective dynamics radius is
/// rho * eta_dyn; a nonzero delta_cost augments it with the cost channel.
struct AmbiguitySpec {
  double eta_dyn = 0.0;
  double delta_cost = 0.0;
  double sigma_cost = 1.0;
  double rho = 1.0;

  void validate() const;
};

enum class DualBoundary {
  interior,
  lower,        // optimum at alpha -> 0, value taken as the sample supremum
  upper,        // search exhausted at alpha_max; reported, not hidden
  zero_radius,  // eta == 0: inner max is attained at the nominal kernel
};

const char* to_string(DualBoundary b);

struct AmbiguityCost {
  double c_tilde = 0.0;
  double multiplier = 0.0;
  double eta_used = 0.0;
  int dual_evals = 0;
  int mc_samples = 0;
  DualBoundary boundary = DualBoundary::interior;
};

/// rho * eta_dyn + delta_cost^2 / (2 sigma_cost^2).
double augmented_radius(const AmbiguitySpec& spec);

/**
 * Monte Carlo Donsker-Varadhan dual with a frozen sample batch.
 *
 * Holds z_j = ln nominal(x_j) - ln generative(x_j) + cost(x_j) for draws
 * x_j ~ nominal. Every alpha probe reuses the same batch, so value(alpha)
 * is a smooth deterministic convex function of alpha.
 *
 *   value(alpha) = alpha ln( (1/m) sum_j exp(z_j / alpha) ) + alpha eta + psi / alpha
 *
 * psi is the cost-channel term sigma^2 / 2, nonzero only when the cost
 * perturbation bound is active.
 */
class DualObjective {
 public:
  DualObjective(Vector z, double eta, double psi = 0.0);

  static DualObjective from_samples(const GaussianKernel& nominal,
                                    const GaussianKernel& generative, const CostToGo& cost,
                                    double eta, const MCSettings& mc, double psi = 0.0);
  static DualObjective from_samples(const GaussianKernel& nominal,
                                    const GaussianKernel& generative, const BatchCostToGo& cost,
                                    double eta, const MCSettings& mc, double psi = 0.0);

  double value(double alpha) const;
  /// Delta-method standard error of value(alpha) from the sample spread.
  double standard_error(double alpha) const;
  /// alpha -> 0 limit: empirical essential supremum of z.
  double supremum() const noexcept { return z_max_; }
  /// alpha -> infinity limit (eta = psi = 0): the sample mean of z.
  double mean() const noexcept { return z_mean_; }
  double eta() const noexcept { return eta_; }
  double psi() const noexcept { return psi_; }
  int samples() const noexcept { return static_cast<int>(z_.size()); }
  const Vector& z() const noexcept { return z_; }

 private:
  Vector z_;
  double eta_;
  double psi_;
  double z_max_;
  double z_mean_;
};

double dual_value(double alpha, const GaussianKernel& nominal,
                  const GaussianKernel& generative, const CostToGo& cost, double eta,
                  const MCSettings& mc);

/// Minimizes a prepared dual over the multiplier bracket.
AmbiguityCost minimize_dual(const DualObjective& dual, const AlphaBracket& bracket = {});

AmbiguityCost cost_of_ambiguity(const GaussianKernel& nominal, const GaussianKernel& generative,
                                const CostToGo& cost, double eta, const MCSettings& mc,
                                const AlphaBracket& bracket = {});

/// Radius from augmented_radius(spec); adds the cost-channel term when
/// spec.delta_cost > 0.
AmbiguityCost cost_of_ambiguity(const GaussianKernel& nominal, const GaussianKernel& generative,
                                const CostToGo& cost, const AmbiguitySpec& spec,
                                const MCSettings& mc, const AlphaBracket& bracket = {});
AmbiguityCost cost_of_ambiguity(const GaussianKernel& nominal, const GaussianKernel& generative,
                                const BatchCostToGo& cost, const AmbiguitySpec& spec,
                                const MCSettings& mc, const AlphaBracket& bracket = {});

struct AugmentedCheck {
  double kl_aug = 0.0;
  bool feasible = false;
};

/// KL of the augmented (state, running cost) kernel via the chain rule, and
/// whether it lies inside the augmented ball.
AugmentedCheck augmented_kl_check(const GaussianKernel& nominal_dyn,
                                  const GaussianKernel& true_dyn, double delta_c,
                                  const AmbiguitySpec& spec);

/// rho * KL(goal || nominal).
double eta_from_goal(const GaussianKernel& goal, const GaussianKernel& nominal, double rho);

}  // namespace drfree
