#include "drfree/ambiguity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "drfree/line_search.hpp"

namespace drfree {

GoldenResult golden_section_minimize(const std::function<double(double)>& f, double a, double b,
                                     int iterations) {
  if (!(a < b)) throw std::invalid_argument("golden_section_minimize: empty bracket");
  constexpr double kInvPhi = 0.6180339887498948482;
  const double a0 = a;
  const double b0 = b;

  GoldenResult best;
  best.fx = std::numeric_limits<double>::infinity();
  auto probe = [&](double x) {
    const double v = f(x);
    ++best.evaluations;
    if (v < best.fx) {
      best.fx = v;
      best.x = x;
    }
    return v;
  };

  const double fa = probe(a);
  const double fb = probe(b);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = probe(c);
  double fd = probe(d);
  for (int it = 0; it < iterations; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = probe(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = probe(d);
    }
  }
  best.at_lower = (a == a0) && fa <= fc;
  best.at_upper = (b == b0) && fb <= fd;
  return best;
}

void AmbiguitySpec::validate() const {
  if (!(eta_dyn >= 0.0) || !std::isfinite(eta_dyn))
    throw std::invalid_argument("ambiguity: eta_dyn must be finite and >= 0");
  if (!(delta_cost >= 0.0) || !std::isfinite(delta_cost))
    throw std::invalid_argument("ambiguity: delta_cost must be finite and >= 0");
  if (!(sigma_cost > 0.0) || !std::isfinite(sigma_cost))
    throw std::invalid_argument("ambiguity: sigma_cost must be > 0");
  if (!(rho >= 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("ambiguity: rho must be finite and >= 0");
}

const char* to_string(DualBoundary b) {
  switch (b) {
    case DualBoundary::interior: return "interior";
    case DualBoundary::lower: return "lower";
    case DualBoundary::upper: return "upper";
    case DualBoundary::zero_radius: return "zero_radius";
  }
  return "?";
}

double augmented_radius(const AmbiguitySpec& spec) {
  spec.validate();
  return spec.rho * spec.eta_dyn +
         spec.delta_cost * spec.delta_cost / (2.0 * spec.sigma_cost * spec.sigma_cost);
}

DualObjective::DualObjective(Vector z, double eta, double psi)
    : z_(std::move(z)), eta_(eta), psi_(psi) {
  if (z_.size() == 0) throw std::invalid_argument("dual objective needs at least one sample");
  if (!z_.allFinite()) throw std::domain_error("dual objective: non-finite sample value");
  if (!(eta_ >= 0.0)) throw std::invalid_argument("dual objective: eta must be >= 0");
  z_max_ = z_.maxCoeff();
  z_mean_ = z_.sum() / static_cast<double>(z_.size());
}

DualObjective DualObjective::from_samples(const GaussianKernel& nominal,
                                          const GaussianKernel& generative, const CostToGo& cost,
                                          double eta, const MCSettings& mc, double psi) {
  const BatchCostToGo batch = [&](const Matrix& xs) {
    Vector c(xs.cols());
    for (Eigen::Index j = 0; j < xs.cols(); ++j) c[j] = cost(xs.col(j));
    return c;
  };
  return from_samples(nominal, generative, batch, eta, mc, psi);
}

DualObjective DualObjective::from_samples(const GaussianKernel& nominal,
                                          const GaussianKernel& generative,
                                          const BatchCostToGo& cost, double eta,
                                          const MCSettings& mc, double psi) {
  if (nominal.dim() != generative.dim())
    throw DimensionError("dual: nominal and generative dimensions differ");
  if (mc.count < 1) throw std::invalid_argument("dual: mc count must be >= 1");
  Rng rng(mc.seed);
  Matrix draws(nominal.dim(), mc.count);
  sample_into(nominal, rng, draws);
  const Vector c = cost(draws);
  if (c.size() != mc.count) throw DimensionError("dual: cost-to-go returned the wrong count");
  if (!c.allFinite()) throw std::domain_error("dual: cost-to-go returned a non-finite value");
  Vector z = log_density_columns(nominal, draws) - log_density_columns(generative, draws) + c;
  return DualObjective(std::move(z), eta, psi);
}

double DualObjective::value(double alpha) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("dual: alpha must be > 0");
  const double m = static_cast<double>(z_.size());
  const double s = ((z_.array() - z_max_) / alpha).exp().sum();
  return z_max_ + alpha * (std::log(s) - std::log(m)) + alpha * eta_ + psi_ / alpha;
}

double DualObjective::standard_error(double alpha) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("dual: alpha must be > 0");
  const double m = static_cast<double>(z_.size());
  if (m < 2) return 0.0;
  const Eigen::ArrayXd w = ((z_.array() - z_max_) / alpha).exp();
  const double mean = w.mean();
  const double var = (w - mean).square().sum() / (m - 1.0);
  return alpha * std::sqrt(var) / (mean * std::sqrt(m));
}

double dual_value(double alpha, const GaussianKernel& nominal, const GaussianKernel& generative,
                  const CostToGo& cost, double eta, const MCSettings& mc) {
  if (!(alpha > 0.0)) throw std::invalid_argument("dual: alpha must be > 0");
  return DualObjective::from_samples(nominal, generative, cost, eta, mc).value(alpha);
}

AmbiguityCost minimize_dual(const DualObjective& dual, const AlphaBracket& bracket) {
  if (!(bracket.lo > 0.0) || !(bracket.lo < bracket.hi) || bracket.iterations < 1)
    throw std::invalid_argument("alpha bracket must satisfy 0 < lo < hi, iterations >= 1");
  AmbiguityCost out;
  out.eta_used = dual.eta();
  out.mc_samples = dual.samples();

  if (dual.eta() == 0.0 && dual.psi() == 0.0) {
    // Zero radius: the adversary can only pick the nominal kernel.
    out.c_tilde = dual.mean();
    out.multiplier = bracket.hi;
    out.boundary = DualBoundary::zero_radius;
    return out;
  }

  auto f = [&](double t) { return dual.value(std::exp(t)); };
  const GoldenResult g =
      golden_section_minimize(f, std::log(bracket.lo), std::log(bracket.hi), bracket.iterations);
  out.dual_evals = g.evaluations;
  out.c_tilde = g.fx;
  out.multiplier = std::exp(g.x);
  if (g.at_lower) {
    out.boundary = DualBoundary::lower;
    if (dual.psi() == 0.0 && dual.supremum() < out.c_tilde) {
      out.c_tilde = dual.supremum();
      out.multiplier = 0.0;
    }
  } else if (g.at_upper) {
    out.boundary = DualBoundary::upper;
  }
  return out;
}

AmbiguityCost cost_of_ambiguity(const GaussianKernel& nominal, const GaussianKernel& generative,
                                const CostToGo& cost, double eta, const MCSettings& mc,
                                const AlphaBracket& bracket) {
  return minimize_dual(DualObjective::from_samples(nominal, generative, cost, eta, mc), bracket);
}

AmbiguityCost cost_of_ambiguity(const GaussianKernel& nominal, const GaussianKernel& generative,
                                const CostToGo& cost, const AmbiguitySpec& spec,
                                const MCSettings& mc, const AlphaBracket& bracket) {
  const BatchCostToGo batch = [&](const Matrix& xs) {
    Vector c(xs.cols());
    for (Eigen::Index j = 0; j < xs.cols(); ++j) c[j] = cost(xs.col(j));
    return c;
  };
  return cost_of_ambiguity(nominal, generative, batch, spec, mc, bracket);
}

AmbiguityCost cost_of_ambiguity(const GaussianKernel& nominal, const GaussianKernel& generative,
                                const BatchCostToGo& cost, const AmbiguitySpec& spec,
                                const MCSettings& mc, const AlphaBracket& bracket) {
  spec.validate();
  const double eta = augmented_radius(spec);
  const double psi =
      spec.delta_cost > 0.0 ? 0.5 * spec.sigma_cost * spec.sigma_cost : 0.0;
  return minimize_dual(DualObjective::from_samples(nominal, generative, cost, eta, mc, psi),
                       bracket);
}

AugmentedCheck augmented_kl_check(const GaussianKernel& nominal_dyn,
                                  const GaussianKernel& true_dyn, double delta_c,
                                  const AmbiguitySpec& spec) {
  const double radius = augmented_radius(spec);
  const double kl_aug = kl_gaussian(true_dyn, nominal_dyn) +
                        delta_c * delta_c / (2.0 * spec.sigma_cost * spec.sigma_cost);
  return {kl_aug, kl_aug <= radius};
}

double eta_from_goal(const GaussianKernel& goal, const GaussianKernel& nominal, double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("eta_from_goal: rho must be >= 0");
  if (rho == 0.0) {
    if (goal.dim() != nominal.dim()) throw DimensionError("eta_from_goal: dimension mismatch");
    return 0.0;
  }
  return rho * kl_gaussian(goal, nominal);
}

}  // namespace drfree
