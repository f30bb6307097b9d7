#include "drfree/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "drfree/kernels.hpp"
#include "drfree/pmax.hpp"

namespace drfree {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of an empty set");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

ActionCandidateSet gibbs_policy(std::vector<Vector> candidates,
                                std::span<const CandidateComponents> components,
                                std::span<const double> prior_logweights) {
  if (candidates.empty()) throw std::invalid_argument("gibbs_policy: empty candidate set");
  if (components.size() != candidates.size() || prior_logweights.size() != candidates.size())
    throw std::invalid_argument("gibbs_policy: list lengths differ");
  ActionCandidateSet set;
  set.logits.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = components[i];
    const double logit = prior_logweights[i] - c.action_cost - c.eta - c.c_tilde;
    if (!std::isfinite(logit)) throw std::domain_error("gibbs_policy: non-finite component");
    set.logits[i] = logit;
  }
  set.probs = softmax(set.logits);
  set.actions = std::move(candidates);
  return set;
}

ActionCandidateSet gibbs_policy(std::vector<Vector> candidates,
                                std::span<const CandidateComponents> components) {
  const std::vector<double> prior(candidates.size(), 0.0);
  return gibbs_policy(std::move(candidates), components, prior);
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("sample_index: empty distribution");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = unit(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (r < acc) return i;
  }
  // Rounding left r above the final partial sum; take the last non-zero entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

std::size_t argmax_index(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax_index: empty set");
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

SelectMode parse_select_mode(const std::string& text) {
  if (text == "sample") return SelectMode::sample;
  if (text == "argmax") return SelectMode::argmax;
  throw std::invalid_argument("select_mode must be 'sample' or 'argmax', got '" + text + "'");
}

const char* to_string(SelectMode mode) {
  return mode == SelectMode::sample ? "sample" : "argmax";
}

void ControllerConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("controller: ") + what);
  };
  need(n_candidates >= 1, "n_candidates must be >= 1");
  need(pmax_epsilon >= 0.0, "pmax_epsilon must be >= 0");
  need(rho >= 0.0, "rho must be >= 0");
  need(sigma_cost > 0.0, "sigma_cost must be > 0");
  need(delta_cost >= 0.0, "delta_cost must be >= 0");
  need(mc_samples >= 1, "mc_samples must be >= 1");
  need(bracket.lo > 0.0 && bracket.lo < bracket.hi, "alpha_bracket must satisfy 0 < lo < hi");
  need(bracket.iterations >= 1, "alpha iterations must be >= 1");
  need(horizon >= 1, "horizon must be >= 1");
  need(scenario_branching >= 1, "scenario_branching must be >= 1");
  need(goal_sigma > 0.0, "goal_sigma must be > 0");
  need(shaping_weight >= 0.0, "shaping_weight must be >= 0");
}

GaussianKernel DecisionContext::goal_kernel() const {
  return GaussianKernel::isotropic(env.goal, config.goal_sigma);
}

std::vector<Vector> draw_candidates(const EnvSpec& env, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    Vector u(env.action_dim);
    for (int i = 0; i < env.action_dim; ++i)
      u[i] = env.action_lo[i] + (env.action_hi[i] - env.action_lo[i]) * unit(rng);
    out.push_back(std::move(u));
  }
  return out;
}

double cost_to_go(const DecisionContext& ctx, const Vector& x_next, int remaining,
                  std::uint64_t seed) {
  double c = ctx.models.predict_cost(x_next);
  if (ctx.config.shaping_weight > 0.0) {
    const double d = distance_to_goal(ctx.env, x_next);
    c += ctx.config.shaping_weight * d * d;
  }
  if (remaining <= 1) return c;

  // Value of the next stage: -ln E_q[exp(-(eta + c_tilde))] over a small
  // sampled scenario fan-out, evaluated by backward induction.
  const int b = ctx.config.scenario_branching;
  const auto actions = draw_candidates(ctx.env, b, derive_seed(seed, {stream::candidates}));
  std::vector<double> exponents;
  exponents.reserve(b);
  for (const auto& u : actions) {
    const CandidateEval e = kernels::evaluate_candidate(
        ctx, x_next, u, remaining - 1, derive_seed(seed, {stream::monte_carlo}));
    if (e.ok) exponents.push_back(-(e.eta + e.ambiguity.c_tilde));
  }
  if (exponents.empty()) throw std::runtime_error("cost_to_go: every scenario branch failed");
  const double top = *std::max_element(exponents.begin(), exponents.end());
  double s = 0.0;
  for (double v : exponents) s += std::exp(v - top);
  const double value = -(top + std::log(s / static_cast<double>(exponents.size())));
  return c + value;
}

Vector cost_to_go_columns(const DecisionContext& ctx, const Matrix& x_next, int remaining,
                          std::uint64_t seed) {
  if (remaining > 1) {
    Vector c(x_next.cols());
    for (Eigen::Index j = 0; j < x_next.cols(); ++j)
      c[j] = cost_to_go(ctx, x_next.col(j), remaining, seed);
    return c;
  }
  Vector c = ctx.models.predict_cost_columns(x_next);
  if (ctx.config.shaping_weight > 0.0)
    for (Eigen::Index j = 0; j < x_next.cols(); ++j) {
      const double d = distance_to_goal(ctx.env, x_next.col(j));
      c[j] += ctx.config.shaping_weight * d * d;
    }
  return c;
}

StepDecision greedy_step(const DecisionContext& ctx, const Vector& x, std::uint64_t seed) {
  ctx.config.validate();
  StepDecision d;
  const auto actions =
      draw_candidates(ctx.env, ctx.config.n_candidates, derive_seed(seed, {stream::candidates}));
  d.evals.resize(actions.size());
  const std::uint64_t mc_seed = derive_seed(seed, {stream::monte_carlo});
  if (ctx.config.parallel)
    kernels::evaluate_candidates_omp(ctx, x, actions, ctx.config.horizon, mc_seed, d.evals);
  else
    kernels::evaluate_candidates_serial(ctx, x, actions, ctx.config.horizon, mc_seed, d.evals);
  d.inner_solves = static_cast<int>(d.evals.size());

  std::vector<Vector> kept;
  std::vector<CandidateComponents> comps;
  for (const auto& e : d.evals) {
    if (!e.ok) continue;
    kept.push_back(e.action);
    comps.push_back({e.eta, e.ambiguity.c_tilde, 0.0});
  }
  if (kept.empty())
    throw std::runtime_error("greedy_step: every candidate failed: " + d.evals.front().error);

  d.set = gibbs_policy(std::move(kept), comps);
  if (ctx.config.select_mode == SelectMode::argmax) {
    d.index = argmax_index(d.set.logits);
  } else {
    Rng rng(derive_seed(seed, {stream::selection}));
    d.index = sample_index(d.set.probs, rng);
  }
  d.action = d.set.actions[d.index];
  return d;
}

std::vector<double> free_energy_logits(const DecisionContext& ctx, const Vector& x,
                                       std::uint64_t seed) {
  const auto actions =
      draw_candidates(ctx.env, ctx.config.n_candidates, derive_seed(seed, {stream::candidates}));
  const std::uint64_t mc_seed = derive_seed(seed, {stream::monte_carlo});
  const int m = ctx.config.mc_samples;
  std::vector<CandidateComponents> comps;
  comps.reserve(actions.size());
  for (const auto& u : actions) {
    const GaussianKernel nominal = ctx.models.predict(x, u);
    const GaussianKernel q = build_pmax(nominal, ctx.config.pmax_epsilon).kernel;
    Rng rng(mc_seed);
    Matrix draws(nominal.dim(), m);
    sample_into(nominal, rng, draws);
    const Vector z = log_density_columns(nominal, draws) - log_density_columns(q, draws) +
                     cost_to_go_columns(ctx, draws, 1, derive_seed(mc_seed, {1}));
    comps.push_back({0.0, z.sum() / static_cast<double>(m), 0.0});
  }
  return gibbs_policy(actions, comps).logits;
}

}  // namespace drfree
