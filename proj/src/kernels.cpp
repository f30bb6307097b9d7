#include "drfree/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>

#include <omp.h>

#include "drfree/pmax.hpp"

namespace drfree::kernels {

CandidateEval evaluate_candidate(const DecisionContext& ctx, const Vector& x, const Vector& u,
                                 int remaining, std::uint64_t mc_seed) {
  CandidateEval e;
  e.action = u;
  try {
    const ControllerConfig& cfg = ctx.config;
    const GaussianKernel nominal = ctx.models.predict(x, u);
    const PmaxResult pmax = build_pmax(nominal, cfg.pmax_epsilon);
    e.lambda = pmax.lambda;
    e.eta_goal = kl_gaussian(ctx.goal_kernel(), nominal);

    AmbiguitySpec spec;
    spec.eta_dyn = e.eta_goal;
    spec.rho = cfg.rho;
    spec.delta_cost = cfg.delta_cost;
    spec.sigma_cost = cfg.sigma_cost;

    const MCSettings mc{remaining == cfg.horizon ? cfg.mc_samples : cfg.scenario_branching,
                        mc_seed};
    const std::uint64_t inner_seed = derive_seed(mc_seed, {static_cast<std::uint64_t>(remaining)});
    const BatchCostToGo cost = [&](const Matrix& xn) {
      return cost_to_go_columns(ctx, xn, remaining, inner_seed);
    };
    e.ambiguity = cost_of_ambiguity(nominal, pmax.kernel, cost, spec, mc, cfg.bracket);
    e.eta = e.ambiguity.eta_used;
    e.ok = std::isfinite(e.ambiguity.c_tilde) && std::isfinite(e.eta);
    if (!e.ok) e.error = "non-finite ambiguity cost";
  } catch (const std::exception& ex) {
    e.ok = false;
    e.error = ex.what();
  }
  return e;
}

void evaluate_candidates_serial(const DecisionContext& ctx, const Vector& x,
                                std::span<const Vector> actions, int remaining,
                                std::uint64_t mc_seed, std::span<CandidateEval> out) {
  for (std::size_t i = 0; i < actions.size(); ++i)
    out[i] = evaluate_candidate(ctx, x, actions[i], remaining, mc_seed);
}

void evaluate_candidates_omp(const DecisionContext& ctx, const Vector& x,
                             std::span<const Vector> actions, int remaining,
                             std::uint64_t mc_seed, std::span<CandidateEval> out) {
  const auto n = static_cast<long>(actions.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (long i = 0; i < n; ++i) out[i] = evaluate_candidate(ctx, x, actions[i], remaining, mc_seed);
}

int worker_count() {
  if (const char* env = std::getenv("DRFREE_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

}  // namespace drfree::kernels
