#pragma once

#include <cstdint>
#include <span>

#include "drfree/policy.hpp"

namespace drfree::kernels {

/// Evaluates a single candidate: nominal prediction, p_max, goal radius and
/// the ambiguity cost. Never throws; failures are reported in the result.
CandidateEval evaluate_candidate(const DecisionContext& ctx, const Vector& x, const Vector& u,
                                 int remaining, std::uint64_t mc_seed);

/// Reference implementation, one candidate after another.
void evaluate_candidates_serial(const DecisionContext& ctx, const Vector& x,
                                std::span<const Vector> actions, int remaining,
                                std::uint64_t mc_seed, std::span<CandidateEval> out);

/// OpenMP version. Each candidate owns its inputs and output slot, so the
/// result is identical to the serial one regardless of thread count.
void evaluate_candidates_omp(const DecisionContext& ctx, const Vector& x,
                             std::span<const Vector> actions, int remaining,
                             std::uint64_t mc_seed, std::span<CandidateEval> out);

/// Worker count used by the OpenMP kernels (DRFREE_WORKERS, else OpenMP default).
int worker_count();

}  // namespace drfree::kernels
