#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drfree/ambiguity.hpp"
#include "drfree/envs.hpp"
#include "drfree/gaussian.hpp"
#include "drfree/models.hpp"

namespace drfree {

/// Exponent pieces of one candidate action.
struct CandidateComponents {
  double eta = 0.0;
  double c_tilde = 0.0;
  double action_cost = 0.0;
};

/// A normalized Gibbs distribution over a finite candidate set.
struct ActionCandidateSet {
  std::vector<Vector> actions;
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Stable softmax (log-sum-exp shifted).
std::vector<double> softmax(std::span<const double> logits);

/// logits[i] = prior[i] - action_cost[i] - eta[i] - c_tilde[i].
ActionCandidateSet gibbs_policy(std::vector<Vector> candidates,
                                std::span<const CandidateComponents> components,
                                std::span<const double> prior_logweights);

/// Uniform prior: every prior log-weight is zero.
ActionCandidateSet gibbs_policy(std::vector<Vector> candidates,
                                std::span<const CandidateComponents> components);

std::size_t sample_index(std::span<const double> probs, Rng& rng);

/// First index of the largest logit.
std::size_t argmax_index(std::span<const double> logits);

enum class SelectMode { sample, argmax };

SelectMode parse_select_mode(const std::string& text);
const char* to_string(SelectMode mode);

struct ControllerConfig {
  int n_candidates = 64;
  double pmax_epsilon = 0.5;
  double rho = 1.0;
  double sigma_cost = 1.0;
  double delta_cost = 0.0;
  int mc_samples = 256;
  AlphaBracket bracket;
  SelectMode select_mode = SelectMode::sample;
  int horizon = 1;
  int scenario_branching = 4;  // candidates and samples per node below the root
  double goal_sigma = 0.1;     // goal covariance is goal_sigma * I
  double shaping_weight = 0.0;
  bool parallel = true;

  void validate() const;
};

/// Everything a decision needs besides the current state.
struct DecisionContext {
  const LearnedModels& models;
  const EnvSpec& env;
  ControllerConfig config;

  GaussianKernel goal_kernel() const;
};

/// Result of evaluating one candidate action.
struct CandidateEval {
  Vector action;
  bool ok = false;
  double eta = 0.0;       // radius used, ambiguity included
  double eta_goal = 0.0;  // unscaled KL(goal || nominal)
  double lambda = 1.0;
  AmbiguityCost ambiguity;
  std::string error;
};

struct StepDecision {
  Vector action;
  std::size_t index = 0;  // into `set`
  ActionCandidateSet set;
  std::vector<CandidateEval> evals;  // all candidates, including failures
  int inner_solves = 0;
};

/// Cost-to-go on an arrival state for a given remaining horizon.
double cost_to_go(const DecisionContext& ctx, const Vector& x_next, int remaining,
                  std::uint64_t seed);

/// cost_to_go of every column of a state matrix.
Vector cost_to_go_columns(const DecisionContext& ctx, const Matrix& x_next, int remaining,
                          std::uint64_t seed);

/// Uniform draws from the action box.
std::vector<Vector> draw_candidates(const EnvSpec& env, int count, std::uint64_t seed);

/**
 * One decision of the robust controller at state x: draw candidates,
 * build p_max and the ambiguity cost for each, form the Gibbs policy and
 * select an action. Deterministic in `seed`.
 */
StepDecision greedy_step(const DecisionContext& ctx, const Vector& x, std::uint64_t seed);

/// Reference logits of the ambiguity-free free-energy controller:
/// -(KL estimate + expected cost) on the same candidates and samples.
std::vector<double> free_energy_logits(const DecisionContext& ctx, const Vector& x,
                                       std::uint64_t seed);

}  // namespace drfree
