#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drfree/envs.hpp"
#include "drfree/models.hpp"
#include "drfree/policy.hpp"

namespace drfree {

struct RunConfig {
  EnvSpec env = point_mass_spec();
  ControllerConfig controller;
  int episodes = 50;
  std::vector<std::uint64_t> seeds{0};
  std::size_t buffer_capacity = 100000;
  int rbf_count = 64;
  double rbf_width = 0.35;
  double initial_log_var = -4.0;
  TrainSettings train;
  bool warmup = true;  // first episode uses uniform random actions
  PerturbationSpec train_perturbation;  // reward noise during training
  PerturbationSpec eval_perturbation;
  int eval_rollouts = 20;

  void validate() const;
  ModelSpec model_spec() const;
};

struct EpisodeRecord {
  int episode = 0;
  double ret = 0.0;         // -(sum of stage costs)
  double total_cost = 0.0;
  double min_distance = 0.0;
  bool success = false;     // min distance below the goal threshold
  int steps = 0;
  double mean_c_tilde = 0.0;
  double mean_eta = 0.0;
  long inner_solves = 0;
  double min_obstacle_distance = 0.0;
  bool failed = false;
  std::string error;

  /// Reached the goal while keeping the collision clearance throughout.
  bool safe_success(const EnvSpec& env) const;
};

struct TrajectoryRow {
  int step = 0;
  Vector state;
  Vector action;
  double cost = 0.0;
  double distance = 0.0;
};

enum class EpisodeMode { training, evaluation };

struct EpisodeOptions {
  EpisodeMode mode = EpisodeMode::training;
  bool random_actions = false;
  PerturbationSpec perturbation;
};

/// Runs one episode. In training mode transitions are appended to `buffer`.
EpisodeRecord run_episode(const RunConfig& config, const ControllerConfig& controller,
                          const LearnedModels& models, const EpisodeOptions& options,
                          std::uint64_t episode_seed, int episode_index, ReplayBuffer* buffer,
                          std::vector<TrajectoryRow>* trajectory = nullptr);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> records;
  std::vector<TrainStats> train_stats;
  LearnedModels models;
  std::size_t buffer_size = 0;
  bool failed = false;
  std::string error;
};

/// Learning loop for one seed: episodes of robust greedy control, buffer
/// collection, model updates between episodes.
SeedRun run_training_seed(const RunConfig& config, std::uint64_t seed);

/// All seeds, in order; seeds may execute concurrently.
std::vector<SeedRun> run_training(const RunConfig& config);

struct EvalSummary {
  std::vector<EpisodeRecord> records;
  double success_rate = 0.0;
  double safe_success_rate = 0.0;
  double mean_cost = 0.0;
  double std_cost = 0.0;
};

/// Frozen-model rollouts under config.eval_perturbation.
EvalSummary run_evaluation(const RunConfig& config, const LearnedModels& models, int n_rollouts,
                           std::uint64_t seed);

/// Seed of the r-th evaluation rollout.
std::uint64_t eval_rollout_seed(std::uint64_t seed, int rollout);

double mean_of(const std::vector<double>& v);
/// Sample standard deviation (0 for fewer than two values).
double stddev_of(const std::vector<double>& v);

}  // namespace drfree
