#include "drfree/control_loop.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include <omp.h>

#include "drfree/kernels.hpp"

namespace drfree {

namespace {
constexpr std::uint64_t kEvalStream = 0xE7A1;
}

void RunConfig::validate() const {
  env.validate();
  controller.validate();
  train_perturbation.validate(env);
  eval_perturbation.validate(env);
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("run: ") + what);
  };
  need(episodes >= 1, "episodes must be >= 1");
  need(!seeds.empty(), "seeds must be non-empty");
  need(buffer_capacity >= 1, "buffer_capacity must be >= 1");
  need(rbf_count >= 0, "rbf_count must be >= 0");
  need(rbf_width > 0.0, "rbf_width must be > 0");
  need(train.steps >= 0, "train_steps_per_episode must be >= 0");
  need(train.batch_size >= 1, "batch_size must be >= 1");
  need(train.lr >= 0.0, "lr must be >= 0");
  need(eval_rollouts >= 1, "eval_rollouts must be >= 1");
  need(train_perturbation.friction == 1.0 && train_perturbation.drift.size() == 0,
       "training never perturbs the dynamics");
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec m;
  m.state_lo = env.state_lo;
  m.state_hi = env.state_hi;
  m.action_lo = env.action_lo;
  m.action_hi = env.action_hi;
  m.cost_dims = env.position_dims;
  m.rbf_count = rbf_count;
  m.rbf_width = rbf_width;
  m.initial_log_var = initial_log_var;
  return m;
}

bool EpisodeRecord::safe_success(const EnvSpec& env) const {
  return success && min_obstacle_distance >= env.collision_clearance;
}

EpisodeRecord run_episode(const RunConfig& config, const ControllerConfig& controller,
                          const LearnedModels& models, const EpisodeOptions& options,
                          std::uint64_t episode_seed, int episode_index, ReplayBuffer* buffer,
                          std::vector<TrajectoryRow>* trajectory) {
  const EnvSpec& env = config.env;
  EpisodeRecord rec;
  rec.episode = episode_index;
  rec.min_obstacle_distance = std::numeric_limits<double>::infinity();

  Vector x = reset(env, derive_seed(episode_seed, {stream::env_reset}));
  rec.min_distance = distance_to_goal(env, x);
  rec.min_obstacle_distance = nearest_obstacle_distance(env, x);
  Rng env_rng(derive_seed(episode_seed, {stream::env_noise}));
  Rng warm_rng(derive_seed(episode_seed, {stream::warmup}));
  const DecisionContext ctx{models, env, controller};

  double sum_c = 0.0;
  double sum_eta = 0.0;
  long decisions = 0;
  try {
    for (int k = 0; k < env.max_steps; ++k) {
      Vector u;
      if (options.random_actions) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        u.resize(env.action_dim);
        for (int i = 0; i < env.action_dim; ++i)
          u[i] = env.action_lo[i] + (env.action_hi[i] - env.action_lo[i]) * unit(warm_rng);
      } else {
        const StepDecision d =
            greedy_step(ctx, x, derive_seed(episode_seed, {static_cast<std::uint64_t>(k)}));
        rec.inner_solves += d.inner_solves;
        for (const auto& e : d.evals) {
          if (!e.ok) continue;
          sum_c += e.ambiguity.c_tilde;
          sum_eta += e.eta;
          ++decisions;
        }
        u = d.action;
      }
      const StepResult r = step(env, x, u, options.perturbation, env_rng);
      if (options.mode == EpisodeMode::training && buffer != nullptr)
        buffer->push({x, clip_action(env, u), r.next_state, r.cost, Provenance::training});
      if (trajectory != nullptr) trajectory->push_back({k, x, clip_action(env, u), r.cost, r.distance});

      rec.total_cost += r.cost;
      rec.steps = k + 1;
      rec.min_distance = std::min(rec.min_distance, r.distance);
      rec.min_obstacle_distance =
          std::min(rec.min_obstacle_distance, nearest_obstacle_distance(env, r.next_state));
      x = r.next_state;
      if (r.done) break;
    }
  } catch (const std::exception& ex) {
    rec.failed = true;
    rec.error = ex.what();
  }
  rec.ret = -rec.total_cost;
  rec.success = !rec.failed && rec.min_distance < env.goal_threshold;
  if (decisions > 0) {
    rec.mean_c_tilde = sum_c / static_cast<double>(decisions);
    rec.mean_eta = sum_eta / static_cast<double>(decisions);
  }
  return rec;
}

SeedRun run_training_seed(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  SeedRun run;
  run.seed = seed;
  run.models = LearnedModels::create(config.model_spec(), seed);
  ReplayBuffer buffer(config.buffer_capacity);

  for (int e = 0; e < config.episodes; ++e) {
    const std::uint64_t ep_seed = derive_seed(seed, {static_cast<std::uint64_t>(e)});
    EpisodeOptions opts;
    opts.mode = EpisodeMode::training;
    opts.random_actions = config.warmup && e == 0;
    opts.perturbation = config.train_perturbation;
    EpisodeRecord rec =
        run_episode(config, config.controller, run.models, opts, ep_seed, e, &buffer);
    const bool failed = rec.failed;
    if (failed) {
      run.failed = true;
      run.error = rec.error;
    }
    run.records.push_back(std::move(rec));
    if (failed) break;
    try {
      run.train_stats.push_back(train_models(run.models, buffer, config.train,
                                             derive_seed(seed, {stream::training,
                                                                static_cast<std::uint64_t>(e)})));
    } catch (const std::exception& ex) {
      run.failed = true;
      run.error = std::string("model update: ") + ex.what();
      break;
    }
  }
  run.buffer_size = buffer.size();
  return run;
}

std::vector<SeedRun> run_training(const RunConfig& config) {
  config.validate();
  const auto n = static_cast<long>(config.seeds.size());
  std::vector<SeedRun> runs(config.seeds.size());
  const int workers = std::min<long>(kernels::worker_count(), n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1)
  for (long i = 0; i < n; ++i) runs[i] = run_training_seed(config, config.seeds[i]);
  return runs;
}

std::uint64_t eval_rollout_seed(std::uint64_t seed, int rollout) {
  return derive_seed(seed, {kEvalStream, static_cast<std::uint64_t>(rollout)});
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

EvalSummary run_evaluation(const RunConfig& config, const LearnedModels& models, int n_rollouts,
                           std::uint64_t seed) {
  config.validate();
  if (n_rollouts < 1) throw std::invalid_argument("run_evaluation: n_rollouts must be >= 1");
  EvalSummary s;
  s.records.resize(static_cast<std::size_t>(n_rollouts));
  const int workers = std::min(kernels::worker_count(), n_rollouts);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1)
  for (int r = 0; r < n_rollouts; ++r) {
    EpisodeOptions opts;
    opts.mode = EpisodeMode::evaluation;
    opts.perturbation = config.eval_perturbation;
    s.records[r] = run_episode(config, config.controller, models, opts,
                               eval_rollout_seed(seed, r), r, nullptr);
  }
  std::vector<double> costs;
  int ok = 0;
  int safe = 0;
  for (const auto& rec : s.records) {
    costs.push_back(rec.total_cost);
    ok += rec.success ? 1 : 0;
    safe += rec.safe_success(config.env) ? 1 : 0;
  }
  s.success_rate = static_cast<double>(ok) / n_rollouts;
  s.safe_success_rate = static_cast<double>(safe) / n_rollouts;
  s.mean_cost = mean_of(costs);
  s.std_cost = stddev_of(costs);
  return s;
}

}  // namespace drfree
