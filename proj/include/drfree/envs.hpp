#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drfree/gaussian.hpp"
#include "drfree/rng.hpp"

namespace drfree {

enum class EnvKind { point_mass, pendulum };

EnvKind parse_env_kind(const std::string& name);
const char* to_string(EnvKind kind);

struct Obstacle {
  Vector center;  // position coordinates
  double radius = 0.05;
};

/**
 * Static description of a desk-scale task.
 *
 * Point mass: state (px, py, vx, vy), action = acceleration command.
 * Pendulum: state (theta, omega), action = torque; theta = 0 hangs down.
 */
struct EnvSpec {
  EnvKind kind = EnvKind::point_mass;
  int state_dim = 4;
  int action_dim = 2;
  Vector state_lo, state_hi;
  Vector action_lo, action_hi;
  std::vector<int> position_dims{0, 1};

  Vector goal;   // full goal state x*
  Vector start;  // nominal initial state
  double start_jitter = 0.0;  // uniform jitter on the initial position

  std::vector<Obstacle> obstacles;
  double obstacle_margin = 0.1;  // penalty acts inside radius + margin
  double collision_clearance = 0.07;

  double dt = 0.1;
  int max_steps = 1000;
  double goal_threshold = 0.05;

  Vector process_noise;  // per state coordinate std
  double goal_weight = 1.0;
  double obstacle_weight = 100.0;

  // pendulum parameters
  double gravity = 9.81;
  double length = 1.0;
  double mass = 1.0;

  void validate() const;
};

EnvSpec point_mass_spec();
EnvSpec pendulum_spec();

/// Evaluation-time changes to the true simulator. The learned model never
/// sees them.
struct PerturbationSpec {
  double friction = 1.0;  // multiplies the velocity every step
  Vector drift;           // added to the velocity every step; empty means zero
  double reward_noise_sigma = 0.0;

  bool is_identity() const;
  void validate(const EnvSpec& env) const;
};

/// Parses "friction=0.8,drift=0.05,reward_noise=0.1" (any subset).
PerturbationSpec parse_perturbation(const std::string& text, const EnvSpec& env);

struct StepResult {
  Vector next_state;
  double cost = 0.0;
  bool done = false;
  double distance = 0.0;  // to goal, after the step
};

Vector reset(const EnvSpec& env, std::uint64_t seed);

Vector clip_action(const EnvSpec& env, const Vector& action);

/// One environment transition; `rng` drives process and reward noise.
StepResult step(const EnvSpec& env, const Vector& state, const Vector& action,
                const PerturbationSpec& perturbation, Rng& rng);

StepResult step(const EnvSpec& env, const Vector& state, const Vector& action,
                const PerturbationSpec& perturbation, std::uint64_t seed);

/// Noise-free stage cost of arriving at `state`.
double stage_cost(const EnvSpec& env, const Vector& state);

double distance_to_goal(const EnvSpec& env, const Vector& state);

/// Quadratic hinge, zero outside radius + margin.
double obstacle_penalty(const EnvSpec& env, const Vector& state);

/// Distance from the position to the nearest obstacle center (inf if none).
double nearest_obstacle_distance(const EnvSpec& env, const Vector& state);

/// Total mechanical energy of the unforced pendulum per unit m l^2.
double pendulum_energy(const EnvSpec& env, const Vector& state);

}  // namespace drfree
