#include "drfree/envs.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace drfree {

EnvKind parse_env_kind(const std::string& name) {
  if (name == "point_mass") return EnvKind::point_mass;
  if (name == "pendulum") return EnvKind::pendulum;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

const char* to_string(EnvKind kind) {
  return kind == EnvKind::point_mass ? "point_mass" : "pendulum";
}

void EnvSpec::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("env: ") + what);
  };
  need(state_dim > 0 && action_dim > 0, "dimensions must be positive");
  need(state_lo.size() == state_dim && state_hi.size() == state_dim, "state box size");
  need(action_lo.size() == action_dim && action_hi.size() == action_dim, "action box size");
  need(((state_hi - state_lo).array() > 0).all(), "state box must have hi > lo");
  need(((action_hi - action_lo).array() >= 0).all(), "action box must have hi >= lo");
  need(goal.size() == state_dim && start.size() == state_dim, "goal/start length");
  need(((goal.array() >= state_lo.array()) && (goal.array() <= state_hi.array())).all(),
       "goal must lie inside the state box");
  need(process_noise.size() == state_dim && (process_noise.array() >= 0).all(),
       "process_noise must be non-negative, one per state coordinate");
  need(dt > 0, "dt must be > 0");
  need(max_steps >= 1, "max_steps must be >= 1");
  need(goal_threshold > 0, "goal_threshold must be > 0");
  need(start_jitter >= 0, "start_jitter must be >= 0");
  need(obstacle_margin >= 0 && obstacle_weight >= 0 && goal_weight >= 0, "cost weights");
  for (const auto& o : obstacles) {
    need(o.radius > 0, "obstacle radius must be > 0");
    need(o.center.size() == static_cast<Eigen::Index>(position_dims.size()),
         "obstacle center must have one entry per position dim");
  }
  for (int d : position_dims) need(d >= 0 && d < state_dim, "position dim out of range");
  if (kind == EnvKind::pendulum) need(gravity > 0 && length > 0 && mass > 0, "pendulum params");
}

EnvSpec point_mass_spec() {
  EnvSpec e;
  e.kind = EnvKind::point_mass;
  e.state_dim = 4;
  e.action_dim = 2;
  e.state_lo = Vector::Constant(4, -1.0);
  e.state_hi = Vector::Constant(4, 1.0);
  e.action_lo = Vector::Constant(2, -1.0);
  e.action_hi = Vector::Constant(2, 1.0);
  e.position_dims = {0, 1};
  e.goal = (Vector(4) << 0.6, 0.6, 0.0, 0.0).finished();
  e.start = (Vector(4) << -0.6, -0.6, 0.0, 0.0).finished();
  e.start_jitter = 0.05;
  e.obstacles = {Obstacle{Vector::Zero(2), 0.05}};
  e.obstacle_margin = 0.15;
  e.collision_clearance = 0.07;
  e.dt = 0.1;
  e.max_steps = 1000;
  e.goal_threshold = 0.05;
  e.process_noise = Vector::Constant(4, 0.01);
  e.goal_weight = 1.0;
  e.obstacle_weight = 100.0;
  return e;
}

EnvSpec pendulum_spec() {
  EnvSpec e;
  e.kind = EnvKind::pendulum;
  e.state_dim = 2;
  e.action_dim = 1;
  e.state_lo = (Vector(2) << -M_PI, -8.0).finished();
  e.state_hi = (Vector(2) << M_PI, 8.0).finished();
  e.action_lo = Vector::Constant(1, -4.0);
  e.action_hi = Vector::Constant(1, 4.0);
  e.position_dims = {0};
  e.goal = (Vector(2) << 0.3, 0.0).finished();
  e.start = Vector::Zero(2);
  e.start_jitter = 0.0;
  e.dt = 0.01;
  e.max_steps = 1000;
  e.goal_threshold = 0.05;
  e.process_noise = Vector::Constant(2, 0.01);
  e.goal_weight = 1.0;
  e.obstacle_weight = 0.0;
  return e;
}

bool PerturbationSpec::is_identity() const {
  return friction == 1.0 && (drift.size() == 0 || drift.isZero(0.0)) && reward_noise_sigma == 0.0;
}

void PerturbationSpec::validate(const EnvSpec& env) const {
  if (!(friction > 0.0) || !std::isfinite(friction))
    throw std::invalid_argument("perturbation: friction must be > 0");
  if (!(reward_noise_sigma >= 0.0))
    throw std::invalid_argument("perturbation: reward_noise_sigma must be >= 0");
  const auto nvel = env.state_dim - static_cast<int>(env.position_dims.size());
  if (drift.size() != 0 && drift.size() != nvel)
    throw std::invalid_argument("perturbation: drift must have one entry per velocity coordinate");
}

PerturbationSpec parse_perturbation(const std::string& text, const EnvSpec& env) {
  PerturbationSpec p;
  const auto nvel = env.state_dim - static_cast<int>(env.position_dims.size());
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("perturbation: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("perturbation: bad number for '" + key + "'");
    }
    if (key == "friction")
      p.friction = value;
    else if (key == "drift")
      p.drift = Vector::Constant(nvel, value);
    else if (key == "reward_noise")
      p.reward_noise_sigma = value;
    else
      throw std::invalid_argument("perturbation: unknown key '" + key + "'");
  }
  p.validate(env);
  return p;
}

namespace {

Vector position_of(const EnvSpec& env, const Vector& state) {
  Vector p(static_cast<Eigen::Index>(env.position_dims.size()));
  for (std::size_t i = 0; i < env.position_dims.size(); ++i) p[i] = state[env.position_dims[i]];
  return p;
}

Vector clamp_state(const EnvSpec& env, const Vector& x) {
  return x.cwiseMax(env.state_lo).cwiseMin(env.state_hi);
}

double pendulum_accel(const EnvSpec& env, double theta, double torque) {
  return -(env.gravity / env.length) * std::sin(theta) +
         torque / (env.mass * env.length * env.length);
}

}  // namespace

Vector reset(const EnvSpec& env, std::uint64_t seed) {
  Vector x = env.start;
  if (env.start_jitter > 0.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> jitter(-env.start_jitter, env.start_jitter);
    for (int d : env.position_dims) x[d] += jitter(rng);
  }
  return clamp_state(env, x);
}

Vector clip_action(const EnvSpec& env, const Vector& action) {
  if (action.size() != env.action_dim) throw DimensionError("action has the wrong length");
  return action.cwiseMax(env.action_lo).cwiseMin(env.action_hi);
}

double distance_to_goal(const EnvSpec& env, const Vector& state) {
  return (position_of(env, state) - position_of(env, env.goal)).norm();
}

double obstacle_penalty(const EnvSpec& env, const Vector& state) {
  const Vector p = position_of(env, state);
  double total = 0.0;
  for (const auto& o : env.obstacles) {
    const double reach = o.radius + env.obstacle_margin;
    const double gap = reach - (p - o.center).norm();
    if (gap > 0.0) total += gap * gap;
  }
  return env.obstacle_weight * total;
}

double nearest_obstacle_distance(const EnvSpec& env, const Vector& state) {
  const Vector p = position_of(env, state);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : env.obstacles) best = std::min(best, (p - o.center).norm());
  return best;
}

double stage_cost(const EnvSpec& env, const Vector& state) {
  const double d = distance_to_goal(env, state);
  return env.goal_weight * d * d + obstacle_penalty(env, state);
}

double pendulum_energy(const EnvSpec& env, const Vector& state) {
  return 0.5 * state[1] * state[1] + (env.gravity / env.length) * (1.0 - std::cos(state[0]));
}

StepResult step(const EnvSpec& env, const Vector& state, const Vector& action,
                const PerturbationSpec& perturbation, Rng& rng) {
  if (state.size() != env.state_dim) throw DimensionError("state has the wrong length");
  const Vector u = clip_action(env, action);
  const double f = perturbation.friction;
  Vector x(env.state_dim);

  switch (env.kind) {
    case EnvKind::point_mass: {
      const int np = static_cast<int>(env.position_dims.size());
      for (int i = 0; i < np; ++i) {
        // Semi-implicit Euler: the new velocity moves the position.
        double v = f * state[np + i] + env.dt * u[i];
        if (perturbation.drift.size() != 0) v += perturbation.drift[i];
        x[np + i] = v;
        x[i] = state[i] + env.dt * v;
      }
      break;
    }
    case EnvKind::pendulum: {
      const double tq = u[0];
      const double half = state[1] + 0.5 * env.dt * pendulum_accel(env, state[0], tq);
      const double theta = state[0] + env.dt * half;
      double omega = half + 0.5 * env.dt * pendulum_accel(env, theta, tq);
      omega *= f;
      if (perturbation.drift.size() != 0) omega += perturbation.drift[0];
      x << theta, omega;
      break;
    }
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < env.state_dim; ++i)
    if (env.process_noise[i] > 0.0) x[i] += env.process_noise[i] * normal(rng);
  x = clamp_state(env, x);

  StepResult r;
  r.cost = stage_cost(env, x);
  if (perturbation.reward_noise_sigma > 0.0) r.cost += perturbation.reward_noise_sigma * normal(rng);
  r.distance = distance_to_goal(env, x);
  r.done = r.distance < env.goal_threshold;
  r.next_state = std::move(x);
  return r;
}

StepResult step(const EnvSpec& env, const Vector& state, const Vector& action,
                const PerturbationSpec& perturbation, std::uint64_t seed) {
  Rng rng(seed);
  return step(env, state, action, perturbation, rng);
}

}  // namespace drfree
