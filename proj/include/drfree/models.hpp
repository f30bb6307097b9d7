#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "drfree/gaussian.hpp"
#include "drfree/rng.hpp"

namespace drfree {

enum class Provenance { training, evaluation };

/// One environment interaction (x, u) -> (x_next, cost).
struct Transition {
  Vector x;
  Vector u;
  Vector x_next;
  double cost = 0.0;
  Provenance source = Provenance::training;
};

/// Fixed-capacity FIFO store of training transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Appends, evicting the oldest item when full. Evaluation-tagged
  /// transitions are rejected so that models never see evaluation data.
  void push(Transition t);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t total_inserted() const noexcept { return inserted_; }

  /// i-th stored item, oldest first.
  const Transition& at(std::size_t i) const { return items_.at(i).t; }
  /// Insertion sequence number of the i-th stored item.
  std::uint64_t sequence(std::size_t i) const { return items_.at(i).seq; }

  /// Every tenth insertion is held out from training batches.
  bool is_holdout(std::size_t i) const { return sequence(i) % 10 == 9; }

  /// Indices of training (non-holdout) items.
  std::vector<std::size_t> training_indices() const;
  std::vector<std::size_t> holdout_indices() const;

  /// Up to `count` distinct indices drawn without replacement from `pool`.
  static std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                             std::size_t count, Rng& rng);

 private:
  struct Entry {
    Transition t;
    std::uint64_t seq;
  };
  std::size_t capacity_;
  std::uint64_t inserted_ = 0;
  std::deque<Entry> items_;
};

/// Affine features of the box-normalized input plus Gaussian radial
/// features with fixed centers drawn once inside the normalized box.
struct FeatureSpec {
  Vector lo;                  // input box, used for normalization
  Vector hi;
  std::vector<int> rbf_dims;  // inputs the radial features see; empty means all
  int rbf_count = 64;
  double rbf_width = 0.35;    // in normalized units
  std::uint64_t seed = 0;
};

class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(FeatureSpec spec);
  /// Restores a map with explicit centers (checkpoint loading).
  FeatureMap(FeatureSpec spec, Matrix centers);

  int input_dim() const noexcept { return static_cast<int>(spec_.lo.size()); }
  int size() const noexcept { return 1 + input_dim() + static_cast<int>(centers_.cols()); }
  const FeatureSpec& spec() const noexcept { return spec_; }
  const Matrix& centers() const noexcept { return centers_; }

  Vector normalize(const Vector& input) const;
  Vector operator()(const Vector& input) const;
  /// Features of every column of `inputs`.
  Matrix batch(const Matrix& inputs) const;

 private:
  FeatureSpec spec_;
  std::vector<int> dims_;
  Matrix centers_;  // |dims| x K
  Vector scale_;
};

/// Batch NLL gradient with respect to the weights and log-variances.
struct RegressorGradient {
  Matrix weights;
  Vector log_var;
};

/**
 * Linear-in-features Gaussian regressor y ~ N(W phi(x), diag(floor + exp(s))).
 *
 * Both learned models are instances: the dynamics model maps (x, u) to the
 * next state and the cost model maps the arrival state to the stage cost.
 */
class GaussianRegressor {
 public:
  GaussianRegressor() = default;
  GaussianRegressor(FeatureMap features, int output_dim, double initial_log_var = 0.0);

  int input_dim() const noexcept { return features_.input_dim(); }
  int output_dim() const noexcept { return static_cast<int>(weights_.rows()); }
  const FeatureMap& features() const noexcept { return features_; }

  const Matrix& weights() const noexcept { return weights_; }
  const Vector& log_var() const noexcept { return log_var_; }
  Matrix& weights() noexcept { return weights_; }
  Vector& log_var() noexcept { return log_var_; }

  Vector variances() const;
  Vector predict_mean(const Vector& input) const;
  GaussianKernel predict(const Vector& input) const;

  /// Mean negative log-likelihood per batch row.
  double nll(const Matrix& inputs, const Matrix& targets) const;
  RegressorGradient gradient(const Matrix& inputs, const Matrix& targets) const;

  /**
   * One natural-gradient step on the batch NLL; returns the pre-step NLL.
   * The mean block is preconditioned by the inverse Fisher block
   * var (x) E[phi phi^T]^{-1} (damped), the log-variance block by its
   * Fisher scale 2. lr = 1 jumps to the batch least-squares mean.
   * Throws std::domain_error and leaves parameters untouched on a
   * non-finite gradient.
   */
  double train_step(const Matrix& inputs, const Matrix& targets, double lr);

 private:
  FeatureMap features_;
  Matrix weights_;
  Vector log_var_;
};

/// Box bounds used to build the model feature maps.
struct ModelSpec {
  Vector state_lo, state_hi;
  Vector action_lo, action_hi;
  std::vector<int> cost_dims;  // state dims the cost features see
  int rbf_count = 64;
  double rbf_width = 0.35;
  double initial_log_var = -4.0;
};

/// Nominal dynamics p(x' | x, u) and stage cost model c(x').
struct LearnedModels {
  GaussianRegressor dynamics;
  GaussianRegressor cost;

  static LearnedModels create(const ModelSpec& spec, std::uint64_t seed);

  int state_dim() const noexcept { return dynamics.output_dim(); }
  int action_dim() const noexcept { return dynamics.input_dim() - dynamics.output_dim(); }

  GaussianKernel predict(const Vector& x, const Vector& u) const;
  double predict_cost(const Vector& x_next) const;
  Vector predict_cost_columns(const Matrix& x_next) const;
};

Vector concat(const Vector& a, const Vector& b);

struct BatchData {
  Matrix dyn_inputs, dyn_targets;
  Matrix cost_inputs, cost_targets;
};

BatchData make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices);

struct TrainStats {
  double dynamics_loss_first = 0.0;
  double dynamics_loss_last = 0.0;
  double cost_loss_first = 0.0;
  double cost_loss_last = 0.0;
  double holdout_before = 0.0;  // dynamics NLL on the holdout split
  double holdout_after = 0.0;
  int steps = 0;
};

struct TrainSettings {
  int steps = 50;
  int batch_size = 128;
  double lr = 1e-2;
};

/// Runs `settings.steps` minibatch updates of both models on the training
/// split. Deterministic given (models, buffer contents, seed).
TrainStats train_models(LearnedModels& models, const ReplayBuffer& buffer,
                        const TrainSettings& settings, std::uint64_t seed);

/// Versioned JSON checkpoint.
std::string save_models(const LearnedModels& models);
LearnedModels load_models(const std::string& json_text);

}  // namespace drfree
