#include "drfree/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace drfree {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr int kCheckpointVersion = 1;

}  // namespace

// ---------------------------------------------------------------- buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (t.source != Provenance::training)
    throw std::logic_error("replay buffer only accepts training transitions");
  if (!std::isfinite(t.cost)) throw std::domain_error("transition cost is not finite");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back({std::move(t), inserted_++});
}

std::vector<std::size_t> ReplayBuffer::training_indices() const {
  std::vector<std::size_t> out;
  out.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (!is_holdout(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> ReplayBuffer::holdout_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (is_holdout(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> ReplayBuffer::sample_without_replacement(std::vector<std::size_t> pool,
                                                                  std::size_t count, Rng& rng) {
  count = std::min(count, pool.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

// ---------------------------------------------------------------- features

FeatureMap::FeatureMap(FeatureSpec spec) : spec_(std::move(spec)) {
  const int d = static_cast<int>(spec_.lo.size());
  if (d == 0 || spec_.hi.size() != d) throw DimensionError("feature box has inconsistent bounds");
  if (((spec_.hi - spec_.lo).array() <= 0.0).any())
    throw std::invalid_argument("feature box must have hi > lo in every dimension");
  if (spec_.rbf_count < 0) throw std::invalid_argument("rbf_count must be >= 0");
  if (!(spec_.rbf_width > 0.0)) throw std::invalid_argument("rbf_width must be > 0");

  dims_ = spec_.rbf_dims;
  if (dims_.empty()) {
    dims_.resize(d);
    std::iota(dims_.begin(), dims_.end(), 0);
  }
  for (int k : dims_)
    if (k < 0 || k >= d) throw DimensionError("rbf dimension index out of range");

  Rng rng(spec_.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  centers_.resize(static_cast<Eigen::Index>(dims_.size()), spec_.rbf_count);
  for (int k = 0; k < spec_.rbf_count; ++k)
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) centers_(i, k) = unit(rng);
  scale_ = 2.0 / (spec_.hi - spec_.lo).array();
}

FeatureMap::FeatureMap(FeatureSpec spec, Matrix centers) : FeatureMap(std::move(spec)) {
  if (centers.rows() != centers_.rows() || centers.cols() != spec_.rbf_count)
    throw DimensionError("stored rbf centers do not match the feature spec");
  centers_ = std::move(centers);
}

Vector FeatureMap::normalize(const Vector& input) const {
  if (input.size() != input_dim()) throw DimensionError("feature input has the wrong length");
  return (input - spec_.lo).array() * scale_.array() - 1.0;
}

Vector FeatureMap::operator()(const Vector& input) const {
  if (input.size() != input_dim()) throw DimensionError("feature input has the wrong length");
  return batch(input).col(0);
}

Matrix FeatureMap::batch(const Matrix& inputs) const {
  if (inputs.rows() != input_dim()) throw DimensionError("feature input has the wrong length");
  const int d = input_dim();
  const Eigen::Index m = inputs.cols();
  const Eigen::Index k = centers_.cols();
  Matrix phi(size(), m);
  phi.row(0).setOnes();
  phi.middleRows(1, d) =
      ((inputs.colwise() - spec_.lo).array().colwise() * scale_.array() - 1.0).matrix();
  if (k == 0) return phi;
  const double inv2w2 = 1.0 / (2.0 * spec_.rbf_width * spec_.rbf_width);
  Eigen::ArrayXXd r2 = Eigen::ArrayXXd::Zero(k, m);
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto z = phi.row(1 + dims_[i]).array();
    r2 += (z.replicate(k, 1).colwise() - centers_.row(static_cast<Eigen::Index>(i)).transpose().array())
              .square();
  }
  phi.bottomRows(k) = (-r2 * inv2w2).exp().matrix();
  return phi;
}

// ---------------------------------------------------------------- regressor

GaussianRegressor::GaussianRegressor(FeatureMap features, int output_dim, double initial_log_var)
    : features_(std::move(features)) {
  if (output_dim < 1) throw DimensionError("regressor output dimension must be >= 1");
  weights_ = Matrix::Zero(output_dim, features_.size());
  log_var_ = Vector::Constant(output_dim, initial_log_var);
}

Vector GaussianRegressor::variances() const {
  return log_var_.array().exp() + kCovFloor;
}

Vector GaussianRegressor::predict_mean(const Vector& input) const {
  return weights_ * features_(input);
}

GaussianKernel GaussianRegressor::predict(const Vector& input) const {
  return GaussianKernel::diagonal(predict_mean(input), variances());
}

namespace {

Matrix feature_matrix(const FeatureMap& fm, const Matrix& inputs) { return fm.batch(inputs); }

void check_batch(const GaussianRegressor& r, const Matrix& inputs, const Matrix& targets) {
  if (inputs.cols() == 0) throw std::invalid_argument("training batch is empty");
  if (inputs.cols() != targets.cols()) throw DimensionError("batch inputs/targets count differ");
  if (inputs.rows() != r.input_dim() || targets.rows() != r.output_dim())
    throw DimensionError("batch shape does not match regressor");
}

}  // namespace

double GaussianRegressor::nll(const Matrix& inputs, const Matrix& targets) const {
  check_batch(*this, inputs, targets);
  const Matrix residual = targets - weights_ * feature_matrix(features_, inputs);
  const Vector var = variances();
  const double b = static_cast<double>(inputs.cols());
  const double quad = (residual.array().square().colwise() / var.array()).sum() / b;
  return 0.5 * (output_dim() * kLog2Pi + var.array().log().sum() + quad);
}

RegressorGradient GaussianRegressor::gradient(const Matrix& inputs, const Matrix& targets) const {
  check_batch(*this, inputs, targets);
  const Matrix phi = feature_matrix(features_, inputs);
  const Matrix residual = targets - weights_ * phi;
  const Vector var = variances();
  const double b = static_cast<double>(inputs.cols());

  RegressorGradient g;
  const Matrix scaled = residual.array().colwise() / var.array();
  g.weights = -(scaled * phi.transpose()) / b;
  const Vector mean_sq = residual.array().square().rowwise().sum() / b;
  g.log_var = 0.5 * log_var_.array().exp() / var.array() *
              (1.0 - mean_sq.array() / var.array());
  return g;
}

namespace {
constexpr double kMaxLogVarStep = 1.0;
constexpr double kFisherDamping = 1e-4;
}

double GaussianRegressor::train_step(const Matrix& inputs, const Matrix& targets, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  const double loss = nll(inputs, targets);
  const RegressorGradient g = gradient(inputs, targets);
  if (!g.weights.allFinite() || !g.log_var.allFinite())
    throw std::domain_error("non-finite gradient; step aborted");
  const Vector var = variances();

  // Fisher block of the mean weights: var^{-1} (x) E[phi phi^T], damped so
  // feature directions the batch never excites stay well posed.
  const Matrix phi = feature_matrix(features_, inputs);
  Matrix fisher = phi * phi.transpose() / static_cast<double>(inputs.cols());
  fisher.diagonal().array() += kFisherDamping;
  const Matrix dir = fisher.llt().solve(g.weights.transpose()).transpose();
  weights_ -= lr * (dir.array().colwise() * var.array()).matrix();
  // Natural-gradient step on log_var, capped so one badly scaled batch
  // cannot overflow the variance.
  log_var_ -= (2.0 * lr * g.log_var).cwiseMax(-kMaxLogVarStep).cwiseMin(kMaxLogVarStep);
  return loss;
}

// ---------------------------------------------------------------- models

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

LearnedModels LearnedModels::create(const ModelSpec& spec, std::uint64_t seed) {
  FeatureSpec dyn;
  dyn.lo = concat(spec.state_lo, spec.action_lo);
  dyn.hi = concat(spec.state_hi, spec.action_hi);
  dyn.rbf_count = spec.rbf_count;
  dyn.rbf_width = spec.rbf_width;
  dyn.seed = derive_seed(seed, {stream::model_init, 0});

  FeatureSpec cost;
  cost.lo = spec.state_lo;
  cost.hi = spec.state_hi;
  cost.rbf_dims = spec.cost_dims;
  cost.rbf_count = spec.rbf_count;
  cost.rbf_width = spec.rbf_width;
  cost.seed = derive_seed(seed, {stream::model_init, 1});

  const int n = static_cast<int>(spec.state_lo.size());
  return {GaussianRegressor(FeatureMap(dyn), n, spec.initial_log_var),
          GaussianRegressor(FeatureMap(cost), 1, spec.initial_log_var)};
}

GaussianKernel LearnedModels::predict(const Vector& x, const Vector& u) const {
  if (x.size() != state_dim() || u.size() != action_dim())
    throw DimensionError("predict: state/action length does not match the model");
  return dynamics.predict(concat(x, u));
}

double LearnedModels::predict_cost(const Vector& x_next) const {
  return cost.predict_mean(x_next)[0];
}

Vector LearnedModels::predict_cost_columns(const Matrix& x_next) const {
  return (cost.weights() * cost.features().batch(x_next)).row(0).transpose();
}

BatchData make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: no indices");
  const Transition& first = buffer.at(indices.front());
  const auto n = first.x.size();
  const auto m = first.u.size();
  const auto b = static_cast<Eigen::Index>(indices.size());
  BatchData out{Matrix(n + m, b), Matrix(n, b), Matrix(n, b), Matrix(1, b)};
  for (Eigen::Index j = 0; j < b; ++j) {
    const Transition& t = buffer.at(indices[j]);
    out.dyn_inputs.col(j) << t.x, t.u;
    out.dyn_targets.col(j) = t.x_next;
    out.cost_inputs.col(j) = t.x_next;
    out.cost_targets(0, j) = t.cost;
  }
  return out;
}

TrainStats train_models(LearnedModels& models, const ReplayBuffer& buffer,
                        const TrainSettings& settings, std::uint64_t seed) {
  if (settings.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  TrainStats stats;
  const auto train_idx = buffer.training_indices();
  if (train_idx.empty()) return stats;
  const auto hold_idx = buffer.holdout_indices();

  if (!hold_idx.empty()) {
    const BatchData h = make_batch(buffer, hold_idx);
    stats.holdout_before = models.dynamics.nll(h.dyn_inputs, h.dyn_targets);
  }
  Rng rng(seed);
  for (int s = 0; s < settings.steps; ++s) {
    const auto idx = ReplayBuffer::sample_without_replacement(
        train_idx, static_cast<std::size_t>(settings.batch_size), rng);
    const BatchData b = make_batch(buffer, idx);
    const double dl = models.dynamics.train_step(b.dyn_inputs, b.dyn_targets, settings.lr);
    const double cl = models.cost.train_step(b.cost_inputs, b.cost_targets, settings.lr);
    if (s == 0) {
      stats.dynamics_loss_first = dl;
      stats.cost_loss_first = cl;
    }
    stats.dynamics_loss_last = dl;
    stats.cost_loss_last = cl;
    ++stats.steps;
  }
  if (!hold_idx.empty()) {
    const BatchData h = make_batch(buffer, hold_idx);
    stats.holdout_after = models.dynamics.nll(h.dyn_inputs, h.dyn_targets);
  }
  return stats;
}

// ---------------------------------------------------------------- checkpoint

namespace {

using nlohmann::json;

json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

Matrix json_to_mat(const json& j, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw std::runtime_error("checkpoint: matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector r = json_to_vec(j.at(i));
    if (r.size() != cols) throw std::runtime_error("checkpoint: matrix column count mismatch");
    m.row(i) = r.transpose();
  }
  return m;
}

json regressor_to_json(const GaussianRegressor& r) {
  const FeatureSpec& fs = r.features().spec();
  return {
      {"input_dim", r.input_dim()},
      {"output_dim", r.output_dim()},
      {"features",
       {{"lo", vec_to_json(fs.lo)},
        {"hi", vec_to_json(fs.hi)},
        {"rbf_dims", fs.rbf_dims},
        {"rbf_count", fs.rbf_count},
        {"rbf_width", fs.rbf_width},
        {"seed", fs.seed},
        {"centers", mat_to_json(r.features().centers())}}},
      {"weights", mat_to_json(r.weights())},
      {"log_var", vec_to_json(r.log_var())},
  };
}

GaussianRegressor regressor_from_json(const json& j) {
  const json& f = j.at("features");
  FeatureSpec fs;
  fs.lo = json_to_vec(f.at("lo"));
  fs.hi = json_to_vec(f.at("hi"));
  fs.rbf_dims = f.at("rbf_dims").get<std::vector<int>>();
  fs.rbf_count = f.at("rbf_count").get<int>();
  fs.rbf_width = f.at("rbf_width").get<double>();
  fs.seed = f.at("seed").get<std::uint64_t>();
  const auto rbf_rows = static_cast<Eigen::Index>(fs.rbf_dims.empty() ? fs.lo.size()
                                                                      : fs.rbf_dims.size());
  FeatureMap fm(fs, json_to_mat(f.at("centers"), rbf_rows, fs.rbf_count));
  const int out = j.at("output_dim").get<int>();
  GaussianRegressor r(std::move(fm), out);
  r.weights() = json_to_mat(j.at("weights"), out, r.features().size());
  r.log_var() = json_to_vec(j.at("log_var"));
  if (r.log_var().size() != out) throw std::runtime_error("checkpoint: log_var length mismatch");
  return r;
}

}  // namespace

std::string save_models(const LearnedModels& models) {
  json j = {
      {"format", "drfree-models"},
      {"version", kCheckpointVersion},
      {"state_dim", models.state_dim()},
      {"action_dim", models.action_dim()},
      {"dynamics", regressor_to_json(models.dynamics)},
      {"cost", regressor_to_json(models.cost)},
  };
  return j.dump(1);
}

LearnedModels load_models(const std::string& json_text) {
  const json j = json::parse(json_text);
  if (j.value("format", "") != "drfree-models")
    throw std::runtime_error("checkpoint: unrecognized format tag");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  return {regressor_from_json(j.at("dynamics")), regressor_from_json(j.at("cost"))};
}

}  // namespace drfree
