#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "drfree/models.hpp"

using namespace drfree;

namespace {

FeatureMap small_map(int in_dim, int rbf, std::uint64_t seed) {
  FeatureSpec s;
  s.lo = Vector::Constant(in_dim, -1.0);
  s.hi = Vector::Constant(in_dim, 1.0);
  s.rbf_count = rbf;
  s.rbf_width = 0.5;
  s.seed = seed;
  return FeatureMap(s);
}

Matrix uniform_matrix(int rows, int cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("nll gradient matches central finite differences") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 20; ++t) {
    const int in = 1 + t % 3;
    const int out = 1 + t % 2;
    GaussianRegressor r(small_map(in, 3, t), out, -0.5);
    for (Eigen::Index i = 0; i < r.weights().size(); ++i) r.weights().data()[i] = 0.3 * n01(rng);
    for (Eigen::Index i = 0; i < r.log_var().size(); ++i) r.log_var()[i] = 0.5 * n01(rng);
    const Matrix x = uniform_matrix(in, 16, -1.0, 1.0, rng);
    const Matrix y = uniform_matrix(out, 16, -1.0, 1.0, rng);
    const auto g = r.gradient(x, y);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < r.weights().size(); ++i) {
      GaussianRegressor p = r;
      GaussianRegressor m = r;
      p.weights().data()[i] += h;
      m.weights().data()[i] -= h;
      const double fd = (p.nll(x, y) - m.nll(x, y)) / (2 * h);
      CHECK(rel_err(g.weights.data()[i], fd) < 1e-5);
    }
    for (Eigen::Index i = 0; i < r.log_var().size(); ++i) {
      GaussianRegressor p = r;
      GaussianRegressor m = r;
      p.log_var()[i] += h;
      m.log_var()[i] -= h;
      const double fd = (p.nll(x, y) - m.nll(x, y)) / (2 * h);
      CHECK(rel_err(g.log_var[i], fd) < 1e-5);
    }
  }
}

TEST_CASE("untrained model predicts zero mean") {
  GaussianRegressor r(small_map(3, 5, 1), 2, 0.0);
  CHECK(r.predict_mean(Vector::Constant(3, 0.4)).isZero(0.0));
  CHECK(r.features()(Vector::Zero(3))[0] == 1.0);
  CHECK(r.features().size() == 1 + 3 + 5);
}

TEST_CASE("lr = 0 leaves parameters unchanged and reports the loss") {
  std::mt19937_64 rng(4);
  GaussianRegressor r(small_map(2, 4, 2), 2, -1.0);
  const Matrix x = uniform_matrix(2, 10, -1.0, 1.0, rng);
  const Matrix y = uniform_matrix(2, 10, -1.0, 1.0, rng);
  const Matrix w = r.weights();
  const Vector s = r.log_var();
  const double loss = r.train_step(x, y, 0.0);
  CHECK(loss == r.nll(x, y));
  CHECK(r.weights() == w);
  CHECK(r.log_var() == s);
}

TEST_CASE("non-finite targets are rejected without touching parameters") {
  GaussianRegressor r(small_map(1, 2, 3), 1, 0.0);
  Matrix x = Matrix::Zero(1, 2);
  Matrix y = Matrix::Zero(1, 2);
  y(0, 1) = std::numeric_limits<double>::quiet_NaN();
  const Matrix w = r.weights();
  CHECK_THROWS(r.train_step(x, y, 0.1));
  CHECK(r.weights() == w);
}

TEST_CASE("identical transitions converge to the target") {
  GaussianRegressor r(small_map(2, 4, 5), 2, 0.0);
  Matrix x(2, 8);
  Matrix y(2, 8);
  for (int j = 0; j < 8; ++j) {
    x.col(j) << 0.2, -0.4;
    y.col(j) << 0.7, -0.1;
  }
  for (int k = 0; k < 200; ++k) r.train_step(x, y, 0.5);
  CHECK((r.predict_mean(x.col(0)) - y.col(0)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(r.variances().maxCoeff() < 1e-4);
}

TEST_CASE("linear system is recovered") {
  std::mt19937_64 rng(8);
  const Matrix a = (Matrix(2, 2) << 0.9, 0.1, -0.2, 0.8).finished();
  const Matrix b = (Matrix(2, 1) << 0.0, 0.5).finished();
  ModelSpec spec;
  spec.state_lo = Vector::Constant(2, -1.0);
  spec.state_hi = Vector::Constant(2, 1.0);
  spec.action_lo = Vector::Constant(1, -1.0);
  spec.action_hi = Vector::Constant(1, 1.0);
  spec.cost_dims = {0, 1};
  auto models = LearnedModels::create(spec, 1);
  ReplayBuffer buf(20000);
  const Matrix xs = uniform_matrix(2, 10000, -1.0, 1.0, rng);
  const Matrix us = uniform_matrix(1, 10000, -1.0, 1.0, rng);
  for (int j = 0; j < 10000; ++j) {
    const Vector xn = a * xs.col(j) + b * us.col(j);
    buf.push({xs.col(j), us.col(j), xn, xn.squaredNorm(), Provenance::training});
  }
  train_models(models, buf, {.steps = 200, .batch_size = 256, .lr = 0.5}, 3);
  double worst = 0.0;
  for (auto i : buf.holdout_indices()) {
    const auto& t = buf.at(i);
    worst = std::max(worst, (models.predict(t.x, t.u).mean() - t.x_next).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-2);
}

TEST_CASE("cost model fits constant and quadratic goal-distance costs") {
  ModelSpec spec;
  spec.state_lo = Vector::Constant(2, -1.0);
  spec.state_hi = Vector::Constant(2, 1.0);
  spec.action_lo = Vector::Constant(1, -1.0);
  spec.action_hi = Vector::Constant(1, 1.0);
  spec.cost_dims = {0, 1};
  const Vector goal = (Vector(2) << 0.3, -0.2).finished();

  for (bool quadratic : {false, true}) {
    auto models = LearnedModels::create(spec, 2);
    ReplayBuffer buf(10000);
    std::vector<Vector> grid;
    for (int i = 0; i < 40; ++i)
      for (int k = 0; k < 40; ++k) grid.push_back((Vector(2) << -1.0 + i / 19.5, -1.0 + k / 19.5).finished());
    auto truth = [&](const Vector& x) { return quadratic ? (x - goal).squaredNorm() : 2.5; };
    for (const auto& x : grid) buf.push({x, Vector::Zero(1), x, truth(x), Provenance::training});
    train_models(models, buf, {.steps = 300, .batch_size = 256, .lr = 0.5}, 9);

    double ss_res = 0.0;
    double ss_tot = 0.0;
    double mean = 0.0;
    for (const auto& x : grid) mean += truth(x);
    mean /= static_cast<double>(grid.size());
    for (const auto& x : grid) {
      ss_res += std::pow(models.predict_cost(x) - truth(x), 2);
      ss_tot += std::pow(truth(x) - mean, 2);
    }
    if (quadratic)
      CHECK(1.0 - ss_res / ss_tot >= 0.95);
    else
      CHECK(std::sqrt(ss_res / grid.size()) < 1e-3);
  }
}

TEST_CASE("replay buffer is FIFO and rejects evaluation data") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i)
    buf.push({Vector::Constant(1, i), Vector::Zero(1), Vector::Zero(1), 0.0, Provenance::training});
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).x[0] == 2.0);
  CHECK(buf.at(2).x[0] == 4.0);
  CHECK(buf.total_inserted() == 5);
  CHECK_THROWS(buf.push({Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 0.0, Provenance::evaluation}));
  CHECK(buf.size() == 3);
}

TEST_CASE("holdout split is every tenth insertion and disjoint from training") {
  ReplayBuffer buf(100);
  for (int i = 0; i < 50; ++i)
    buf.push({Vector::Constant(1, i), Vector::Zero(1), Vector::Zero(1), 0.0, Provenance::training});
  const auto hold = buf.holdout_indices();
  const auto train = buf.training_indices();
  CHECK(hold.size() == 5);
  CHECK(train.size() + hold.size() == 50);
  for (auto i : hold) CHECK(buf.at(i).x[0] == doctest::Approx(9 + 10 * (i / 10)));
  Rng rng(1);
  const auto s = ReplayBuffer::sample_without_replacement(train, 20, rng);
  std::set<std::size_t> seen(s.begin(), s.end());
  CHECK(seen.size() == 20);
  for (auto i : s) CHECK_FALSE(buf.is_holdout(i));
}

TEST_CASE("checkpoint round trip is exact") {
  ModelSpec spec;
  spec.state_lo = Vector::Constant(4, -1.0);
  spec.state_hi = Vector::Constant(4, 1.0);
  spec.action_lo = Vector::Constant(2, -1.0);
  spec.action_hi = Vector::Constant(2, 1.0);
  spec.cost_dims = {0, 1};
  spec.rbf_count = 8;
  auto models = LearnedModels::create(spec, 5);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < models.dynamics.weights().size(); ++i) models.dynamics.weights().data()[i] = n01(rng);
  models.cost.log_var()[0] = -3.21;
  const auto text = save_models(models);
  const auto back = load_models(text);
  CHECK(back.dynamics.weights() == models.dynamics.weights());
  CHECK(back.cost.log_var() == models.cost.log_var());
  CHECK(back.dynamics.features().centers() == models.dynamics.features().centers());
  CHECK(save_models(back) == text);
  const Vector x = Vector::Constant(4, 0.1);
  const Vector u = Vector::Constant(2, -0.3);
  CHECK(back.predict(x, u).mean() == models.predict(x, u).mean());
  CHECK_THROWS(load_models("{\"format\": \"nope\"}"));
}
