#include <doctest.h>

#include <cmath>
#include <random>

#include "drfree/gaussian.hpp"
#include "oracles.hpp"

using namespace drfree;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("kl of identical kernels is zero") {
  const auto p = GaussianKernel::diagonal(vec({0.3, -1.0}), vec({0.5, 2.0}));
  CHECK(kl_gaussian(p, p) == 0.0);
  const Matrix s = (Matrix(2, 2) << 1.0, 0.3, 0.3, 0.8).finished();
  const GaussianKernel d(vec({1.0, 2.0}), s);
  CHECK(std::abs(kl_gaussian(d, d)) < 1e-14);
}

TEST_CASE("kl scaled covariance closed form") {
  const auto p = GaussianKernel::isotropic(Vector::Zero(2), 1.0);
  const auto q = GaussianKernel::isotropic(Vector::Zero(2), 2.0);
  CHECK(kl_gaussian(p, q) == doctest::Approx(0.5 - 1.0 + std::log(2.0)).epsilon(1e-14));
  CHECK(kl_gaussian(p, q) == doctest::Approx(0.19315).epsilon(1e-4));
}

TEST_CASE("kl mean shift against monte carlo") {
  const auto p = GaussianKernel::isotropic(vec({1.0, 0.0}), 1.0);
  const auto q = GaussianKernel::isotropic(vec({0.0, 0.0}), 1.0);
  CHECK(kl_gaussian(p, q) == doctest::Approx(0.5).epsilon(1e-14));
  const auto est = oracle::mc_kl(vec({1.0, 0.0}), Matrix::Identity(2, 2), Vector::Zero(2),
                                 Matrix::Identity(2, 2), 1000000, 17);
  CHECK(std::abs(est.mean - 0.5) < 1e-2);
}

TEST_CASE("kl dense path matches diagonal path and is non-negative") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 4;
    Vector m1(n), m2(n), v1(n), v2(n);
    for (int i = 0; i < n; ++i) {
      m1[i] = n01(rng);
      m2[i] = n01(rng);
      v1[i] = u(rng);
      v2[i] = u(rng);
    }
    const auto a = GaussianKernel::diagonal(m1, v1);
    const auto b = GaussianKernel::diagonal(m2, v2);
    const GaussianKernel ad(m1, Matrix(v1.asDiagonal()));
    const GaussianKernel bd(m2, Matrix(v2.asDiagonal()));
    CHECK(kl_gaussian(a, b) >= 0.0);
    CHECK(kl_gaussian(a, b) == doctest::Approx(kl_gaussian(ad, bd)).epsilon(1e-10));
  }
}

TEST_CASE("entropy closed form and histogram oracle") {
  const auto p = GaussianKernel::isotropic(Vector::Zero(1), 1.0);
  CHECK(entropy(p) == doctest::Approx(0.5 * (1.0 + std::log(2.0 * oracle::kPi))).epsilon(1e-14));
  CHECK(entropy(p) == doctest::Approx(1.41894).epsilon(1e-5));

  // Histogram estimate -sum p_i ln(p_i / w) from 10^6 draws.
  const auto xs = sample(p, 23, 1000000);
  const double lo = -8.0;
  const double w = 0.02;
  std::vector<double> counts(800, 0.0);
  for (const auto& x : xs) {
    const auto b = static_cast<long>((x[0] - lo) / w);
    if (b >= 0 && b < 800) counts[static_cast<std::size_t>(b)] += 1.0;
  }
  double h = 0.0;
  for (double c : counts)
    if (c > 0) {
      const double pi = c / 1e6;
      h -= pi * std::log(pi / w);
    }
  CHECK(std::abs(h - entropy(p)) < 1e-2);
}

TEST_CASE("entropy scaling and translation invariance") {
  const Matrix s = (Matrix(3, 3) << 2.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.5).finished();
  const GaussianKernel p(Vector::Zero(3), s);
  for (double lam : {1.0, 1.5, 2.3644, 10.0})
    CHECK(entropy(p.scaled(lam)) - entropy(p) == doctest::Approx(1.5 * std::log(lam)).epsilon(1e-12));
  const GaussianKernel shifted(vec({5.0, -2.0, 1.0}), s);
  CHECK(entropy(shifted) == entropy(p));
}

TEST_CASE("log density values") {
  const auto p = GaussianKernel::isotropic(Vector::Zero(1), 1.0);
  CHECK(log_density(p, Vector::Zero(1)) == doctest::Approx(-0.5 * std::log(2.0 * oracle::kPi)).epsilon(1e-14));
  CHECK(log_density(p, Vector::Zero(1)) == doctest::Approx(-0.91894).epsilon(1e-5));

  const Matrix s = (Matrix(2, 2) << 1.0, 0.4, 0.4, 0.7).finished();
  const Vector m = vec({0.2, -0.3});
  const GaussianKernel q(m, s);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 20; ++t) {
    const Vector x = vec({n01(rng), n01(rng)});
    CHECK(log_density(q, x) == doctest::Approx(oracle::log_pdf(x, m, s)).epsilon(1e-12));
    CHECK(log_density(q, x) <= log_density(q, m));
  }
  Matrix cols(2, 20);
  for (int j = 0; j < 20; ++j) cols.col(j) = vec({n01(rng), n01(rng)});
  const Vector batch = log_density_columns(q, cols);
  for (int j = 0; j < 20; ++j)
    CHECK(batch[j] == doctest::Approx(log_density(q, cols.col(j))).epsilon(1e-12));
}

TEST_CASE("density integrates to one (midpoint quadrature)") {
  const Matrix s = (Matrix(2, 2) << 0.5, 0.2, 0.2, 0.3).finished();
  const GaussianKernel q(vec({0.1, 0.2}), s);
  const double h = 0.02;
  double total = 0.0;
  for (double x = -5.0 + h / 2; x < 5.0; x += h)
    for (double y = -5.0 + h / 2; y < 5.0; y += h) total += std::exp(log_density(q, vec({x, y}))) * h * h;
  CHECK(std::abs(total - 1.0) < 1e-2);

  const auto one = GaussianKernel::isotropic(Vector::Constant(1, 0.5), 2.0);
  double t1 = 0.0;
  for (double x = -20.0 + 0.0005; x < 20.0; x += 0.001) t1 += std::exp(log_density(one, vec({x}))) * 0.001;
  CHECK(std::abs(t1 - 1.0) < 1e-2);
}

TEST_CASE("sampling determinism, shape and moments") {
  const auto p = GaussianKernel::isotropic(Vector::Zero(2), 1.0);
  const auto a = sample(p, 42, 100000);
  const auto b = sample(p, 42, 100000);
  CHECK(a == b);
  Vector mean = Vector::Zero(2);
  for (const auto& x : a) mean += x;
  mean /= 1e5;
  CHECK(std::abs(mean[0]) < 0.02);
  CHECK(std::abs(mean[1]) < 0.02);

  const auto one = sample(p, 1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 2);
  CHECK_THROWS_AS(sample(p, 1, 0), std::invalid_argument);

  const Matrix s = (Matrix(2, 2) << 2.0, 0.6, 0.6, 0.5).finished();
  const GaussianKernel q(vec({1.0, -1.0}), s);
  const auto xs = sample(q, 3, 200000);
  Vector m = Vector::Zero(2);
  for (const auto& x : xs) m += x;
  m /= static_cast<double>(xs.size());
  Matrix c = Matrix::Zero(2, 2);
  for (const auto& x : xs) c += (x - m) * (x - m).transpose();
  c /= static_cast<double>(xs.size() - 1);
  CHECK((m - q.mean()).cwiseAbs().maxCoeff() < 0.02);
  CHECK((c - s).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(GaussianKernel(Vector::Zero(2), Matrix::Identity(3, 3)), DimensionError);
  const Matrix asym = (Matrix(2, 2) << 1.0, 0.5, 0.4, 1.0).finished();
  CHECK_THROWS_AS(GaussianKernel(Vector::Zero(2), asym), NotPositiveDefinite);
  const Matrix indefinite = (Matrix(2, 2) << 1.0, 2.0, 2.0, 1.0).finished();
  CHECK_THROWS_AS(GaussianKernel(Vector::Zero(2), indefinite), NotPositiveDefinite);
  CHECK_THROWS_AS(GaussianKernel::diagonal(Vector::Zero(2), vec({1.0, 1e-12})), NotPositiveDefinite);
  const auto a = GaussianKernel::isotropic(Vector::Zero(2), 1.0);
  const auto b = GaussianKernel::isotropic(Vector::Zero(3), 1.0);
  CHECK_THROWS_AS(kl_gaussian(a, b), DimensionError);
  CHECK_THROWS_AS(log_density(a, Vector::Zero(3)), DimensionError);
}
