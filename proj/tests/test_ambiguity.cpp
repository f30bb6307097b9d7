#include <doctest.h>

#include <cmath>
#include <random>

#include "drfree/ambiguity.hpp"
#include "drfree/line_search.hpp"
#include "drfree/pmax.hpp"
#include "oracles.hpp"

using namespace drfree;

namespace {

const CostToGo zero_cost = [](const Vector&) { return 0.0; };

}  // namespace

TEST_CASE("augmented radius examples") {
  CHECK(augmented_radius({.eta_dyn = 0.3, .delta_cost = 0.0, .sigma_cost = 1.0, .rho = 1.0}) ==
        doctest::Approx(0.3).epsilon(1e-15));
  CHECK(augmented_radius({.eta_dyn = 0.0, .delta_cost = 0.5, .sigma_cost = 1.0, .rho = 1.0}) ==
        doctest::Approx(0.125).epsilon(1e-15));
  CHECK(augmented_radius({.eta_dyn = 0.3, .delta_cost = 0.5, .sigma_cost = 1.0, .rho = 2.0}) ==
        doctest::Approx(0.725).epsilon(1e-15));
  CHECK_THROWS_AS(augmented_radius({.eta_dyn = -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(augmented_radius({.sigma_cost = 0.0}), std::invalid_argument);
}

TEST_CASE("constant cost with generative equal to nominal") {
  const auto p = GaussianKernel::isotropic(Vector::Zero(2), 0.5);
  const CostToGo c0 = [](const Vector&) { return 1.75; };
  for (double alpha : {1e-3, 0.1, 1.0, 50.0, 1e3})
    CHECK(dual_value(alpha, p, p, c0, 0.2, {128, 4}) == doctest::Approx(1.75 + alpha * 0.2).epsilon(1e-12));

  const auto r = cost_of_ambiguity(p, p, c0, 0.0, {128, 4});
  CHECK(r.c_tilde == doctest::Approx(1.75).epsilon(1e-14));
  CHECK(r.multiplier == AlphaBracket{}.hi);
  CHECK(r.boundary == DualBoundary::zero_radius);
}

TEST_CASE("large-alpha limit and zero-radius value equal the kl") {
  const auto nominal = GaussianKernel::isotropic(Vector::Zero(2), 1.0);
  const auto gen = nominal.scaled(2.0);
  const double closed = nominal_to_pmax_kl(2.0, 2);
  CHECK(closed == doctest::Approx(0.19315).epsilon(1e-4));
  const auto dual = DualObjective::from_samples(nominal, gen, zero_cost, 0.0, {100000, 8});
  CHECK(std::abs(dual.value(1e3) - closed) < 1e-2);
  const auto r = minimize_dual(dual);
  CHECK(std::abs(r.c_tilde - closed) < 1e-2);
  CHECK(r.c_tilde == doctest::Approx(dual.mean()).epsilon(1e-15));
}

TEST_CASE("zero radius with p_max generative and a quadratic cost") {
  const auto nominal = GaussianKernel::diagonal(Vector::Constant(3, 0.2), Vector::Constant(3, 0.3));
  const auto pm = build_pmax(nominal, 0.5);
  const CostToGo cost = [](const Vector& x) { return x.squaredNorm(); };
  const double expected_cost = 3 * (0.2 * 0.2 + 0.3);
  const double closed = nominal_to_pmax_kl(pm.lambda, 3) + expected_cost;
  const auto r = cost_of_ambiguity(nominal, pm.kernel, cost, 0.0, {100000, 21});
  CHECK(std::abs(r.c_tilde - closed) < 2e-2);
}

TEST_CASE("determinism and common random numbers") {
  const auto nominal = GaussianKernel::isotropic(Vector::Zero(2), 1.0);
  const auto gen = nominal.scaled(1.7);
  const CostToGo cost = [](const Vector& x) { return std::sin(x[0]) + x[1] * x[1]; };
  CHECK(dual_value(0.7, nominal, gen, cost, 0.1, {256, 3}) ==
        dual_value(0.7, nominal, gen, cost, 0.1, {256, 3}));
  const auto d = DualObjective::from_samples(nominal, gen, cost, 0.1, {256, 3});
  CHECK(d.value(0.7) == dual_value(0.7, nominal, gen, cost, 0.1, {256, 3}));
}

TEST_CASE("c_tilde is non-decreasing in eta and midpoint convex in alpha") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const int n = 1 + t % 4;
    const auto nominal = GaussianKernel::diagonal(Vector::Constant(n, u(rng)), Vector::Constant(n, 0.1 + u(rng)));
    const auto gen = build_pmax(nominal, 0.5 * u(rng)).kernel;
    const double a = 3.0 * u(rng);
    const CostToGo cost = [a](const Vector& x) { return a * x.squaredNorm() + std::cos(x[0]); };
    double prev = -1e300;
    for (double eta : {0.0, 0.01, 0.1, 0.5, 1.0, 3.0}) {
      const auto r = cost_of_ambiguity(nominal, gen, cost, eta, {256, 100 + static_cast<std::uint64_t>(t)});
      CHECK(r.c_tilde >= prev - 1e-12);
      prev = r.c_tilde;
    }
    const auto d = DualObjective::from_samples(nominal, gen, cost, 0.3, {256, 5});
    const double a1 = 0.05 + u(rng);
    const double a2 = a1 + 5.0 * u(rng);
    const double mid = d.value(0.5 * (a1 + a2));
    CHECK(mid <= 0.5 * (d.value(a1) + d.value(a2)) + 1e-12);
  }
}

TEST_CASE("lower boundary uses the sample supremum") {
  // Huge radius: the minimum sits at alpha -> 0.
  const auto nominal = GaussianKernel::isotropic(Vector::Zero(1), 1.0);
  const CostToGo cost = [](const Vector& x) { return x[0]; };
  const auto d = DualObjective::from_samples(nominal, nominal, cost, 1e6, {64, 2});
  const auto r = minimize_dual(d);
  CHECK(r.boundary == DualBoundary::lower);
  CHECK(r.c_tilde == d.supremum());
  CHECK(r.multiplier == 0.0);
}

TEST_CASE("cost channel adds psi and the augmented radius") {
  const auto nominal = GaussianKernel::isotropic(Vector::Zero(2), 0.2);
  const auto gen = build_pmax(nominal, 0.3).kernel;
  const CostToGo cost = [](const Vector& x) { return x[0]; };
  const AmbiguitySpec spec{.eta_dyn = 0.2, .delta_cost = 0.5, .sigma_cost = 1.0, .rho = 1.0};
  const auto r = cost_of_ambiguity(nominal, gen, cost, spec, {256, 9});
  const auto d = DualObjective::from_samples(nominal, gen, cost, 0.325, {256, 9}, 0.5);
  CHECK(r.eta_used == doctest::Approx(0.325).epsilon(1e-15));
  CHECK(r.c_tilde == doctest::Approx(minimize_dual(d).c_tilde).epsilon(1e-15));
  const AmbiguitySpec plain{.eta_dyn = 0.2, .delta_cost = 0.0, .sigma_cost = 1.0, .rho = 1.0};
  CHECK(cost_of_ambiguity(nominal, gen, cost, plain, {256, 9}).c_tilde < r.c_tilde);
}

TEST_CASE("augmented kl check examples") {
  const auto nominal = GaussianKernel::isotropic(Vector::Zero(2), 1.0);
  const AmbiguitySpec spec{.eta_dyn = 0.3, .delta_cost = 0.5, .sigma_cost = 1.0, .rho = 1.0};
  const auto same = augmented_kl_check(nominal, nominal, 0.0, spec);
  CHECK(same.kl_aug == 0.0);
  CHECK(same.feasible);

  // Mean shift with KL(true || nominal) = 0.5 d^2 = 0.2.
  Vector shift = Vector::Zero(2);
  shift[0] = std::sqrt(0.4);
  const auto truth = GaussianKernel::isotropic(shift, 1.0);
  const auto r = augmented_kl_check(nominal, truth, 0.5, spec);
  CHECK(r.kl_aug == doctest::Approx(0.325).epsilon(1e-12));
  CHECK(r.feasible);
  CHECK(augmented_radius(spec) == doctest::Approx(0.425).epsilon(1e-15));
}

TEST_CASE("eta_from_goal") {
  const auto nominal = GaussianKernel::isotropic(Vector::Constant(2, 0.3), 0.05);
  const auto goal = GaussianKernel::isotropic(Vector::Zero(2), 0.1);
  CHECK(eta_from_goal(goal, nominal, 0.0) == 0.0);
  CHECK(eta_from_goal(nominal, nominal, 3.0) == 0.0);
  CHECK(eta_from_goal(goal, nominal, 2.0) == 2.0 * eta_from_goal(goal, nominal, 1.0));
}

TEST_CASE("golden section on a parabola") {
  const auto g = golden_section_minimize([](double x) { return (x - 0.3) * (x - 0.3); }, -2.0, 2.0, 60);
  CHECK(std::abs(g.x - 0.3) < 1e-8);
  CHECK_FALSE(g.at_lower);
  CHECK_FALSE(g.at_upper);
  CHECK(golden_section_minimize([](double x) { return x; }, 0.0, 1.0, 60).at_lower);
}
