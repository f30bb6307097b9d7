#include <benchmark/benchmark.h>

#include <vector>

#include "drfree/ambiguity.hpp"
#include "drfree/kernels.hpp"
#include "drfree/pmax.hpp"

namespace {

using namespace drfree;

struct Fixture {
  EnvSpec env = point_mass_spec();
  LearnedModels models;
  ControllerConfig config;
  Vector x;
  std::vector<Vector> actions;

  explicit Fixture(int candidates) {
    ModelSpec spec;
    spec.state_lo = env.state_lo;
    spec.state_hi = env.state_hi;
    spec.action_lo = env.action_lo;
    spec.action_hi = env.action_hi;
    spec.cost_dims = env.position_dims;
    models = LearnedModels::create(spec, 3);
    config.n_candidates = candidates;
    x = env.start;
    actions = draw_candidates(env, candidates, 11);
  }
};

void BM_CandidatesSerial(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const DecisionContext ctx{f.models, f.env, f.config};
  std::vector<CandidateEval> out(f.actions.size());
  for (auto _ : state) {
    kernels::evaluate_candidates_serial(ctx, f.x, f.actions, 1, 5, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CandidatesSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CandidatesOmp(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const DecisionContext ctx{f.models, f.env, f.config};
  std::vector<CandidateEval> out(f.actions.size());
  for (auto _ : state) {
    kernels::evaluate_candidates_omp(ctx, f.x, f.actions, 1, 5, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CandidatesOmp)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DualSamples(benchmark::State& state) {
  const auto nominal = GaussianKernel::diagonal(Vector::Zero(4), Vector::Constant(4, 0.02));
  const auto q = build_pmax(nominal, 0.5).kernel;
  const CostToGo cost = [](const Vector& v) { return v.squaredNorm(); };
  for (auto _ : state) {
    auto d = DualObjective::from_samples(nominal, q, cost, 0.3,
                                         {static_cast<int>(state.range(0)), 9});
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_DualSamples)->Arg(256);

void BM_DualMinimize(benchmark::State& state) {
  const auto nominal = GaussianKernel::diagonal(Vector::Zero(4), Vector::Constant(4, 0.02));
  const auto q = build_pmax(nominal, 0.5).kernel;
  const CostToGo cost = [](const Vector& v) { return v.squaredNorm(); };
  const auto dual =
      DualObjective::from_samples(nominal, q, cost, 0.3, {static_cast<int>(state.range(0)), 9});
  for (auto _ : state) benchmark::DoNotOptimize(minimize_dual(dual, AlphaBracket{}));
}
BENCHMARK(BM_DualMinimize)->Arg(256);

void BM_GreedyStep(benchmark::State& state) {
  Fixture f(64);
  const DecisionContext ctx{f.models, f.env, f.config};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(greedy_step(ctx, f.x, ++seed));
}
BENCHMARK(BM_GreedyStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
