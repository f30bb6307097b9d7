#include "drfree/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "drfree/kernels.hpp"

namespace drfree {

namespace {

using nlohmann::json;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string seed_list(const std::vector<std::uint64_t>& seeds, char sep = ';') {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(seeds[i]);
  }
  return s;
}

std::string provenance_header(const std::string& hash, const std::vector<std::uint64_t>& seeds) {
  return "# config_hash=" + hash + " seeds=" + seed_list(seeds) + "\n" +
         "# return = -(sum of stage costs)\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string episode_csv_header() {
  return "seed,episode,return,total_cost,min_distance,success,safe_success,steps,mean_c_tilde,"
         "mean_eta,inner_solves,min_obstacle_distance,failed,error\n";
}

std::string episode_csv_row(std::uint64_t seed, const EpisodeRecord& r, const EnvSpec& env) {
  std::string err = r.error;
  std::replace(err.begin(), err.end(), ',', ';');
  std::replace(err.begin(), err.end(), '\n', ' ');
  return std::to_string(seed) + "," + std::to_string(r.episode) + "," + num(r.ret) + "," +
         num(r.total_cost) + "," + num(r.min_distance) + "," + (r.success ? "1" : "0") + "," +
         (r.safe_success(env) ? "1" : "0") + "," + std::to_string(r.steps) + "," +
         num(r.mean_c_tilde) + "," + num(r.mean_eta) + "," + std::to_string(r.inner_solves) + "," +
         num(r.min_obstacle_distance) + "," + (r.failed ? "1" : "0") + "," + err + "\n";
}

fs::path default_dir(const std::string& prefix, const fs::path& source, const std::string& hash) {
  return fs::path("runs") / (prefix + source.stem().string() + "-" + hash.substr(0, 8));
}

double rate(const std::vector<EpisodeRecord>& recs, bool safe, const EnvSpec& env) {
  if (recs.empty()) return 0.0;
  int n = 0;
  for (const auto& r : recs) n += (safe ? r.safe_success(env) : r.success) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(recs.size());
}

EpisodeRecord eval_episode(const RunConfig& config, const LearnedModels& models,
                           std::uint64_t seed, int rollout,
                           std::vector<TrajectoryRow>* trajectory = nullptr) {
  EpisodeOptions opts;
  opts.mode = EpisodeMode::evaluation;
  opts.perturbation = config.eval_perturbation;
  return run_episode(config, config.controller, models, opts, eval_rollout_seed(seed, rollout),
                     rollout, nullptr, trajectory);
}

}  // namespace

double sign_test_p_value(int wins, int losses) {
  if (wins < 0 || losses < 0) throw std::invalid_argument("sign test: negative counts");
  const int n = wins + losses;
  if (n == 0) return 1.0;
  // Sum of C(n, k) / 2^n for k >= wins, in log space.
  double p = 0.0;
  for (int k = wins; k <= n; ++k)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  n * std::log(2.0));
  return std::min(1.0, p);
}

SweepTable run_sweep(const RunConfig& base, const SweepSpec& spec) {
  spec.validate();
  base.validate();

  // Per value configuration; fails early on a bad parameter name or value.
  std::vector<RunConfig> configs;
  for (double v : spec.values) {
    RunConfig c = base;
    set_run_parameter(c, spec.parameter, v);
    if (spec.eval_perturbation) c.eval_perturbation = parse_perturbation(*spec.eval_perturbation, c.env);
    configs.push_back(std::move(c));
  }

  const std::size_t nseeds = base.seeds.size();
  const std::size_t used_seeds = std::min<std::size_t>(nseeds, static_cast<std::size_t>(spec.trials));
  auto trained_subset = [&](const RunConfig& c) {
    RunConfig t = c;
    t.seeds.assign(c.seeds.begin(), c.seeds.begin() + static_cast<long>(used_seeds));
    return run_training(t);
  };

  // models[v][s]: shared across values unless retraining.
  std::vector<std::vector<SeedRun>> models;
  if (spec.retrain) {
    for (const auto& c : configs) models.push_back(trained_subset(c));
  } else {
    models.assign(configs.size(), trained_subset(base));
  }

  SweepTable table;
  table.parameter = spec.parameter;
  table.rows.resize(configs.size());
  const long per_value = static_cast<long>(spec.trials) * spec.rollouts_per_trial;
  const long cells = static_cast<long>(configs.size()) * per_value;
  std::vector<EpisodeRecord> results(static_cast<std::size_t>(cells));
  const int workers = static_cast<int>(std::min<long>(kernels::worker_count(), cells));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1)
  for (long cell = 0; cell < cells; ++cell) {
    const auto v = static_cast<std::size_t>(cell / per_value);
    const int k = static_cast<int>(cell % per_value);  // trial * rollouts_per_trial + rollout
    const int t = k / spec.rollouts_per_trial;
    const SeedRun& run = models[v][static_cast<std::size_t>(t) % used_seeds];
    results[static_cast<std::size_t>(cell)] = eval_episode(configs[v], run.models, run.seed, k);
  }

  for (std::size_t v = 0; v < configs.size(); ++v) {
    SweepRow& row = table.rows[v];
    row.value = spec.values[v];
    std::vector<double> costs;
    for (int t = 0; t < spec.trials; ++t) {
      double sum = 0.0;
      for (int r = 0; r < spec.rollouts_per_trial; ++r) {
        const auto& rec = results[v * static_cast<std::size_t>(per_value) +
                                  static_cast<std::size_t>(t * spec.rollouts_per_trial + r)];
        row.trials.push_back(rec);
        sum += rec.total_cost;
      }
      costs.push_back(sum / spec.rollouts_per_trial);
    }
    row.mean_cost = mean_of(costs);
    row.std_cost = stddev_of(costs);
    row.success_rate = rate(row.trials, true, configs[v].env);
    row.goal_success_rate = rate(row.trials, false, configs[v].env);
  }

  // Reference row: rho = 1 when sweeping rho, else the cheapest row.
  std::size_t ref = 0;
  bool found = false;
  if (spec.parameter == "rho") {
    for (std::size_t v = 0; v < table.rows.size(); ++v)
      if (table.rows[v].value == 1.0) {
        ref = v;
        found = true;
        break;
      }
  }
  if (!found)
    for (std::size_t v = 1; v < table.rows.size(); ++v)
      if (table.rows[v].mean_cost < table.rows[ref].mean_cost) ref = v;
  table.reference_value = table.rows[ref].value;
  const double denom = table.rows[ref].mean_cost;
  for (auto& row : table.rows) {
    row.normalized_cost = denom > 0.0 ? row.mean_cost / denom : 0.0;
    row.normalized_std = denom > 0.0 ? row.std_cost / denom : 0.0;
  }
  return table;
}

std::string format_sweep_table(const SweepTable& table) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%10s  %18s  %10s  %12s\n", table.parameter.c_str(),
                "norm. avg cost", "std", "success rate");
  out << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%10g  %18.2f  %10.2f  %11.0f%%\n", r.value, r.normalized_cost,
                  r.normalized_std, 100.0 * r.success_rate);
    out << line;
  }
  return out.str();
}

CompareReport run_compare(const RunConfig& base) {
  base.validate();
  CompareReport rep;
  RunConfig robust = base;
  robust.controller.rho = 1.0;
  RunConfig baseline = base;
  baseline.controller.rho = 0.0;

  auto run_arm = [](const RunConfig& c) {
    ArmResult arm;
    arm.runs = run_training(c);
    RunConfig nominal = c;
    nominal.eval_perturbation = PerturbationSpec{};
    for (const auto& run : arm.runs) {
      arm.nominal_success.push_back(
          run_evaluation(nominal, run.models, c.eval_rollouts, run.seed).success_rate);
      arm.perturbed_success.push_back(
          run_evaluation(c, run.models, c.eval_rollouts, run.seed).success_rate);
    }
    return arm;
  };
  rep.robust = run_arm(robust);
  rep.baseline = run_arm(baseline);

  for (std::size_t s = 0; s < base.seeds.size(); ++s) {
    const double a = rep.robust.perturbed_success[s];
    const double b = rep.baseline.perturbed_success[s];
    if (a > b)
      ++rep.wins;
    else if (a < b)
      ++rep.losses;
    else
      ++rep.ties;
  }
  rep.p_value = sign_test_p_value(rep.wins, rep.losses);
  return rep;
}

fs::path cmd_train(const fs::path& config_path, std::optional<fs::path> out_dir) {
  const ConfigMap map = parse_config_file(config_path.string());
  const RunConfig config = run_config_from_map(map);
  const std::string hash = config_hash(map);
  const fs::path dir = out_dir.value_or(default_dir("", config_path, hash));
  fs::create_directories(dir);

  const std::vector<SeedRun> runs = run_training(config);

  write_text(dir / "config.toml", canonical_config(map));

  std::string episodes = provenance_header(hash, config.seeds) + episode_csv_header();
  std::string training =
      provenance_header(hash, config.seeds) +
      "seed,episode,dynamics_loss_first,dynamics_loss_last,cost_loss_first,cost_loss_last,"
      "holdout_before,holdout_after,steps\n";
  json summary;
  summary["config_hash"] = hash;
  summary["seeds"] = config.seeds;
  summary["return_convention"] = "return = -(sum of stage costs)";
  json per_seed = json::array();

  for (const auto& run : runs) {
    for (const auto& r : run.records) episodes += episode_csv_row(run.seed, r, config.env);
    for (std::size_t e = 0; e < run.train_stats.size(); ++e) {
      const auto& t = run.train_stats[e];
      training += std::to_string(run.seed) + "," + std::to_string(e) + "," +
                  num(t.dynamics_loss_first) + "," + num(t.dynamics_loss_last) + "," +
                  num(t.cost_loss_first) + "," + num(t.cost_loss_last) + "," +
                  num(t.holdout_before) + "," + num(t.holdout_after) + "," +
                  std::to_string(t.steps) + "\n";
    }
    write_text(dir / ("models_seed" + std::to_string(run.seed) + ".json"), save_models(run.models));

    // A frozen-model rollout of the final controller, for inspection.
    std::vector<TrajectoryRow> traj;
    const EpisodeRecord demo = eval_episode(config, run.models, run.seed, 0, &traj);
    std::string csv = provenance_header(hash, config.seeds) + "step";
    for (int i = 0; i < config.env.state_dim; ++i) csv += ",x" + std::to_string(i);
    for (int i = 0; i < config.env.action_dim; ++i) csv += ",u" + std::to_string(i);
    csv += ",cost,distance\n";
    for (const auto& row : traj) {
      csv += std::to_string(row.step);
      for (double v : row.state) csv += "," + num(v);
      for (double v : row.action) csv += "," + num(v);
      csv += "," + num(row.cost) + "," + num(row.distance) + "\n";
    }
    write_text(dir / ("trajectory_seed" + std::to_string(run.seed) + ".csv"), csv);

    std::vector<double> returns;
    for (const auto& r : run.records) returns.push_back(r.ret);
    const std::size_t tail = std::min<std::size_t>(10, run.records.size());
    const std::vector<EpisodeRecord> last(run.records.end() - static_cast<long>(tail), run.records.end());
    per_seed.push_back({{"seed", run.seed},
                        {"episodes", run.records.size()},
                        {"mean_return", mean_of(returns)},
                        {"last10_success_rate", rate(last, false, config.env)},
                        {"buffer_size", run.buffer_size},
                        {"demo_success", demo.success},
                        {"failed", run.failed},
                        {"error", run.error}});
  }
  summary["per_seed"] = per_seed;
  write_text(dir / "episodes.csv", episodes);
  write_text(dir / "training.csv", training);
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  json manifest;
  manifest["format"] = "drfree-run";
  manifest["version"] = 1;
  manifest["command"] = "train";
  manifest["config_hash"] = hash;
  manifest["seeds"] = config.seeds;
  manifest["config"] = "config.toml";
  manifest["files"] = {"episodes.csv", "training.csv", "summary.json"};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

fs::path cmd_eval(const fs::path& run_dir, const EvalOptions& options) {
  const json manifest = json::parse(read_text(run_dir / "manifest.json"));
  if (manifest.value("format", "") != "drfree-run")
    throw std::runtime_error("'" + run_dir.string() + "' is not a training run directory");
  const ConfigMap map = parse_config_file((run_dir / "config.toml").string());
  RunConfig config = run_config_from_map(map);
  std::string hash = config_hash(map);
  if (options.perturb) {
    try {
      config.eval_perturbation = parse_perturbation(*options.perturb, config.env);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("perturb", ex.what());
    }
  }
  if (options.rho) set_run_parameter(config, "rho", *options.rho);
  const int n = options.rollouts.value_or(config.eval_rollouts);
  if (n < 1) throw ConfigError("rollouts", "rollouts must be >= 1");

  std::string csv = provenance_header(hash, config.seeds);
  csv += "# perturbation=" + options.perturb.value_or("config") + " rho=" +
         num(config.controller.rho) + " rollouts=" + std::to_string(n) + "\n";
  csv += episode_csv_header();
  json report;
  report["config_hash"] = hash;
  report["seeds"] = config.seeds;
  report["perturbation"] = options.perturb.value_or("config");
  report["rho"] = config.controller.rho;
  report["rollouts"] = n;
  json per_seed = json::array();
  std::vector<double> rates;
  std::vector<double> costs;
  for (std::uint64_t seed : config.seeds) {
    const LearnedModels models =
        load_models(read_text(run_dir / ("models_seed" + std::to_string(seed) + ".json")));
    const EvalSummary s = run_evaluation(config, models, n, seed);
    for (const auto& r : s.records) {
      csv += episode_csv_row(seed, r, config.env);
      costs.push_back(r.total_cost);
    }
    rates.push_back(s.success_rate);
    per_seed.push_back({{"seed", seed},
                        {"success_rate", s.success_rate},
                        {"safe_success_rate", s.safe_success_rate},
                        {"mean_cost", s.mean_cost},
                        {"std_cost", s.std_cost}});
  }
  report["per_seed"] = per_seed;
  report["success_rate"] = mean_of(rates);
  report["mean_cost"] = mean_of(costs);
  report["std_cost"] = stddev_of(costs);
  write_text(run_dir / (options.tag + ".csv"), csv);
  const fs::path out = run_dir / (options.tag + ".json");
  write_text(out, report.dump(2) + "\n");
  return out;
}

fs::path cmd_sweep(const fs::path& sweep_path, std::optional<fs::path> out_dir, bool force_retrain) {
  const ConfigMap sweep_map = parse_config_file(sweep_path.string());
  SweepSpec spec = sweep_spec_from_map(sweep_map);
  if (force_retrain) spec.retrain = true;
  fs::path base_path = spec.base_config;
  if (base_path.is_relative()) base_path = sweep_path.parent_path() / base_path;
  const ConfigMap base_map = parse_config_file(base_path.string());
  const RunConfig base = run_config_from_map(base_map);
  const std::string hash = config_hash(base_map);
  // The run directory keeps its own copy of the base config, so the stored
  // sweep file points there and re-runs from the directory hash identically.
  ConfigMap stored_sweep = sweep_map;
  stored_sweep["base_config"] = std::string("base_config.toml");
  if (spec.retrain) stored_sweep["retrain"] = true;
  const std::string sweep_hash = config_hash(stored_sweep);
  const fs::path dir = out_dir.value_or(default_dir("sweep-", sweep_path, sweep_hash));
  fs::create_directories(dir);

  const SweepTable table = run_sweep(base, spec);
  const std::string header = provenance_header(hash, base.seeds) + "# sweep_hash=" + sweep_hash +
                             " retrain=" + (spec.retrain ? "true" : "false") +
                             " normalized_by=" + spec.parameter + "=" + num(table.reference_value) +
                             "\n";

  std::string csv = header + spec.parameter +
                    ",normalized_avg_cost,std,success_rate,goal_success_rate,mean_cost,std_cost\n";
  std::string trials = header + spec.parameter + ",trial,rollout," + episode_csv_header();
  for (const auto& r : table.rows) {
    csv += num(r.value) + "," + num(r.normalized_cost) + "," + num(r.normalized_std) + "," +
           num(r.success_rate) + "," + num(r.goal_success_rate) + "," + num(r.mean_cost) + "," +
           num(r.std_cost) + "\n";
    const std::size_t used_seeds = std::min<std::size_t>(base.seeds.size(), static_cast<std::size_t>(spec.trials));
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
      const std::size_t t = i / static_cast<std::size_t>(spec.rollouts_per_trial);
      const std::size_t roll = i % static_cast<std::size_t>(spec.rollouts_per_trial);
      trials += num(r.value) + "," + std::to_string(t) + "," + std::to_string(roll) + "," +
                episode_csv_row(base.seeds[t % used_seeds], r.trials[i], base.env);
    }
  }
  write_text(dir / "sweep.csv", csv);
  write_text(dir / "sweep_trials.csv", trials);
  write_text(dir / "sweep.txt", header + format_sweep_table(table));
  write_text(dir / "base_config.toml", canonical_config(base_map));
  write_text(dir / "sweep.toml", canonical_config(stored_sweep));

  json manifest;
  manifest["format"] = "drfree-sweep";
  manifest["version"] = 1;
  manifest["command"] = "sweep";
  manifest["config_hash"] = hash;
  manifest["sweep_hash"] = sweep_hash;
  manifest["seeds"] = base.seeds;
  manifest["config"] = "sweep.toml";
  manifest["files"] = {"sweep.csv", "sweep_trials.csv", "sweep.txt"};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

fs::path cmd_compare(const fs::path& config_path, std::optional<fs::path> out_dir) {
  const ConfigMap map = parse_config_file(config_path.string());
  const RunConfig config = run_config_from_map(map);
  const std::string hash = config_hash(map);
  const fs::path dir = out_dir.value_or(default_dir("compare-", config_path, hash));
  fs::create_directories(dir);

  const CompareReport rep = run_compare(config);
  const std::string header = provenance_header(hash, config.seeds);

  std::string curves = header +
                       "episode,robust_n,robust_return_mean,robust_return_std,robust_min_distance_mean,"
                       "baseline_n,baseline_return_mean,baseline_return_std,baseline_min_distance_mean\n";
  for (int e = 0; e < config.episodes; ++e) {
    curves += std::to_string(e);
    for (const ArmResult* arm : {&rep.robust, &rep.baseline}) {
      std::vector<double> ret;
      std::vector<double> dist;
      for (const auto& run : arm->runs) {
        if (static_cast<std::size_t>(e) >= run.records.size()) continue;
        ret.push_back(run.records[static_cast<std::size_t>(e)].ret);
        dist.push_back(run.records[static_cast<std::size_t>(e)].min_distance);
      }
      curves += "," + std::to_string(ret.size()) + "," + num(mean_of(ret)) + "," +
                num(stddev_of(ret)) + "," + num(mean_of(dist));
    }
    curves += "\n";
  }
  write_text(dir / "curves.csv", curves);

  std::string episodes = header + "arm," + episode_csv_header();
  std::string per_seed = header + "seed,robust_nominal,baseline_nominal,robust_perturbed,baseline_perturbed\n";
  for (const auto& [name, arm] : {std::pair{"robust", &rep.robust}, std::pair{"baseline", &rep.baseline}})
    for (const auto& run : arm->runs)
      for (const auto& r : run.records) episodes += std::string(name) + "," + episode_csv_row(run.seed, r, config.env);
  for (std::size_t s = 0; s < config.seeds.size(); ++s)
    per_seed += std::to_string(config.seeds[s]) + "," + num(rep.robust.nominal_success[s]) + "," +
                num(rep.baseline.nominal_success[s]) + "," + num(rep.robust.perturbed_success[s]) +
                "," + num(rep.baseline.perturbed_success[s]) + "\n";
  write_text(dir / "episodes.csv", episodes);
  write_text(dir / "final_success.csv", per_seed);

  auto successes = [&](const std::vector<double>& rates) {
    double total = 0.0;
    for (double r : rates) total += r * config.eval_rollouts;
    return static_cast<long>(std::lround(total));
  };
  json report;
  report["config_hash"] = hash;
  report["seeds"] = config.seeds;
  report["rollouts_per_seed"] = config.eval_rollouts;
  report["return_convention"] = "return = -(sum of stage costs)";
  report["robust"] = {{"rho", 1.0},
                      {"nominal_successes", successes(rep.robust.nominal_success)},
                      {"perturbed_successes", successes(rep.robust.perturbed_success)}};
  report["baseline"] = {{"rho", 0.0},
                        {"nominal_successes", successes(rep.baseline.nominal_success)},
                        {"perturbed_successes", successes(rep.baseline.perturbed_success)}};
  report["sign_test"] = {{"wins", rep.wins}, {"losses", rep.losses}, {"ties", rep.ties},
                         {"p_value_one_sided", rep.p_value}};
  write_text(dir / "compare.json", report.dump(2) + "\n");

  json manifest;
  manifest["format"] = "drfree-compare";
  manifest["version"] = 1;
  manifest["command"] = "compare";
  manifest["config_hash"] = hash;
  manifest["seeds"] = config.seeds;
  manifest["config"] = "config.toml";
  manifest["files"] = {"curves.csv", "episodes.csv", "final_success.csv", "compare.json"};
  write_text(dir / "config.toml", canonical_config(map));
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

}  // namespace drfree
