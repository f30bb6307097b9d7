#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drfree/config.hpp"
#include "drfree/control_loop.hpp"

namespace drfree {

namespace fs = std::filesystem;

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p_value(int wins, int losses);

struct SweepRow {
  double value = 0.0;
  double normalized_cost = 0.0;
  double normalized_std = 0.0;
  double success_rate = 0.0;       // goal reached with collision clearance kept
  double goal_success_rate = 0.0;  // goal reached, clearance ignored
  double mean_cost = 0.0;
  double std_cost = 0.0;
  std::vector<EpisodeRecord> trials;  // every rollout, grouped by trial
};

struct SweepTable {
  std::string parameter;
  double reference_value = 0.0;  // row all costs are normalized by
  std::vector<SweepRow> rows;
};

/// Runs a sweep on an already loaded base configuration.
SweepTable run_sweep(const RunConfig& base, const SweepSpec& spec);

struct ArmResult {
  std::vector<SeedRun> runs;
  std::vector<double> nominal_success;    // per seed, no perturbation
  std::vector<double> perturbed_success;  // per seed, under eval_perturbation
};

struct CompareReport {
  ArmResult robust;    // rho = 1
  ArmResult baseline;  // rho = 0
  int wins = 0;        // seeds where the robust arm has the higher perturbed success rate
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;
};

CompareReport run_compare(const RunConfig& base);

/// Artifact-writing commands behind the CLI. Each returns the directory or
/// file it wrote; failures throw (ConfigError for bad configs).
fs::path cmd_train(const fs::path& config_path, std::optional<fs::path> out_dir = std::nullopt);

struct EvalOptions {
  std::optional<std::string> perturb;
  std::optional<int> rollouts;
  std::optional<double> rho;
  std::string tag = "eval";  // output file stem inside the run directory
};

fs::path cmd_eval(const fs::path& run_dir, const EvalOptions& options = {});

fs::path cmd_sweep(const fs::path& sweep_path, std::optional<fs::path> out_dir = std::nullopt,
                   bool force_retrain = false);

fs::path cmd_compare(const fs::path& config_path, std::optional<fs::path> out_dir = std::nullopt);

/// Aligned plain-text rendering of a sweep table.
std::string format_sweep_table(const SweepTable& table);

}  // namespace drfree
