// Command-line front end: train, eval, sweep, compare.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "drfree/harness.hpp"

namespace {

int fail(const std::string& command, const std::string& kind, const std::string& message,
         const std::string& key = "") {
  nlohmann::json diag = {{"status", "error"}, {"command", command}, {"kind", kind}, {"message", message}};
  if (!key.empty()) diag["key"] = key;
  std::cerr << diag.dump() << "\n";
  return kind == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust free-energy controller experiments"};
  app.require_subcommand(1);
  app.footer("Worker threads: set DRFREE_WORKERS (default: OpenMP default).");

  std::string config_path;
  std::string run_dir;
  std::string sweep_path;
  std::string out_dir;
  std::string perturb;
  std::string tag = "eval";
  int rollouts = 0;
  double rho = 0.0;
  bool retrain = false;

  auto* train = app.add_subcommand("train", "Run the learning loop for every seed");
  train->add_option("config", config_path, "Config file")->required();
  train->add_option("--out", out_dir, "Run directory (default runs/<name>-<hash>)");

  auto* eval = app.add_subcommand("eval", "Evaluate the frozen models of a run directory");
  eval->add_option("run_dir", run_dir, "Directory written by train")->required();
  auto* perturb_opt = eval->add_option("--perturb", perturb, "e.g. friction=0.8,drift=0.05");
  auto* rollouts_opt = eval->add_option("--rollouts", rollouts, "Rollouts per seed");
  auto* rho_opt = eval->add_option("--rho", rho, "Execution-time ambiguity scale");
  eval->add_option("--tag", tag, "Output file stem");

  auto* sweep = app.add_subcommand("sweep", "Parameter sweep table");
  sweep->add_option("sweep_file", sweep_path, "Sweep file")->required();
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_flag("--retrain", retrain, "Train a model per value instead of sharing one");

  auto* compare = app.add_subcommand("compare", "Robust (rho=1) versus baseline (rho=0)");
  compare->add_option("config", config_path, "Config file")->required();
  compare->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const auto out = out_dir.empty() ? std::nullopt : std::optional<drfree::fs::path>(out_dir);
  try {
    drfree::fs::path written;
    if (command == "train") {
      written = drfree::cmd_train(config_path, out);
    } else if (command == "eval") {
      drfree::EvalOptions opts;
      if (perturb_opt->count()) opts.perturb = perturb;
      if (rollouts_opt->count()) opts.rollouts = rollouts;
      if (rho_opt->count()) opts.rho = rho;
      opts.tag = tag;
      written = drfree::cmd_eval(run_dir, opts);
    } else if (command == "sweep") {
      written = drfree::cmd_sweep(sweep_path, out, retrain);
      std::ifstream table(written / "sweep.txt");
      std::cout << table.rdbuf();
    } else {
      written = drfree::cmd_compare(config_path, out);
    }
    std::cout << written.string() << "\n";
  } catch (const drfree::ConfigError& e) {
    return fail(command, "config", e.what(), e.key());
  } catch (const std::exception& e) {
    return fail(command, "runtime", e.what());
  }
  return 0;
}
