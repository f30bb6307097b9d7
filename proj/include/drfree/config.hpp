#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "drfree/control_loop.hpp"

namespace drfree {

/// Error naming the offending config key (empty for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;

/// Flat `key = value` document: numbers, booleans, "strings" and numeric
/// arrays, `#` comments. A TOML subset without tables.
using ConfigMap = std::map<std::string, ConfigValue>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

/// Canonical text form (sorted keys, round-trip numbers).
std::string canonical_config(const ConfigMap& map);

/// FNV-1a 64 of the canonical form, as 16 hex digits.
std::string config_hash(const ConfigMap& map);

/// Applies every key onto the defaults; unknown keys and type errors throw
/// ConfigError naming the key.
RunConfig run_config_from_map(const ConfigMap& map);

/// Keys accepted by run_config_from_map.
const std::vector<std::string>& known_config_keys();

struct SweepSpec {
  std::string parameter = "rho";
  std::vector<double> values;
  int trials = 5;
  int rollouts_per_trial = 1;  // a trial's cost is the mean over its rollouts
  std::string base_config;
  bool retrain = false;
  std::optional<std::string> eval_perturbation;  // overrides the base config's when set

  void validate() const;
};

SweepSpec sweep_spec_from_map(const ConfigMap& map);

/// Sets one numeric run parameter by config key (used by sweeps).
void set_run_parameter(RunConfig& config, const std::string& key, double value);

}  // namespace drfree
