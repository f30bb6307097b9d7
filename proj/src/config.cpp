#include "drfree/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace drfree {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing `#` comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  std::string t;
  for (char c : text)
    if (c != '_') t.push_back(c);
  const char* begin = t.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + t.size() && std::isfinite(out);
}

ConfigValue parse_value(const std::string& key, const std::string& raw, int line) {
  const std::string v = trim(raw);
  auto fail = [&](const std::string& what) -> ConfigError {
    return ConfigError(key, "line " + std::to_string(line) + ": key '" + key + "': " + what);
  };
  if (v.empty()) throw fail("missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw fail("unterminated string");
    std::string s;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        ++i;
        s.push_back(v[i] == 'n' ? '\n' : v[i]);
      } else {
        s.push_back(v[i]);
      }
    }
    return s;
  }
  if (v.front() == '[') {
    if (v.back() != ']') throw fail("unterminated array");
    std::vector<double> arr;
    std::stringstream body(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(body, item, ',')) {
      item = trim(item);
      if (item.empty()) {
        if (body.eof()) break;  // trailing comma
        throw fail("empty array element");
      }
      double x = 0.0;
      if (!parse_number(item, x)) throw fail("array elements must be finite numbers, got '" + item + "'");
      arr.push_back(x);
    }
    return arr;
  }
  double x = 0.0;
  if (!parse_number(v, x)) throw fail("cannot parse value '" + v + "'");
  return x;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double as_number(const std::string& key, const ConfigValue& v) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw ConfigError(key, "key '" + key + "': expected a number");
}

int as_int(const std::string& key, const ConfigValue& v) {
  const double d = as_number(key, v);
  if (d != std::floor(d) || std::abs(d) > 2e9)
    throw ConfigError(key, "key '" + key + "': expected an integer");
  return static_cast<int>(d);
}

bool as_bool(const std::string& key, const ConfigValue& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError(key, "key '" + key + "': expected true or false");
}

const std::string& as_string(const std::string& key, const ConfigValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(key, "key '" + key + "': expected a quoted string");
}

std::vector<double> as_array(const std::string& key, const ConfigValue& v) {
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  if (const double* d = std::get_if<double>(&v)) return {*d};
  throw ConfigError(key, "key '" + key + "': expected an array of numbers");
}

Vector as_vector(const std::string& key, const ConfigValue& v, int expected) {
  const auto a = as_array(key, v);
  if (static_cast<int>(a.size()) != expected)
    throw ConfigError(key, "key '" + key + "': expected " + std::to_string(expected) +
                               " values, got " + std::to_string(a.size()));
  return Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
}

// Flat [lo0, hi0, lo1, hi1, ...] box.
void as_box(const std::string& key, const ConfigValue& v, int dim, Vector& lo, Vector& hi) {
  const auto a = as_array(key, v);
  if (static_cast<int>(a.size()) != 2 * dim)
    throw ConfigError(key, "key '" + key + "': expected " + std::to_string(2 * dim) +
                               " values (min/max per dimension)");
  lo.resize(dim);
  hi.resize(dim);
  for (int i = 0; i < dim; ++i) {
    lo[i] = a[2 * i];
    hi[i] = a[2 * i + 1];
    if (!(lo[i] < hi[i])) throw ConfigError(key, "key '" + key + "': need min < max per dimension");
  }
}

using Setter = std::function<void(RunConfig&, const std::string&, const ConfigValue&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // run
      {"episodes", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.episodes = as_int(k, v); }},
      {"seeds",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         c.seeds.clear();
         for (double s : as_array(k, v)) {
           if (s < 0 || s != std::floor(s)) throw ConfigError(k, "key 'seeds': expected non-negative integers");
           c.seeds.push_back(static_cast<std::uint64_t>(s));
         }
       }},
      {"eval_rollouts", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.eval_rollouts = as_int(k, v); }},
      {"warmup", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.warmup = as_bool(k, v); }},
      {"train_reward_noise",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         c.train_perturbation.reward_noise_sigma = as_number(k, v);
       }},
      {"eval_perturbation",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         try {
           c.eval_perturbation = parse_perturbation(as_string(k, v), c.env);
         } catch (const ConfigError&) {
           throw;
         } catch (const std::exception& ex) {
           throw ConfigError(k, "key '" + k + "': " + ex.what());
         }
       }},
      // environment
      {"max_steps", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.max_steps = as_int(k, v); }},
      {"dt", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.dt = as_number(k, v); }},
      {"goal", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.goal = as_vector(k, v, c.env.state_dim); }},
      {"start", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.start = as_vector(k, v, c.env.state_dim); }},
      {"start_jitter", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.start_jitter = as_number(k, v); }},
      {"state_box",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         as_box(k, v, c.env.state_dim, c.env.state_lo, c.env.state_hi);
       }},
      {"obstacles",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         const auto a = as_array(k, v);
         const std::size_t stride = c.env.position_dims.size() + 1;
         if (a.size() % stride != 0)
           throw ConfigError(k, "key 'obstacles': expected groups of " + std::to_string(stride) +
                                    " values (center..., radius)");
         c.env.obstacles.clear();
         for (std::size_t i = 0; i < a.size(); i += stride) {
           Obstacle o;
           o.center = Eigen::Map<const Vector>(a.data() + i, static_cast<Eigen::Index>(stride - 1));
           o.radius = a[i + stride - 1];
           c.env.obstacles.push_back(o);
         }
       }},
      {"obstacle_margin", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.obstacle_margin = as_number(k, v); }},
      {"collision_clearance", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.collision_clearance = as_number(k, v); }},
      {"goal_threshold", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.goal_threshold = as_number(k, v); }},
      {"process_noise",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         const auto a = as_array(k, v);
         if (a.size() == 1)
           c.env.process_noise = Vector::Constant(c.env.state_dim, a[0]);
         else
           c.env.process_noise = as_vector(k, v, c.env.state_dim);
       }},
      {"goal_weight", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.goal_weight = as_number(k, v); }},
      {"obstacle_weight", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.obstacle_weight = as_number(k, v); }},
      {"gravity", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.gravity = as_number(k, v); }},
      {"length", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.length = as_number(k, v); }},
      {"mass", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.env.mass = as_number(k, v); }},
      {"action_box",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         as_box(k, v, c.env.action_dim, c.env.action_lo, c.env.action_hi);
       }},
      // controller
      {"pmax_epsilon", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.pmax_epsilon = as_number(k, v); }},
      {"rho", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.rho = as_number(k, v); }},
      {"sigma_cost", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.sigma_cost = as_number(k, v); }},
      {"delta_cost", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.delta_cost = as_number(k, v); }},
      {"mc_samples", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.mc_samples = as_int(k, v); }},
      {"alpha_bracket",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         const Vector b = as_vector(k, v, 2);
         c.controller.bracket.lo = b[0];
         c.controller.bracket.hi = b[1];
       }},
      {"alpha_iterations", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.bracket.iterations = as_int(k, v); }},
      {"n_candidates", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.n_candidates = as_int(k, v); }},
      {"horizon", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.horizon = as_int(k, v); }},
      {"scenario_branching", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.scenario_branching = as_int(k, v); }},
      {"select_mode",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         try {
           c.controller.select_mode = parse_select_mode(as_string(k, v));
         } catch (const std::invalid_argument& ex) {
           throw ConfigError(k, "key '" + k + "': " + ex.what());
         }
       }},
      {"goal_sigma", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.goal_sigma = as_number(k, v); }},
      {"shaping_weight", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.controller.shaping_weight = as_number(k, v); }},
      // models
      {"rbf_count", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.rbf_count = as_int(k, v); }},
      {"rbf_width", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.rbf_width = as_number(k, v); }},
      {"initial_log_var", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.initial_log_var = as_number(k, v); }},
      {"lr", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.train.lr = as_number(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.train.batch_size = as_int(k, v); }},
      {"buffer_capacity",
       [](RunConfig& c, const std::string& k, const ConfigValue& v) {
         const int n = as_int(k, v);
         if (n < 1) throw ConfigError(k, "key 'buffer_capacity': must be >= 1");
         c.buffer_capacity = static_cast<std::size_t>(n);
       }},
      {"train_steps_per_episode", [](RunConfig& c, const std::string& k, const ConfigValue& v) { c.train.steps = as_int(k, v); }},
  };
  return table;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[')
      throw ConfigError("", "line " + std::to_string(line_no) + ": tables are not supported, keys are flat");
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    for (char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
        throw ConfigError(key, "line " + std::to_string(line_no) + ": invalid key '" + key + "'");
    std::string value = s.substr(eq + 1);
    // Arrays may continue over several lines.
    if (trim(value).starts_with("[")) {
      const int first = line_no;
      while (trim(value).back() != ']') {
        if (!std::getline(in, line))
          throw ConfigError(key, "line " + std::to_string(first) + ": key '" + key + "': unterminated array");
        ++line_no;
        value += " " + trim(strip_comment(line));
      }
    }
    if (map.count(key)) throw ConfigError(key, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    map.emplace(key, parse_value(key, value, line_no));
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string canonical_config(const ConfigMap& map) {
  std::string out;
  for (const auto& [key, value] : map) {
    out += key;
    out += " = ";
    if (const double* d = std::get_if<double>(&value)) {
      out += format_number(*d);
    } else if (const bool* b = std::get_if<bool>(&value)) {
      out += *b ? "true" : "false";
    } else if (const auto* s = std::get_if<std::string>(&value)) {
      out += '"';
      for (char c : *s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
    } else {
      const auto& a = std::get<std::vector<double>>(value);
      out += '[';
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ", ";
        out += format_number(a[i]);
      }
      out += ']';
    }
    out += '\n';
  }
  return out;
}

std::string config_hash(const ConfigMap& map) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_config(map)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k{"env"};
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

RunConfig run_config_from_map(const ConfigMap& map) {
  for (const auto& [key, _] : map)
    if (key != "env" && !setters().count(key))
      throw ConfigError(key, "unknown config key '" + key + "'");

  RunConfig c;
  if (auto it = map.find("env"); it != map.end()) {
    try {
      const EnvKind kind = parse_env_kind(as_string("env", it->second));
      c.env = kind == EnvKind::point_mass ? point_mass_spec() : pendulum_spec();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ConfigError("env", std::string("key 'env': ") + ex.what());
    }
  }
  // The perturbation string depends on the final environment.
  for (const auto& [key, value] : map)
    if (key != "env" && key != "eval_perturbation") setters().at(key)(c, key, value);
  if (auto it = map.find("eval_perturbation"); it != map.end())
    setters().at("eval_perturbation")(c, it->first, it->second);

  try {
    c.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("", std::string("invalid configuration: ") + ex.what());
  }
  return c;
}

void set_run_parameter(RunConfig& config, const std::string& key, double value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(key, "unknown config key '" + key + "'");
  it->second(config, key, ConfigValue(value));
  config.validate();
}

void SweepSpec::validate() const {
  if (parameter.empty()) throw ConfigError("parameter", "sweep: parameter must be set");
  if (values.empty()) throw ConfigError("values", "sweep: values must be non-empty");
  if (trials < 1) throw ConfigError("trials", "sweep: trials must be >= 1");
  if (rollouts_per_trial < 1)
    throw ConfigError("rollouts_per_trial", "sweep: rollouts_per_trial must be >= 1");
  if (base_config.empty()) throw ConfigError("base_config", "sweep: base_config must be set");
}

SweepSpec sweep_spec_from_map(const ConfigMap& map) {
  SweepSpec s;
  for (const auto& [key, value] : map) {
    if (key == "parameter")
      s.parameter = as_string(key, value);
    else if (key == "values")
      s.values = as_array(key, value);
    else if (key == "trials")
      s.trials = as_int(key, value);
    else if (key == "rollouts_per_trial")
      s.rollouts_per_trial = as_int(key, value);
    else if (key == "base_config")
      s.base_config = as_string(key, value);
    else if (key == "retrain")
      s.retrain = as_bool(key, value);
    else if (key == "eval_perturbation")
      s.eval_perturbation = as_string(key, value);
    else
      throw ConfigError(key, "unknown sweep key '" + key + "'");
  }
  s.validate();
  return s;
}

}  // namespace drfree
