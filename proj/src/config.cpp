#include "tdse/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

namespace tdse {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

[[noreturn]] void fail(const std::string& where, const std::string& message) {
  throw ConfigError(where + ": " + message);
}

double to_double(const std::string& value, const std::string& key, const std::string& where) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    fail(where, "invalid number '" + value + "' for '" + key + "'");
  }
}

int to_int(const std::string& value, const std::string& key, const std::string& where) {
  try {
    std::size_t used = 0;
    const long parsed = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(parsed);
  } catch (const std::exception&) {
    fail(where, "invalid integer '" + value + "' for '" + key + "'");
  }
}

std::uint64_t to_uint64(const std::string& value, const std::string& key,
                        const std::string& where) {
  try {
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
    std::size_t used = 0;
    const std::uint64_t parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    fail(where, "invalid unsigned integer '" + value + "' for '" + key + "'");
  }
}

bool to_bool(const std::string& value, const std::string& key, const std::string& where) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail(where, "expected true or false for '" + key + "', got '" + value + "'");
}

}  // namespace

ExperimentKind kind_from_string(const std::string& name) {
  if (name == "baseline") return ExperimentKind::Baseline;
  if (name == "generalisability") return ExperimentKind::Generalisability;
  if (name == "large_time") return ExperimentKind::LargeTime;
  if (name == "high_energy") return ExperimentKind::HighEnergy;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Baseline: return "baseline";
    case ExperimentKind::Generalisability: return "generalisability";
    case ExperimentKind::LargeTime: return "large_time";
    case ExperimentKind::HighEnergy: return "high_energy";
  }
  throw ConfigError("unknown experiment kind value");
}

void ExperimentConfig::derive() {
  network.input_width = sampler.omega_range ? 3 : 2;
  network.seed = seed;
  sampler.seed = seed;
  sampler.omega = state.omega;
}

void ExperimentConfig::validate() {
  derive();
  state.validate();
  domain.validate();
  network.validate();
  sampler.validate();
  loss_weights.validate();
  causal.validate();
  optimizer.validate();
  if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be at least 1");
  if (!(eval_dx > 0.0) || !(eval_dt > 0.0))
    throw ConfigError("evaluation grid spacings must be positive");
  if (kind == ExperimentKind::Generalisability) {
    if (!sampler.omega_range)
      throw ConfigError(
          "generalisability requires a frequency range (omega_low / omega_high)");
  } else if (sampler.omega_range) {
    throw ConfigError("a frequency range is only valid for the generalisability experiment");
  }
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig config;
  config.kind = kind;
  config.state = {0, 1, 1.0};
  config.domain = {-std::numbers::pi, std::numbers::pi, 0.0, 2.0 * std::numbers::pi};
  config.network = {2, 6, 512, Activation::Tanh, 0};
  config.sampler.n_interior = 3140;
  config.sampler.n_boundary = 200;
  config.sampler.n_initial = 314;
  config.optimizer.max_steps = 20000;

  switch (kind) {
    case ExperimentKind::Baseline:
      break;
    case ExperimentKind::Generalisability:
      config.sampler.omega_range = OmegaRange{0.75, 2.0};
      break;
    case ExperimentKind::LargeTime:
      config.domain.t_max = 6.0 * std::numbers::pi;
      config.causal.enabled = true;
      config.network.activation = Activation::Silu;
      config.optimizer.gamma = 0.95;
      config.optimizer.decay_steps = 100;
      break;
    case ExperimentKind::HighEnergy:
      config.state = {0, 3, 1.0};
      config.causal.enabled = true;
      config.network.activation = Activation::Silu;
      config.optimizer.gamma = 0.95;
      config.optimizer.decay_steps = 100;
      break;
  }
  config.derive();
  return config;
}

void apply_desk_scale(ExperimentConfig& config) {
  config.network.hidden_layers = 4;
  config.network.hidden_width = 64;
  config.sampler.n_interior = 1024;
  config.sampler.n_boundary = 128;
  config.sampler.n_initial = 128;
  config.optimizer.max_steps = 5000;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  struct Entry {
    std::string value;
    std::string where;
  };
  std::vector<std::pair<std::string, Entry>> entries;

  std::istringstream stream(text);
  std::string raw;
  int line = 0;
  while (std::getline(stream, raw)) {
    ++line;
    const std::string where = source + ":" + std::to_string(line);
    std::string content = raw;
    if (const auto hash = content.find('#'); hash != std::string::npos)
      content = content.substr(0, hash);
    content = trim(content);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) fail(where, "expected 'key = value', got '" + content + "'");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty()) fail(where, "missing key before '='");
    if (value.empty()) fail(where, "missing value for '" + key + "'");
    entries.emplace_back(key, Entry{value, where});
  }

  // the experiment kind picks the defaults everything else overrides
  ExperimentConfig config;
  bool kind_seen = false;
  for (const auto& [key, entry] : entries) {
    if (key != "experiment") continue;
    try {
      config = default_config(kind_from_string(entry.value));
    } catch (const ConfigError& e) {
      fail(entry.where, e.what());
    }
    kind_seen = true;
  }
  if (!kind_seen) throw ConfigError(source + ": missing required key 'experiment'");

  std::optional<double> omega_low, omega_high;
  std::string omega_where;
  if (config.sampler.omega_range) {
    omega_low = config.sampler.omega_range->low;
    omega_high = config.sampler.omega_range->high;
  }

  for (const auto& [key, entry] : entries) {
    const std::string& value = entry.value;
    const std::string& where = entry.where;
    if (key == "experiment") {
    } else if (key == "state_m") {
      config.state.m = to_int(value, key, where);
    } else if (key == "state_n") {
      config.state.n = to_int(value, key, where);
    } else if (key == "omega") {
      config.state.omega = to_double(value, key, where);
    } else if (key == "omega_low") {
      omega_low = to_double(value, key, where);
      omega_where = where;
    } else if (key == "omega_high") {
      omega_high = to_double(value, key, where);
      omega_where = where;
    } else if (key == "x_min") {
      config.domain.x_min = to_double(value, key, where);
    } else if (key == "x_max") {
      config.domain.x_max = to_double(value, key, where);
    } else if (key == "t_min") {
      config.domain.t_min = to_double(value, key, where);
    } else if (key == "t_max") {
      config.domain.t_max = to_double(value, key, where);
    } else if (key == "hidden_layers") {
      config.network.hidden_layers = to_int(value, key, where);
    } else if (key == "hidden_width") {
      config.network.hidden_width = to_int(value, key, where);
    } else if (key == "activation") {
      try {
        config.network.activation = activation_from_string(value);
      } catch (const std::exception& e) {
        fail(where, e.what());
      }
    } else if (key == "n_interior") {
      config.sampler.n_interior = to_int(value, key, where);
    } else if (key == "n_boundary") {
      config.sampler.n_boundary = to_int(value, key, where);
    } else if (key == "n_initial") {
      config.sampler.n_initial = to_int(value, key, where);
    } else if (key == "lambda_pde") {
      config.loss_weights.pde = to_double(value, key, where);
    } else if (key == "lambda_bc") {
      config.loss_weights.boundary = to_double(value, key, where);
    } else if (key == "lambda_ic") {
      config.loss_weights.initial = to_double(value, key, where);
    } else if (key == "causal") {
      config.causal.enabled = to_bool(value, key, where);
    } else if (key == "causal_slices") {
      config.causal.n_slices = to_int(value, key, where);
    } else if (key == "causal_epsilon") {
      config.causal.epsilon = to_double(value, key, where);
    } else if (key == "beta1") {
      config.optimizer.beta1 = to_double(value, key, where);
    } else if (key == "beta2") {
      config.optimizer.beta2 = to_double(value, key, where);
    } else if (key == "adam_epsilon") {
      config.optimizer.eps = to_double(value, key, where);
    } else if (key == "alpha0") {
      config.optimizer.alpha0 = to_double(value, key, where);
    } else if (key == "gamma") {
      config.optimizer.gamma = to_double(value, key, where);
    } else if (key == "decay_steps") {
      config.optimizer.decay_steps = to_int(value, key, where);
    } else if (key == "max_steps") {
      config.optimizer.max_steps = to_int(value, key, where);
    } else if (key == "convergence_mse") {
      if (value == "none")
        config.optimizer.convergence_mse.reset();
      else
        config.optimizer.convergence_mse = to_double(value, key, where);
    } else if (key == "checkpoint_interval") {
      config.checkpoint_interval = to_int(value, key, where);
    } else if (key == "eval_dx") {
      config.eval_dx = to_double(value, key, where);
    } else if (key == "eval_dt") {
      config.eval_dt = to_double(value, key, where);
    } else if (key == "seed") {
      config.seed = to_uint64(value, key, where);
    } else if (key == "output_dir") {
      config.output_dir =
          (value == "none") ? std::filesystem::path{} : std::filesystem::path{value};
    } else {
      fail(where, "unknown key '" + key + "'");
    }
  }

  if (omega_low.has_value() != omega_high.has_value())
    fail(omega_where, "omega_low and omega_high must be given together");
  if (omega_low)
    config.sampler.omega_range = OmegaRange{*omega_low, *omega_high};
  else
    config.sampler.omega_range.reset();

  try {
    config.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "experiment = " << to_string(config.kind) << "\n\n";
  out << "state_m = " << config.state.m << "\n";
  out << "state_n = " << config.state.n << "\n";
  out << "omega = " << fmt(config.state.omega) << "\n";
  if (config.sampler.omega_range) {
    out << "omega_low = " << fmt(config.sampler.omega_range->low) << "\n";
    out << "omega_high = " << fmt(config.sampler.omega_range->high) << "\n";
  }
  out << "\n";
  out << "x_min = " << fmt(config.domain.x_min) << "\n";
  out << "x_max = " << fmt(config.domain.x_max) << "\n";
  out << "t_min = " << fmt(config.domain.t_min) << "\n";
  out << "t_max = " << fmt(config.domain.t_max) << "\n\n";
  out << "hidden_layers = " << config.network.hidden_layers << "\n";
  out << "hidden_width = " << config.network.hidden_width << "\n";
  out << "activation = " << to_string(config.network.activation) << "\n\n";
  out << "n_interior = " << config.sampler.n_interior << "\n";
  out << "n_boundary = " << config.sampler.n_boundary << "\n";
  out << "n_initial = " << config.sampler.n_initial << "\n\n";
  out << "lambda_pde = " << fmt(config.loss_weights.pde) << "\n";
  out << "lambda_bc = " << fmt(config.loss_weights.boundary) << "\n";
  out << "lambda_ic = " << fmt(config.loss_weights.initial) << "\n\n";
  out << "causal = " << (config.causal.enabled ? "true" : "false") << "\n";
  out << "causal_slices = " << config.causal.n_slices << "\n";
  out << "causal_epsilon = " << fmt(config.causal.epsilon) << "\n\n";
  out << "beta1 = " << fmt(config.optimizer.beta1) << "\n";
  out << "beta2 = " << fmt(config.optimizer.beta2) << "\n";
  out << "adam_epsilon = " << fmt(config.optimizer.eps) << "\n";
  out << "alpha0 = " << fmt(config.optimizer.alpha0) << "\n";
  out << "gamma = " << fmt(config.optimizer.gamma) << "\n";
  out << "decay_steps = " << config.optimizer.decay_steps << "\n";
  out << "max_steps = " << config.optimizer.max_steps << "\n";
  out << "convergence_mse = "
      << (config.optimizer.convergence_mse ? fmt(*config.optimizer.convergence_mse) : "none")
      << "\n\n";
  out << "checkpoint_interval = " << config.checkpoint_interval << "\n";
  out << "eval_dx = " << fmt(config.eval_dx) << "\n";
  out << "eval_dt = " << fmt(config.eval_dt) << "\n";
  out << "seed = " << config.seed << "\n";
  out << "output_dir = "
      << (config.output_dir.empty() ? std::string("none") : config.output_dir.string()) << "\n";
  return out.str();
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << serialize_config(config);
  if (!out) throw ConfigError("short write to " + path.string());
}

}  // namespace tdse
