#pragma once

#include "tdse/loss.hpp"
#include "tdse/network.hpp"
#include "tdse/physics.hpp"
#include "tdse/sampler.hpp"
#include "tdse/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace tdse {

enum class ExperimentKind { Baseline, Generalisability, LargeTime, HighEnergy };

ExperimentKind kind_from_string(const std::string& name);
std::string to_string(ExperimentKind kind);

/// Parse or validation failure; the message carries file:line when the
/// config came from a file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/**
 * Everything one run needs. Derived wiring (network input width, sampler
 * seed and frequency, network seed) is filled in by the loaders and
 * re-derived by validate(), so hand-built configs stay consistent.
 */
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Baseline;
  OscillatorState state;  ///< target superposition; omega is the fixed frequency
  Domain domain;
  NetworkConfig network;
  SamplerConfig sampler;
  LossWeights loss_weights;
  CausalConfig causal;
  OptimizerConfig optimizer;
  int checkpoint_interval = 500;
  double eval_dx = 0.01;
  double eval_dt = 0.01;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;  ///< empty: keep results in memory only

  /// Pushes seed/omega/input-width wiring into the nested configs.
  void derive();

  /// derive() plus full validation, including kind consistency.
  void validate();
};

/// Canonical starting point for each experiment kind, at full scale.
ExperimentConfig default_config(ExperimentKind kind);

/// Shrinks network and batches to a workstation-sized run.
void apply_desk_scale(ExperimentConfig& config);

/// Parses "key = value" lines ('#' starts a comment). Unknown keys and
/// malformed values raise ConfigError with `source`:line.
ExperimentConfig parse_config(const std::string& text, const std::string& source);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Round-trips through parse_config losslessly.
std::string serialize_config(const ExperimentConfig& config);

void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace tdse
