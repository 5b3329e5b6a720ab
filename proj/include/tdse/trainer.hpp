#pragma once

#include "tdse/autodiff.hpp"
#include "tdse/network.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tdse {

struct ExperimentConfig;

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double alpha0 = 0.001;   ///< initial learning rate
  double gamma = 0.9;      ///< decay factor per decay_steps
  int decay_steps = 2000;
  int max_steps = 5000;
  std::optional<double> convergence_mse;  ///< early stop on coarse-grid MSE

  void validate() const;
};

struct AdamState {
  std::vector<double> m;  ///< first moment
  std::vector<double> s;  ///< second moment
  long step = 0;          ///< completed updates

  static AdamState zeros(std::size_t parameter_count);
};

/// alpha0 * gamma^(step / decay_steps) with a real-valued exponent.
double lr_at(const OptimizerConfig& config, long step);

/// One bias-corrected update in place. Throws std::invalid_argument on a
/// size mismatch and std::runtime_error on a non-finite gradient.
void adam_step(std::vector<double>& params, const GradientVector& grad, AdamState& state,
               double lr, const OptimizerConfig& config);

struct TrainLogRow {
  long step = 0;
  double lr = 0.0;
  double pde = 0.0;
  double boundary = 0.0;
  double initial = 0.0;
  double total = 0.0;
  double min_causal_weight = 1.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<TrainLogRow> log;
  long steps = 0;
  bool converged = false;
  bool halted = false;        ///< a non-finite loss or gradient stopped training
  std::string halt_reason;
  double last_convergence_mse = -1.0;  ///< most recent coarse-grid check, -1 if never run
};

/// Runs the whole training loop: per-step resampling, loss and gradient,
/// Adam update with the decayed learning rate, periodic checkpoints and
/// coarse-grid convergence checks. With an output directory configured it
/// writes checkpoints and the training log as it goes.
TrainResult train(const ExperimentConfig& config);

/// Optional warm start from existing parameters instead of a fresh
/// initialization.
TrainResult train(const ExperimentConfig& config, const NetworkParams& start);

/// CSV with header "step,lr,L_f,L_BC,L_IC,total,min_causal_weight".
void save_training_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace tdse
