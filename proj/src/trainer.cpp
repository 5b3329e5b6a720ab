#include "tdse/trainer.hpp"

#include "tdse/config.hpp"
#include "tdse/evaluator.hpp"
#include "tdse/loss.hpp"
#include "tdse/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace tdse {

void OptimizerConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (decay_steps < 1) throw std::invalid_argument("decay_steps must be at least 1");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be non-negative");
  if (convergence_mse && !(*convergence_mse > 0.0))
    throw std::invalid_argument("convergence_mse must be positive");
}

AdamState AdamState::zeros(std::size_t parameter_count) {
  AdamState state;
  state.m.assign(parameter_count, 0.0);
  state.s.assign(parameter_count, 0.0);
  return state;
}

double lr_at(const OptimizerConfig& config, long step) {
  if (step < 0) throw std::invalid_argument("step must be non-negative");
  return config.alpha0 *
         std::pow(config.gamma, static_cast<double>(step) / static_cast<double>(config.decay_steps));
}

void adam_step(std::vector<double>& params, const GradientVector& grad, AdamState& state,
               double lr, const OptimizerConfig& config) {
  const std::size_t n = params.size();
  if (grad.size() != n || state.m.size() != n || state.s.size() != n)
    throw std::invalid_argument("parameter/gradient/moment size mismatch");
  for (const double g : grad)
    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in optimizer step");

  state.step += 1;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.s[i] = config.beta2 * state.s[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / correction1;
    const double s_hat = state.s[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(s_hat) + config.eps);
  }
}

namespace {

/// Coarse grid spacing for the periodic convergence checks; the final
/// report always uses the configured evaluation grid.
constexpr double kConvergenceDelta = 0.04;

constexpr char kLogHeader[] = "step,lr,L_f,L_BC,L_IC,total,min_causal_weight\n";

struct FileHandle {
  std::FILE* f = nullptr;
  ~FileHandle() {
    if (f) std::fclose(f);
  }
};

void write_log_row(std::FILE* f, const TrainLogRow& row) {
  std::fprintf(f, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.step, row.lr, row.pde,
               row.boundary, row.initial, row.total, row.min_causal_weight);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, long step) {
  char name[48];
  std::snprintf(name, sizeof(name), "checkpoint_%06ld.bin", step);
  return dir / name;
}

std::string halt_diagnostic(long step, double lr, const LossBreakdown& breakdown,
                            const char* what) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "step %ld, lr %.6g: %s (pde=%.6g boundary=%.6g initial=%.6g total=%.6g)", step,
                lr, what, breakdown.pde, breakdown.boundary, breakdown.initial, breakdown.total);
  return buf;
}

void check_start_matches(const NetworkConfig& have, const NetworkConfig& want) {
  if (have.input_width != want.input_width || have.hidden_layers != want.hidden_layers ||
      have.hidden_width != want.hidden_width || have.activation != want.activation)
    throw std::invalid_argument("starting parameters do not match the configured network shape");
}

TrainResult run_training(ExperimentConfig config, const NetworkParams* start) {
  config.validate();

  TrainResult result;
  if (start) {
    check_start_matches(start->config, config.network);
    result.params = *start;
  } else {
    result.params = init_network(config.network);
  }

  AdamState adam = AdamState::zeros(result.params.parameter_count());
  std::vector<double> flat = result.params.flatten();

  const bool with_artifacts = !config.output_dir.empty();
  FileHandle log_file;
  if (with_artifacts) {
    std::filesystem::create_directories(config.output_dir);
    const auto log_path = config.output_dir / "training_log.csv";
    log_file.f = std::fopen(log_path.c_str(), "w");
    if (!log_file.f)
      throw std::runtime_error("cannot open " + log_path.string() + " for writing");
    std::fputs(kLogHeader, log_file.f);
  }

  for (long step = 0; step < config.optimizer.max_steps; ++step) {
    const TrainingBatches batches{
        sample_interior(config.sampler, config.domain, static_cast<std::uint64_t>(step)),
        sample_boundary(config.sampler, config.domain, static_cast<std::uint64_t>(step)),
        sample_initial(config.sampler, config.domain, static_cast<std::uint64_t>(step))};

    const double lr = lr_at(config.optimizer, step);
    LossBreakdown breakdown;
    try {
      const LossValueAndGradient lg =
          loss_parameter_gradient(result.params, [&](LossBuilder& builder) {
            return training_loss(builder, batches, config.state, config.domain,
                                 config.loss_weights, config.causal, breakdown);
          });
      adam_step(flat, lg.gradient, adam, lr, config.optimizer);
    } catch (const std::runtime_error& e) {
      result.halted = true;
      result.halt_reason = halt_diagnostic(step, lr, breakdown, e.what());
      break;
    }
    result.params.unflatten(flat);
    result.steps = step + 1;

    const TrainLogRow row{step,          lr,           breakdown.pde,
                          breakdown.boundary, breakdown.initial, breakdown.total,
                          breakdown.min_causal_weight()};
    result.log.push_back(row);
    if (log_file.f) {
      write_log_row(log_file.f, row);
      std::fflush(log_file.f);
    }

    if ((step + 1) % config.checkpoint_interval == 0) {
      if (with_artifacts)
        save_checkpoint(result.params, checkpoint_path(config.output_dir, step + 1));
      if (config.optimizer.convergence_mse) {
        const EvaluationReport check = evaluate_grid(result.params, config.state, config.domain,
                                                     kConvergenceDelta, kConvergenceDelta);
        result.last_convergence_mse = check.global_mse;
        if (check.global_mse <= *config.optimizer.convergence_mse) {
          result.converged = true;
          break;
        }
      }
    }
  }

  if (with_artifacts)
    save_checkpoint(result.params, config.output_dir / "checkpoint_final.bin");
  return result;
}

}  // namespace

TrainResult train(const ExperimentConfig& config) { return run_training(config, nullptr); }

TrainResult train(const ExperimentConfig& config, const NetworkParams& start) {
  return run_training(config, &start);
}

void save_training_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  FileHandle file;
  file.f = std::fopen(path.c_str(), "w");
  if (!file.f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::fputs(kLogHeader, file.f);
  for (const TrainLogRow& row : log) write_log_row(file.f, row);
}

}  // namespace tdse
