// Command-line front end: train a solver network, evaluate a checkpoint
// against the analytical solution, or generate the numerical oracles.

#include "CLI11.hpp"

#include "tdse/config.hpp"
#include "tdse/evaluator.hpp"
#include "tdse/loss.hpp"
#include "tdse/physics.hpp"
#include "tdse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitHalted = 3;  // training stopped on a non-finite loss

struct CommonOptions {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool desk_scale = false;
};

using Report = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

void emit_report(const Report& report, const std::filesystem::path& file_or_empty) {
  std::string text;
  for (const auto& [key, value] : report) text += key + " = " + value + "\n";
  std::fputs(text.c_str(), stdout);
  if (!file_or_empty.empty()) {
    std::FILE* out = std::fopen(file_or_empty.c_str(), "w");
    if (!out)
      throw std::runtime_error("cannot open " + file_or_empty.string() + " for writing");
    std::fputs(text.c_str(), out);
    if (std::fclose(out) != 0)
      throw std::runtime_error("short write to " + file_or_empty.string());
  }
}

tdse::ExperimentConfig load_with_overrides(const CommonOptions& options) {
  tdse::ExperimentConfig config = tdse::load_config(options.config_path);
  if (options.seed_given) config.seed = options.seed;
  if (!options.out_dir.empty()) config.output_dir = options.out_dir;
  if (options.desk_scale) tdse::apply_desk_scale(config);
  config.validate();
  return config;
}

void check_checkpoint_matches(const tdse::NetworkConfig& checkpoint,
                              const tdse::NetworkConfig& wanted) {
  if (checkpoint.input_width != wanted.input_width ||
      checkpoint.hidden_layers != wanted.hidden_layers ||
      checkpoint.hidden_width != wanted.hidden_width ||
      checkpoint.activation != wanted.activation)
    throw std::runtime_error(
        "checkpoint/config mismatch: checkpoint network is " +
        std::to_string(checkpoint.input_width) + "->" +
        std::to_string(checkpoint.hidden_layers) + "x" +
        std::to_string(checkpoint.hidden_width) + " " + to_string(checkpoint.activation) +
        ", config wants " + std::to_string(wanted.input_width) + "->" +
        std::to_string(wanted.hidden_layers) + "x" + std::to_string(wanted.hidden_width) + " " +
        to_string(wanted.activation));
}

/// Evaluation shared by train (final report) and eval: full-grid report,
/// per-time curve, frequency sweep for conditioned models.
void write_evaluation(const tdse::NetworkParams& params, const tdse::ExperimentConfig& config,
                      Report& report) {
  const tdse::EvaluationReport eval = tdse::evaluate_grid(params, config.state, config.domain,
                                                          config.eval_dx, config.eval_dt);
  report.emplace_back("grid_nx", std::to_string(eval.nx));
  report.emplace_back("grid_nt", std::to_string(eval.nt));
  report.emplace_back("eval_dx", fmt(eval.dx));
  report.emplace_back("eval_dt", fmt(eval.dt));
  report.emplace_back("global_mse", fmt(eval.global_mse));
  report.emplace_back("wall_time_inference_s", fmt(eval.wall_time_inference));

  if (config.output_dir.empty()) return;
  std::filesystem::create_directories(config.output_dir);
  tdse::save_per_time_csv(eval, config.domain, config.output_dir / "per_time_mse.csv");
  if (params.config.input_width == 3) {
    const auto omegas = tdse::default_sweep_omegas();
    const auto sweep = tdse::omega_sweep(params, config.state.m, config.state.n, omegas,
                                         config.domain, config.eval_dx, config.eval_dt);
    tdse::save_sweep_csv(sweep, config.output_dir / "omega_sweep.csv");
  }
}

int cmd_train(const CommonOptions& options) {
  tdse::ExperimentConfig config = load_with_overrides(options);

  tdse::TrainResult result;
  if (!options.checkpoint_path.empty()) {
    const tdse::NetworkParams start = tdse::load_checkpoint(options.checkpoint_path);
    check_checkpoint_matches(start.config, config.network);
    result = tdse::train(config, start);
  } else {
    result = tdse::train(config);
  }

  if (result.halted) {
    std::cerr << "error: training halted: " << result.halt_reason << "\n";
    return kExitHalted;
  }

  Report report;
  report.emplace_back("experiment", to_string(config.kind));
  report.emplace_back("steps", std::to_string(result.steps));
  report.emplace_back("converged", result.converged ? "true" : "false");
  if (!result.log.empty()) {
    report.emplace_back("final_loss", fmt(result.log.back().total));
    report.emplace_back("final_lr", fmt(result.log.back().lr));
  }
  write_evaluation(result.params, config, report);
  emit_report(report,
              config.output_dir.empty() ? std::filesystem::path{}
                                        : config.output_dir / "report.txt");
  return kExitOk;
}

int cmd_eval(const CommonOptions& options) {
  tdse::ExperimentConfig config = load_with_overrides(options);
  const tdse::NetworkParams params = tdse::load_checkpoint(options.checkpoint_path);
  check_checkpoint_matches(params.config, config.network);

  Report report;
  report.emplace_back("experiment", to_string(config.kind));
  report.emplace_back("checkpoint", options.checkpoint_path);
  write_evaluation(params, config, report);

  if (!config.output_dir.empty()) {
    const tdse::WaveField predicted = tdse::predicted_wavefield(
        params, config.state, config.domain, config.eval_dx, config.eval_dt);
    tdse::save_wavefield_binary(predicted, config.output_dir / "predicted.wave");
    tdse::save_wavefield_csv(predicted, config.output_dir / "predicted.csv");
  }
  emit_report(report,
              config.output_dir.empty() ? std::filesystem::path{}
                                        : config.output_dir / "report.txt");
  return kExitOk;
}

int cmd_oracle(const CommonOptions& options) {
  tdse::ExperimentConfig config = load_with_overrides(options);
  const tdse::OscillatorState& state = config.state;
  const tdse::Domain& domain = config.domain;

  const tdse::WaveField analytic =
      tdse::analytic_wavefield(state, domain, config.eval_dx, config.eval_dt);

  // the implicit scheme wants both walls on-grid, so it runs on its own
  // slightly adjusted spacing
  const int cn_nx = tdse::crank_nicolson_nx(domain, config.eval_dx);
  const double cn_dx = domain.x_length() / (cn_nx - 1);
  std::vector<double> initial_u(static_cast<std::size_t>(cn_nx));
  std::vector<double> initial_v(static_cast<std::size_t>(cn_nx));
  for (int i = 0; i < cn_nx; ++i) {
    const auto [u, v] = tdse::superposition(state, domain.x_min + i * cn_dx, domain.t_min);
    initial_u[static_cast<std::size_t>(i)] = u;
    initial_v[static_cast<std::size_t>(i)] = v;
  }
  const tdse::WaveField numeric = tdse::crank_nicolson_evolve(initial_u, initial_v, state.omega,
                                                              domain, config.eval_dx,
                                                              config.eval_dt);
  const tdse::WaveField analytic_on_cn = tdse::analytic_wavefield_grid(
      state, numeric.x0, numeric.dx, numeric.nx, numeric.t0, numeric.dt, numeric.nt);

  const double mse = tdse::density_mse(numeric, analytic_on_cn);
  const auto norms = tdse::frame_norms(numeric);
  double norm_drift = 0.0;
  for (std::size_t i = 1; i < norms.size(); ++i)
    norm_drift = std::max(norm_drift, std::abs(norms[i] - norms[i - 1]));

  Report report;
  report.emplace_back("experiment", to_string(config.kind));
  report.emplace_back("analytic_nx", std::to_string(analytic.nx));
  report.emplace_back("analytic_nt", std::to_string(analytic.nt));
  report.emplace_back("cn_nx", std::to_string(numeric.nx));
  report.emplace_back("cn_nt", std::to_string(numeric.nt));
  report.emplace_back("analytic_vs_cn_mse", fmt(mse));
  report.emplace_back("cn_norm_step_drift", fmt(norm_drift));

  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    tdse::save_wavefield_binary(analytic, config.output_dir / "analytic.wave");
    tdse::save_wavefield_csv(analytic, config.output_dir / "analytic.csv");
    tdse::save_wavefield_binary(numeric, config.output_dir / "crank_nicolson.wave");
    tdse::save_wavefield_csv(numeric, config.output_dir / "crank_nicolson.csv");
  }
  emit_report(report,
              config.output_dir.empty() ? std::filesystem::path{}
                                        : config.output_dir / "oracle_report.txt");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed neural solver for the 1D harmonic-oscillator Schrodinger equation"};
  app.require_subcommand(1);

  CommonOptions options;
  auto add_common = [&](CLI::App* cmd, bool with_checkpoint, bool checkpoint_required) {
    cmd->add_option("--config", options.config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_checkpoint) {
      auto* opt = cmd->add_option("--checkpoint", options.checkpoint_path,
                                  "network checkpoint file");
      if (checkpoint_required) opt->required()->check(CLI::ExistingFile);
    }
    cmd->add_option("--out", options.out_dir, "output directory (overrides the config)");
    cmd->add_option("--seed", options.seed, "seed override");
    cmd->add_flag("--desk-scale", options.desk_scale,
                  "shrink network and batches to workstation scale");
  };

  auto* train_cmd = app.add_subcommand("train", "train a solver network");
  add_common(train_cmd, true, false);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the analytical grid");
  add_common(eval_cmd, true, true);
  auto* oracle_cmd =
      app.add_subcommand("oracle", "write analytical and finite-difference reference fields");
  add_common(oracle_cmd, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  options.seed_given = train_cmd->count("--seed") + eval_cmd->count("--seed") +
                           oracle_cmd->count("--seed") >
                       0;

  try {
    if (train_cmd->parsed()) return cmd_train(options);
    if (eval_cmd->parsed()) return cmd_eval(options);
    if (oracle_cmd->parsed()) return cmd_oracle(options);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
