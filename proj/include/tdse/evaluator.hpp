#pragma once

#include "tdse/network.hpp"
#include "tdse/physics.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace tdse {

/// Frequency range the conditioned model is trained on; sweeps flag points
/// inside it as interpolation.
inline constexpr double kOmegaTrainLow = 0.75;
inline constexpr double kOmegaTrainHigh = 2.0;

/// Refuse evaluation grids whose field storage would exceed this many bytes.
inline constexpr std::size_t kEvalMemoryCap = std::size_t{2} << 30;

struct EvaluationReport {
  int nx = 0;
  int nt = 0;
  double dx = 0.0;
  double dt = 0.0;
  double global_mse = 0.0;               ///< mean of per_time_mse
  std::vector<double> per_time_mse;      ///< density MSE across x, one per grid time
  double wall_time_inference = 0.0;      ///< seconds spent in forward passes
};

/// (x, t, omega) -> (u, v); lets tests stand in an oracle for the network.
using FieldFunction = std::function<std::pair<double, double>(double, double, double)>;

/// Density MSE of the network against the analytical solution on the
/// uniform evaluation grid (points at domain minimum + i*delta).
EvaluationReport evaluate_grid(const NetworkParams& params, const OscillatorState& state,
                               const Domain& domain, double dx, double dt,
                               std::size_t memory_cap = kEvalMemoryCap);

/// Same report for an arbitrary field function.
EvaluationReport evaluate_field(const FieldFunction& field, const OscillatorState& state,
                                const Domain& domain, double dx, double dt,
                                std::size_t memory_cap = kEvalMemoryCap);

/// Network prediction materialized on the evaluation grid.
WaveField predicted_wavefield(const NetworkParams& params, const OscillatorState& state,
                              const Domain& domain, double dx, double dt,
                              std::size_t memory_cap = kEvalMemoryCap);

struct OmegaSweepPoint {
  double omega = 0.0;
  double mse = 0.0;
  bool in_training_range = false;
};

/// Re-evaluates a frequency-conditioned model (input width 3) of the (m,n)
/// superposition at each requested frequency.
std::vector<OmegaSweepPoint> omega_sweep(const NetworkParams& params, int m, int n,
                                         std::span<const double> omegas, const Domain& domain,
                                         double dx, double dt,
                                         std::size_t memory_cap = kEvalMemoryCap);

/// 0.5 to 2.5 in steps of 0.1 (21 frequencies).
std::vector<double> default_sweep_omegas();

/// CSV with header "t,mse".
void save_per_time_csv(const EvaluationReport& report, const Domain& domain,
                       const std::filesystem::path& path);

/// CSV with header "omega,mse,in_range".
void save_sweep_csv(std::span<const OmegaSweepPoint> sweep, const std::filesystem::path& path);

}  // namespace tdse
