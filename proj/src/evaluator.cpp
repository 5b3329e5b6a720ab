#include "tdse/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace tdse {

namespace {

using Clock = std::chrono::steady_clock;

void check_grid(int nx, int nt, std::size_t memory_cap) {
  if (nx < 1 || nt < 1) throw std::invalid_argument("evaluation grid is empty");
  const std::size_t field_bytes =
      3u * sizeof(double) * static_cast<std::size_t>(nx) * static_cast<std::size_t>(nt);
  if (field_bytes > memory_cap)
    throw std::invalid_argument("evaluation grid needs " + std::to_string(field_bytes) +
                                " bytes, above the cap of " + std::to_string(memory_cap));
}

/// Shared row-by-row comparison against the analytical density.
/// `predict_row(t, uv)` fills a 2 x nx matrix; only its time is counted as
/// inference.
template <typename RowFn>
EvaluationReport grid_report(const OscillatorState& state, const Domain& domain, double dx,
                             double dt, std::size_t memory_cap, RowFn&& predict_row) {
  state.validate();
  domain.validate();
  const int nx = grid_count(domain.x_length(), dx);
  const int nt = grid_count(domain.t_length(), dt);
  check_grid(nx, nt, memory_cap);

  EvaluationReport report;
  report.nx = nx;
  report.nt = nt;
  report.dx = dx;
  report.dt = dt;
  report.per_time_mse.resize(static_cast<std::size_t>(nt));

  Eigen::MatrixXd uv(2, nx);
  double seconds = 0.0;
  double global = 0.0;
  for (int it = 0; it < nt; ++it) {
    const double t = domain.t_min + it * dt;
    const auto begin = Clock::now();
    predict_row(t, uv);
    seconds += std::chrono::duration<double>(Clock::now() - begin).count();

    double row = 0.0;
    for (int ix = 0; ix < nx; ++ix) {
      const double x = domain.x_min + ix * dx;
      const auto [u_ref, v_ref] = superposition(state, x, t);
      const double predicted = uv(0, ix) * uv(0, ix) + uv(1, ix) * uv(1, ix);
      const double diff = predicted - (u_ref * u_ref + v_ref * v_ref);
      row += diff * diff;
    }
    row /= static_cast<double>(nx);
    report.per_time_mse[static_cast<std::size_t>(it)] = row;
    global += row;
  }
  report.global_mse = global / static_cast<double>(nt);
  report.wall_time_inference = seconds;
  return report;
}

}  // namespace

EvaluationReport evaluate_grid(const NetworkParams& params, const OscillatorState& state,
                               const Domain& domain, double dx, double dt,
                               std::size_t memory_cap) {
  params.config.validate();
  const int nx = grid_count(domain.x_length(), dx);
  std::vector<Point> row(static_cast<std::size_t>(std::max(nx, 1)));
  for (int ix = 0; ix < nx; ++ix) {
    row[static_cast<std::size_t>(ix)].x = domain.x_min + ix * dx;
    row[static_cast<std::size_t>(ix)].omega = state.omega;
  }
  return grid_report(state, domain, dx, dt, memory_cap, [&](double t, Eigen::MatrixXd& uv) {
    for (Point& p : row) p.t = t;
    uv = forward_batch(params, input_matrix(params.config, row));
  });
}

EvaluationReport evaluate_field(const FieldFunction& field, const OscillatorState& state,
                                const Domain& domain, double dx, double dt,
                                std::size_t memory_cap) {
  if (!field) throw std::invalid_argument("field function is empty");
  return grid_report(state, domain, dx, dt, memory_cap, [&](double t, Eigen::MatrixXd& uv) {
    for (int ix = 0; ix < uv.cols(); ++ix) {
      const auto [u, v] = field(domain.x_min + ix * dx, t, state.omega);
      uv(0, ix) = u;
      uv(1, ix) = v;
    }
  });
}

WaveField predicted_wavefield(const NetworkParams& params, const OscillatorState& state,
                              const Domain& domain, double dx, double dt,
                              std::size_t memory_cap) {
  params.config.validate();
  state.validate();
  domain.validate();
  const int nx = grid_count(domain.x_length(), dx);
  const int nt = grid_count(domain.t_length(), dt);
  check_grid(nx, nt, memory_cap);

  WaveField field;
  field.nx = nx;
  field.nt = nt;
  field.x0 = domain.x_min;
  field.t0 = domain.t_min;
  field.dx = dx;
  field.dt = dt;
  const std::size_t total = static_cast<std::size_t>(nx) * static_cast<std::size_t>(nt);
  field.u.resize(total);
  field.v.resize(total);
  field.density.resize(total);

  std::vector<Point> row(static_cast<std::size_t>(nx));
  for (int ix = 0; ix < nx; ++ix) {
    row[static_cast<std::size_t>(ix)].x = field.x_at(ix);
    row[static_cast<std::size_t>(ix)].omega = state.omega;
  }
  for (int it = 0; it < nt; ++it) {
    for (Point& p : row) p.t = field.t_at(it);
    const Eigen::MatrixXd uv = forward_batch(params, input_matrix(params.config, row));
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t idx = field.index(it, ix);
      field.u[idx] = uv(0, ix);
      field.v[idx] = uv(1, ix);
      field.density[idx] = uv(0, ix) * uv(0, ix) + uv(1, ix) * uv(1, ix);
    }
  }
  return field;
}

std::vector<OmegaSweepPoint> omega_sweep(const NetworkParams& params, int m, int n,
                                         std::span<const double> omegas, const Domain& domain,
                                         double dx, double dt, std::size_t memory_cap) {
  if (params.config.input_width != 3)
    throw std::invalid_argument(
        "frequency sweep needs a frequency-conditioned network (input width 3)");
  std::vector<OmegaSweepPoint> sweep;
  sweep.reserve(omegas.size());
  for (const double omega : omegas) {
    const OscillatorState state{m, n, omega};
    const EvaluationReport report = evaluate_grid(params, state, domain, dx, dt, memory_cap);
    const bool in_range =
        omega >= kOmegaTrainLow - 1e-9 && omega <= kOmegaTrainHigh + 1e-9;
    sweep.push_back({omega, report.global_mse, in_range});
  }
  return sweep;
}

std::vector<double> default_sweep_omegas() {
  std::vector<double> omegas;
  omegas.reserve(21);
  for (int k = 0; k <= 20; ++k) omegas.push_back((5.0 + k) / 10.0);
  return omegas;
}

void save_per_time_csv(const EvaluationReport& report, const Domain& domain,
                       const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::fputs("t,mse\n", out);
  for (int it = 0; it < report.nt; ++it)
    std::fprintf(out, "%.15g,%.15g\n", domain.t_min + it * report.dt,
                 report.per_time_mse[static_cast<std::size_t>(it)]);
  if (std::fclose(out) != 0) throw std::runtime_error("short write to " + path.string());
}

void save_sweep_csv(std::span<const OmegaSweepPoint> sweep, const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::fputs("omega,mse,in_range\n", out);
  for (const auto& point : sweep)
    std::fprintf(out, "%.15g,%.15g,%d\n", point.omega, point.mse,
                 point.in_training_range ? 1 : 0);
  if (std::fclose(out) != 0) throw std::runtime_error("short write to " + path.string());
}

}  // namespace tdse
