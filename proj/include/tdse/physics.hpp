#pragma once

#include "tdse/autodiff.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace tdse {

/// Superposition of two distinct oscillator eigenstates at frequency omega
/// (Hartree atomic units throughout).
struct OscillatorState {
  int m = 0;
  int n = 1;
  double omega = 1.0;

  /// Throws std::invalid_argument unless m != n, m,n >= 0 and omega > 0.
  void validate() const;
};

struct Domain {
  double x_min = 0.0;
  double x_max = 1.0;
  double t_min = 0.0;
  double t_max = 1.0;

  void validate() const;
  double x_length() const { return x_max - x_min; }
  double t_length() const { return t_max - t_min; }
};

/// Number of grid points for a span at spacing `delta`: floor(length/delta)
/// with a tiny slack so exact multiples are not lost to rounding. Points sit
/// at origin + i*delta, i = 0..count-1.
int grid_count(double length, double delta);

/// Physicists' Hermite polynomial H_n(y) by recurrence. n <= 30.
double hermite(int n, double y);

/// Harmonic-oscillator eigenstate phi_n(x).
double eigenstate(int n, double omega, double x);

/// eps_n = omega * (n + 1/2).
double eigenvalue(int n, double omega);

/// Real and imaginary parts of [e^{-i eps_m t} phi_m + e^{-i eps_n t} phi_n] / sqrt(2).
std::pair<double, double> superposition(const OscillatorState& state, double x, double t);

/// Closed-form derivative bundle of the superposition; the spatial second
/// derivative comes from the stationary equation
/// phi_n'' = (omega^2 x^2 - 2 eps_n) phi_n, so the bundle annihilates the
/// residual algebraically.
DerivativeBundle superposition_bundle(const OscillatorState& state, double x, double t);

/// Residual of the first-order-form equation split into real and imaginary
/// parts:
///   f_r = -v_t + u_xx / 2 - (omega^2 / 2) x^2 u
///   f_i =  u_t + v_xx / 2 - (omega^2 / 2) x^2 v
/// Exact solutions give (0, 0).
template <typename T>
std::pair<T, T> tdse_residual(const Bundle<T>& b, double omega, double x) {
  const double pot = 0.5 * omega * omega * x * x;
  T f_r = -b.v_t + 0.5 * b.u_xx - pot * b.u;
  T f_i = b.u_t + 0.5 * b.v_xx - pot * b.v;
  return {std::move(f_r), std::move(f_i)};
}

/**
 * Complex wavefunction samples on a uniform grid. Arrays are row-major
 * over t then x: index(it, ix) = it * nx + ix. density = u^2 + v^2.
 */
struct WaveField {
  int nx = 0;
  int nt = 0;
  double x0 = 0.0;
  double t0 = 0.0;
  double dx = 0.0;
  double dt = 0.0;
  std::vector<double> u, v, density;

  std::size_t index(int it, int ix) const {
    return static_cast<std::size_t>(it) * static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(ix);
  }
  double x_at(int ix) const { return x0 + ix * dx; }
  double t_at(int it) const { return t0 + it * dt; }
};

/// Analytical field on an explicit grid.
WaveField analytic_wavefield_grid(const OscillatorState& state, double x0, double dx, int nx,
                                  double t0, double dt, int nt);

/// Analytical field with the evaluation-grid convention (grid_count rule,
/// points at domain minimum + i*delta).
WaveField analytic_wavefield(const OscillatorState& state, const Domain& domain, double dx,
                             double dt);

/// Mean squared difference of the densities; both fields must share a grid.
double density_mse(const WaveField& a, const WaveField& b);

/// Trapezoidal integral of the density over x for every time frame; for a
/// normalized wavefunction each entry is close to 1.
std::vector<double> frame_norms(const WaveField& field);

/**
 * Crank-Nicolson evolution of i dphi/dt = H phi with a central-difference
 * Laplacian and zero Dirichlet walls at both domain edges. The x grid has
 * round(x_length/dx) intervals with both walls on-grid (the spacing is
 * adjusted to land exactly on x_max); frames are recorded at
 * t_min + j*dt, j = 0..grid_count(t_length, dt)-1, frame 0 being the
 * initial condition with the walls forced to zero. The scheme is
 * norm-preserving; each step is one complex tridiagonal (Thomas) solve.
 *
 * `initial_u`, `initial_v` must have one entry per x grid point
 * (round(x_length/dx) + 1 values including the walls).
 */
WaveField crank_nicolson_evolve(const std::vector<double>& initial_u,
                                const std::vector<double>& initial_v, double omega,
                                const Domain& domain, double dx, double dt);

/// Number of x points (walls included) used by crank_nicolson_evolve.
int crank_nicolson_nx(const Domain& domain, double dx);

/// CSV export, header "x,t,u,v,density", rows ordered t-major then x.
void save_wavefield_csv(const WaveField& field, const std::filesystem::path& path);

// Binary layout, little-endian: magic "TDSEWAVE", u32 version, u64 nx,
// u64 nt, f64 x0, dx, t0, dt, then u, v, density arrays (nt*nx f64 each).
inline constexpr char kWaveFieldMagic[8] = {'T', 'D', 'S', 'E', 'W', 'A', 'V', 'E'};

void save_wavefield_binary(const WaveField& field, const std::filesystem::path& path);
WaveField load_wavefield_binary(const std::filesystem::path& path);

}  // namespace tdse
