#include "tdse/physics.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tdse {

void OscillatorState::validate() const {
  if (m < 0 || n < 0) throw std::invalid_argument("state indices must be non-negative");
  if (m == n)
    throw std::invalid_argument("state requires two distinct eigenstates, got m = n = " +
                                std::to_string(m));
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
}

void Domain::validate() const {
  if (!(x_min < x_max)) throw std::invalid_argument("domain requires x_min < x_max");
  if (!(t_min < t_max)) throw std::invalid_argument("domain requires t_min < t_max");
}

int grid_count(double length, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  return static_cast<int>(std::floor(length / delta + 1e-9));
}

double hermite(int n, double y) {
  if (n < 0) throw std::out_of_range("Hermite index must be non-negative");
  if (n > 30) throw std::out_of_range("Hermite index " + std::to_string(n) + " exceeds 30");
  if (n == 0) return 1.0;
  double h_prev = 1.0;
  double h = 2.0 * y;
  for (int k = 1; k < n; ++k) {
    const double h_next = 2.0 * y * h - 2.0 * k * h_prev;
    h_prev = h;
    h = h_next;
  }
  return h;
}

double eigenstate(int n, double omega, double x) {
  // (omega/pi)^{1/4} e^{-omega x^2/2} (2^n n!)^{-1/2} H_n(sqrt(omega) x),
  // normalization folded into one exp for large n
  const double y = std::sqrt(omega) * x;
  const double log_norm =
      0.25 * std::log(omega / std::numbers::pi) -
      0.5 * (n * std::numbers::ln2 + std::lgamma(static_cast<double>(n) + 1.0));
  return std::exp(log_norm - 0.5 * omega * x * x) * hermite(n, y);
}

double eigenvalue(int n, double omega) { return omega * (n + 0.5); }

std::pair<double, double> superposition(const OscillatorState& state, double x, double t) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  double u = 0.0, v = 0.0;
  for (const int k : {state.m, state.n}) {
    const double phase = eigenvalue(k, state.omega) * t;
    const double phi = eigenstate(k, state.omega, x);
    u += std::cos(phase) * phi;
    v -= std::sin(phase) * phi;
  }
  return {u * inv_sqrt2, v * inv_sqrt2};
}

DerivativeBundle superposition_bundle(const OscillatorState& state, double x, double t) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  DerivativeBundle b;
  for (const int k : {state.m, state.n}) {
    const double eps = eigenvalue(k, state.omega);
    const double phi = eigenstate(k, state.omega, x);
    const double phi_xx = (state.omega * state.omega * x * x - 2.0 * eps) * phi;
    const double c = std::cos(eps * t), s = std::sin(eps * t);
    b.u += c * phi * inv_sqrt2;
    b.v -= s * phi * inv_sqrt2;
    b.u_t -= eps * s * phi * inv_sqrt2;
    b.v_t -= eps * c * phi * inv_sqrt2;
    b.u_xx += c * phi_xx * inv_sqrt2;
    b.v_xx -= s * phi_xx * inv_sqrt2;
  }
  return b;
}

WaveField analytic_wavefield_grid(const OscillatorState& state, double x0, double dx, int nx,
                                  double t0, double dt, int nt) {
  state.validate();
  WaveField field;
  field.nx = nx;
  field.nt = nt;
  field.x0 = x0;
  field.t0 = t0;
  field.dx = dx;
  field.dt = dt;
  const std::size_t total = static_cast<std::size_t>(nx) * static_cast<std::size_t>(nt);
  field.u.resize(total);
  field.v.resize(total);
  field.density.resize(total);
  for (int it = 0; it < nt; ++it) {
    const double t = field.t_at(it);
    for (int ix = 0; ix < nx; ++ix) {
      const auto [u, v] = superposition(state, field.x_at(ix), t);
      const std::size_t idx = field.index(it, ix);
      field.u[idx] = u;
      field.v[idx] = v;
      field.density[idx] = u * u + v * v;
    }
  }
  return field;
}

WaveField analytic_wavefield(const OscillatorState& state, const Domain& domain, double dx,
                             double dt) {
  domain.validate();
  return analytic_wavefield_grid(state, domain.x_min, dx, grid_count(domain.x_length(), dx),
                                 domain.t_min, dt, grid_count(domain.t_length(), dt));
}

double density_mse(const WaveField& a, const WaveField& b) {
  if (a.nx != b.nx || a.nt != b.nt)
    throw std::invalid_argument("wave fields live on different grids");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.density.size(); ++i) {
    const double d = a.density[i] - b.density[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.density.size());
}

std::vector<double> frame_norms(const WaveField& field) {
  std::vector<double> norms(static_cast<std::size_t>(field.nt), 0.0);
  for (int it = 0; it < field.nt; ++it) {
    double acc = 0.0;
    for (int ix = 0; ix < field.nx; ++ix) {
      const double w = (ix == 0 || ix == field.nx - 1) ? 0.5 : 1.0;
      acc += w * field.density[field.index(it, ix)];
    }
    norms[static_cast<std::size_t>(it)] = acc * field.dx;
  }
  return norms;
}

int crank_nicolson_nx(const Domain& domain, double dx) {
  if (!(dx > 0.0)) throw std::invalid_argument("dx must be positive");
  const int intervals = static_cast<int>(std::lround(domain.x_length() / dx));
  if (intervals < 2) throw std::invalid_argument("dx too coarse for the domain");
  return intervals + 1;
}

WaveField crank_nicolson_evolve(const std::vector<double>& initial_u,
                                const std::vector<double>& initial_v, double omega,
                                const Domain& domain, double dx, double dt) {
  domain.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const int nx = crank_nicolson_nx(domain, dx);
  const double h = domain.x_length() / (nx - 1);  // wall-exact spacing
  if (initial_u.size() != static_cast<std::size_t>(nx) ||
      initial_v.size() != static_cast<std::size_t>(nx))
    throw std::invalid_argument("initial condition has " + std::to_string(initial_u.size()) +
                                " samples, expected " + std::to_string(nx));
  const int nt = grid_count(domain.t_length(), dt);

  using cplx = std::complex<double>;
  const cplx im(0.0, 1.0);

  // H = -(1/2) D2 + V: tridiagonal, off-diagonal -1/(2h^2)
  const double off_h = -0.5 / (h * h);
  const int interior = nx - 2;
  std::vector<double> diag_h(static_cast<std::size_t>(interior));
  for (int i = 0; i < interior; ++i) {
    const double x = domain.x_min + (i + 1) * h;
    diag_h[static_cast<std::size_t>(i)] = 1.0 / (h * h) + 0.5 * omega * omega * x * x;
  }

  // A psi^{n+1} = B psi^n with A = I + i dt H / 2, B = I - i dt H / 2
  const cplx a_off = im * (0.5 * dt) * off_h;
  const cplx b_off = -a_off;
  std::vector<cplx> a_diag(static_cast<std::size_t>(interior));
  std::vector<cplx> b_diag(static_cast<std::size_t>(interior));
  for (int i = 0; i < interior; ++i) {
    const cplx half = im * (0.5 * dt) * diag_h[static_cast<std::size_t>(i)];
    a_diag[static_cast<std::size_t>(i)] = 1.0 + half;
    b_diag[static_cast<std::size_t>(i)] = 1.0 - half;
  }

  // Thomas factorization of the constant matrix A
  std::vector<cplx> denom(static_cast<std::size_t>(interior));
  std::vector<cplx> upper(static_cast<std::size_t>(interior));
  {
    cplx d = a_diag[0];
    for (int i = 0; i < interior; ++i) {
      if (std::abs(d) < 1e-300)
        throw std::runtime_error("singular tridiagonal solve in Crank-Nicolson step");
      denom[static_cast<std::size_t>(i)] = d;
      if (i + 1 < interior) {
        const cplx w = a_off / d;
        upper[static_cast<std::size_t>(i)] = w;
        d = a_diag[static_cast<std::size_t>(i + 1)] - w * a_off;
      }
    }
  }

  std::vector<cplx> psi(static_cast<std::size_t>(interior));
  for (int i = 0; i < interior; ++i)
    psi[static_cast<std::size_t>(i)] =
        cplx(initial_u[static_cast<std::size_t>(i + 1)], initial_v[static_cast<std::size_t>(i + 1)]);

  WaveField field;
  field.nx = nx;
  field.nt = nt;
  field.x0 = domain.x_min;
  field.t0 = domain.t_min;
  field.dx = h;
  field.dt = dt;
  const std::size_t total = static_cast<std::size_t>(nx) * static_cast<std::size_t>(nt);
  field.u.assign(total, 0.0);
  field.v.assign(total, 0.0);
  field.density.assign(total, 0.0);

  auto record = [&](int it) {
    for (int i = 0; i < interior; ++i) {
      const cplx p = psi[static_cast<std::size_t>(i)];
      const std::size_t idx = field.index(it, i + 1);
      field.u[idx] = p.real();
      field.v[idx] = p.imag();
      field.density[idx] = std::norm(p);
    }
  };
  record(0);

  std::vector<cplx> rhs(static_cast<std::size_t>(interior));
  for (int step = 1; step < nt; ++step) {
    for (int i = 0; i < interior; ++i) {
      cplx r = b_diag[static_cast<std::size_t>(i)] * psi[static_cast<std::size_t>(i)];
      if (i > 0) r += b_off * psi[static_cast<std::size_t>(i - 1)];
      if (i + 1 < interior) r += b_off * psi[static_cast<std::size_t>(i + 1)];
      rhs[static_cast<std::size_t>(i)] = r;
    }
    // forward elimination / back substitution with the cached factors
    for (int i = 1; i < interior; ++i)
      rhs[static_cast<std::size_t>(i)] -= upper[static_cast<std::size_t>(i - 1)] *
                                          rhs[static_cast<std::size_t>(i - 1)];
    psi[static_cast<std::size_t>(interior - 1)] =
        rhs[static_cast<std::size_t>(interior - 1)] / denom[static_cast<std::size_t>(interior - 1)];
    for (int i = interior - 2; i >= 0; --i)
      psi[static_cast<std::size_t>(i)] =
          (rhs[static_cast<std::size_t>(i)] - a_off * psi[static_cast<std::size_t>(i + 1)]) /
          denom[static_cast<std::size_t>(i)];
    record(step);
  }
  return field;
}

void save_wavefield_csv(const WaveField& field, const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::fputs("x,t,u,v,density\n", out);
  for (int it = 0; it < field.nt; ++it) {
    const double t = field.t_at(it);
    for (int ix = 0; ix < field.nx; ++ix) {
      const std::size_t idx = field.index(it, ix);
      std::fprintf(out, "%.15g,%.15g,%.15g,%.15g,%.15g\n", field.x_at(ix), t, field.u[idx],
                   field.v[idx], field.density[idx]);
    }
  }
  if (std::fclose(out) != 0) throw std::runtime_error("short write to " + path.string());
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

void write_doubles(std::ofstream& out, const std::vector<double>& data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
}

}  // namespace

void save_wavefield_binary(const WaveField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kWaveFieldMagic, sizeof(kWaveFieldMagic));
  write_raw(out, std::uint32_t{1});
  write_raw(out, static_cast<std::uint64_t>(field.nx));
  write_raw(out, static_cast<std::uint64_t>(field.nt));
  write_raw(out, field.x0);
  write_raw(out, field.dx);
  write_raw(out, field.t0);
  write_raw(out, field.dt);
  write_doubles(out, field.u);
  write_doubles(out, field.v);
  write_doubles(out, field.density);
  if (!out) throw std::runtime_error("short write to " + path.string());
}

WaveField load_wavefield_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kWaveFieldMagic, sizeof(magic)) != 0)
    throw std::runtime_error("bad wave field file: magic mismatch in " + path.string());
  const auto version = read_raw<std::uint32_t>(in);
  if (version != 1)
    throw std::runtime_error("bad wave field file: unsupported version " +
                             std::to_string(version));
  WaveField field;
  field.nx = static_cast<int>(read_raw<std::uint64_t>(in));
  field.nt = static_cast<int>(read_raw<std::uint64_t>(in));
  field.x0 = read_raw<double>(in);
  field.dx = read_raw<double>(in);
  field.t0 = read_raw<double>(in);
  field.dt = read_raw<double>(in);
  const std::size_t total = static_cast<std::size_t>(field.nx) * static_cast<std::size_t>(field.nt);
  field.u.resize(total);
  field.v.resize(total);
  field.density.resize(total);
  auto read_block = [&](std::vector<double>& data) {
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  };
  read_block(field.u);
  read_block(field.v);
  read_block(field.density);
  if (!in) throw std::runtime_error("bad wave field file: truncated " + path.string());
  return field;
}

}  // namespace tdse
