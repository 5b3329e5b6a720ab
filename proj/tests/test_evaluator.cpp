#include "doctest.h"

#include "tdse/evaluator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

using namespace tdse;
namespace fs = std::filesystem;

namespace {

const Domain kBaselineDomain{-std::numbers::pi, std::numbers::pi, 0.0, 2 * std::numbers::pi};
const OscillatorState kState{0, 1, 1.0};

FieldFunction exact_field(const OscillatorState& state) {
  return [state](double x, double t, double) { return superposition(state, x, t); };
}

}  // namespace

TEST_CASE("the exact solution scores zero") {
  const auto report =
      evaluate_field(exact_field(kState), kState, kBaselineDomain, 0.05, 0.05);
  CHECK(report.global_mse < 1e-28);
  for (const double mse : report.per_time_mse) CHECK(mse < 1e-27);
}

TEST_CASE("report geometry on the standard grids") {
  const auto report =
      evaluate_field(exact_field(kState), kState, kBaselineDomain, 0.01, 0.01);
  CHECK(report.nx == 628);
  CHECK(report.nt == 628);
  CHECK(report.dx == 0.01);
  CHECK(report.per_time_mse.size() == 628);
  CHECK(report.wall_time_inference >= 0.0);

  Domain long_domain = kBaselineDomain;
  long_domain.t_max = 6 * std::numbers::pi;
  const auto long_report =
      evaluate_field(exact_field(kState), kState, long_domain, 0.01, 0.01);
  CHECK(long_report.nx == 628);
  CHECK(long_report.nt == 1884);
}

TEST_CASE("global error is the mean of the per-time rows") {
  // an offset field gives nonzero, structured errors
  FieldFunction off = [](double x, double t, double) {
    auto [u, v] = superposition(kState, x, t);
    return std::pair{u + 0.05, v};
  };
  const auto report = evaluate_field(off, kState, kBaselineDomain, 0.05, 0.05);
  CHECK(report.global_mse > 0.0);
  double mean = 0.0;
  for (const double mse : report.per_time_mse) mean += mse;
  mean /= static_cast<double>(report.per_time_mse.size());
  CHECK(report.global_mse == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("a zero field scores the mean squared density") {
  FieldFunction zero = [](double, double, double) { return std::pair{0.0, 0.0}; };
  const double dx = 0.02, dt = 0.02;
  const auto report = evaluate_field(zero, kState, kBaselineDomain, dx, dt);

  const WaveField reference = analytic_wavefield(kState, kBaselineDomain, dx, dt);
  double expected = 0.0;
  for (const double d : reference.density) expected += d * d;
  expected /= static_cast<double>(reference.density.size());
  CHECK(report.global_mse == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("network evaluation agrees with the generic field path") {
  const NetworkParams params = init_network(NetworkConfig{2, 2, 8, Activation::Tanh, 33});
  FieldFunction net_field = [&](double x, double t, double omega) {
    return forward(params, Point{x, t, omega});
  };
  const auto direct = evaluate_grid(params, kState, kBaselineDomain, 0.1, 0.1);
  const auto via_field = evaluate_field(net_field, kState, kBaselineDomain, 0.1, 0.1);
  CHECK(direct.global_mse == doctest::Approx(via_field.global_mse).epsilon(1e-13));
}

TEST_CASE("oversized grids are refused up front") {
  CHECK_THROWS_AS(
      evaluate_field(exact_field(kState), kState, kBaselineDomain, 1e-4, 1e-4),
      std::invalid_argument);
  // a cap small enough to refuse even a coarse grid
  CHECK_THROWS_AS(
      evaluate_field(exact_field(kState), kState, kBaselineDomain, 0.1, 0.1, 1024),
      std::invalid_argument);
  CHECK_THROWS_AS(predicted_wavefield(
                      init_network(NetworkConfig{2, 1, 4, Activation::Tanh, 1}), kState,
                      kBaselineDomain, 0.1, 0.1, 1024),
                  std::invalid_argument);
}

TEST_CASE("predicted field matches direct forward passes") {
  const NetworkParams params = init_network(NetworkConfig{2, 2, 6, Activation::Silu, 9});
  const WaveField field = predicted_wavefield(params, kState, kBaselineDomain, 0.5, 0.5);
  CHECK(field.nx == grid_count(kBaselineDomain.x_length(), 0.5));
  CHECK(field.nt == grid_count(kBaselineDomain.t_length(), 0.5));
  for (const int it : {0, 3, field.nt - 1}) {
    for (const int ix : {0, 5, field.nx - 1}) {
      const auto [u, v] = forward(params, Point{field.x_at(ix), field.t_at(it), 1.0});
      const std::size_t idx = field.index(it, ix);
      CHECK(field.u[idx] == u);
      CHECK(field.v[idx] == v);
      CHECK(field.density[idx] == u * u + v * v);
    }
  }
}

TEST_CASE("frequency sweep flags the training range") {
  const auto omegas = default_sweep_omegas();
  REQUIRE(omegas.size() == 21);
  CHECK(omegas.front() == 0.5);
  CHECK(omegas.back() == 2.5);

  const NetworkParams params = init_network(NetworkConfig{3, 1, 6, Activation::Tanh, 4});
  const auto sweep = omega_sweep(params, 0, 1, omegas, kBaselineDomain, 0.25, 0.25);
  REQUIRE(sweep.size() == 21);
  int in_range = 0;
  for (const auto& point : sweep) {
    CHECK(point.mse >= 0.0);
    CHECK(std::isfinite(point.mse));
    const bool expected = point.omega >= 0.75 && point.omega <= 2.0 + 1e-12;
    CHECK(point.in_training_range == expected);
    in_range += point.in_training_range ? 1 : 0;
  }
  CHECK(in_range == 13);  // 0.8 through 2.0

  const NetworkParams flat = init_network(NetworkConfig{2, 1, 6, Activation::Tanh, 4});
  CHECK_THROWS_AS(omega_sweep(flat, 0, 1, omegas, kBaselineDomain, 0.25, 0.25),
                  std::invalid_argument);
}

TEST_CASE("csv writers") {
  const auto report =
      evaluate_field(exact_field(kState), kState, kBaselineDomain, 0.5, 0.5);
  const fs::path per_time = fs::temp_directory_path() / "tdse-eval-per-time.csv";
  save_per_time_csv(report, kBaselineDomain, per_time);
  std::ifstream in(per_time);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,mse");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == report.nt);
  fs::remove(per_time);

  const std::vector<OmegaSweepPoint> sweep{{0.5, 0.1, false}, {1.0, 0.01, true}};
  const fs::path sweep_path = fs::temp_directory_path() / "tdse-eval-sweep.csv";
  save_sweep_csv(sweep, sweep_path);
  std::ifstream sin(sweep_path);
  std::getline(sin, line);
  CHECK(line == "omega,mse,in_range");
  std::getline(sin, line);
  CHECK(line == "0.5,0.1,0");
  std::getline(sin, line);
  CHECK(line == "1,0.01,1");
  fs::remove(sweep_path);
}
