#include "doctest.h"

#include "tdse/config.hpp"
#include "tdse/trainer.hpp"

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

using namespace tdse;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig config = default_config(ExperimentKind::Baseline);
  config.network.hidden_layers = 1;
  config.network.hidden_width = 8;
  config.sampler.n_interior = 16;
  config.sampler.n_boundary = 8;
  config.sampler.n_initial = 8;
  config.optimizer.max_steps = 3;
  config.checkpoint_interval = 1;
  config.seed = 42;
  config.derive();
  return config;
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("optimizer config validation") {
  CHECK_NOTHROW(OptimizerConfig{}.validate());

  OptimizerConfig config;
  config.beta1 = 1.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = OptimizerConfig{};

  config.eps = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = OptimizerConfig{};

  config.gamma = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = OptimizerConfig{};

  config.decay_steps = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = OptimizerConfig{};

  config.convergence_mse = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("learning rate schedule") {
  OptimizerConfig config;  // alpha0 1e-3, gamma 0.9, decay 2000
  CHECK(lr_at(config, 0) == 0.001);
  CHECK(lr_at(config, 2000) == doctest::Approx(9e-4).epsilon(1e-12));
  CHECK(lr_at(config, 4000) == doctest::Approx(8.1e-4).epsilon(1e-12));
  // the exponent is real-valued, not integer division
  CHECK(lr_at(config, 1000) == doctest::Approx(0.001 * std::sqrt(0.9)).epsilon(1e-12));

  config.gamma = 0.95;
  config.decay_steps = 100;
  CHECK(lr_at(config, 200) == doctest::Approx(0.001 * 0.95 * 0.95).epsilon(1e-12));

  double previous = lr_at(config, 0);
  for (long step = 1; step <= 500; step += 7) {
    const double lr = lr_at(config, step);
    CHECK(lr <= previous);
    previous = lr;
  }
  CHECK_THROWS_AS(lr_at(config, -1), std::invalid_argument);
}

TEST_CASE("first optimizer step by hand") {
  OptimizerConfig config;
  std::vector<double> params{1.0};
  GradientVector grad{1.0};
  AdamState state = AdamState::zeros(1);
  adam_step(params, grad, state, 0.001, config);
  // bias correction makes the first update lr * g / (|g| + eps)
  CHECK(params[0] == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(state.step == 1);
}

TEST_CASE("optimizer matches an independent implementation over several steps") {
  OptimizerConfig config;
  config.beta1 = 0.9;
  config.beta2 = 0.999;

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const std::size_t n = 6;
  std::vector<double> params(n), reference(n);
  for (std::size_t i = 0; i < n; ++i) params[i] = reference[i] = dist(rng);

  AdamState state = AdamState::zeros(n);
  std::vector<double> m(n, 0.0), v(n, 0.0);
  for (int t = 1; t <= 5; ++t) {
    GradientVector grad(n);
    for (double& g : grad) g = dist(rng);
    const double lr = 0.01;
    adam_step(params, grad, state, lr, config);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grad[i];
      v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
      const double m_hat = m[i] / (1.0 - std::pow(0.9, t));
      const double v_hat = v[i] / (1.0 - std::pow(0.999, t));
      reference[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    for (std::size_t i = 0; i < n; ++i)
      CHECK(params[i] == doctest::Approx(reference[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero gradient leaves parameters fixed") {
  OptimizerConfig config;
  std::vector<double> params{0.5, -0.25};
  AdamState state = AdamState::zeros(2);
  adam_step(params, GradientVector{0.0, 0.0}, state, 0.001, config);
  CHECK(params[0] == 0.5);
  CHECK(params[1] == -0.25);
}

TEST_CASE("optimizer rejects bad input") {
  OptimizerConfig config;
  std::vector<double> params{1.0, 2.0};
  AdamState state = AdamState::zeros(2);
  CHECK_THROWS_AS(adam_step(params, GradientVector{1.0}, state, 0.001, config),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      adam_step(params, GradientVector{1.0, std::numeric_limits<double>::quiet_NaN()}, state,
                0.001, config),
      std::runtime_error);
}

TEST_CASE("short training run wires the loop together") {
  ExperimentConfig config = tiny_config();
  const TrainResult result = train(config);
  CHECK(result.steps == 3);
  CHECK_FALSE(result.halted);
  CHECK_FALSE(result.converged);
  REQUIRE(result.log.size() == 3);
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    const TrainLogRow& row = result.log[i];
    CHECK(row.step == static_cast<long>(i));
    CHECK(row.lr == lr_at(config.optimizer, row.step));
    CHECK(std::isfinite(row.total));
    CHECK(row.total >= 0.0);
    CHECK(row.total == doctest::Approx(row.pde + row.boundary + row.initial).epsilon(1e-12));
    CHECK(row.min_causal_weight == 1.0);
  }
}

TEST_CASE("training is deterministic") {
  const ExperimentConfig config = tiny_config();
  const TrainResult a = train(config);
  const TrainResult b = train(config);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].total == b.log[i].total);
    CHECK(a.log[i].pde == b.log[i].pde);
  }
  CHECK(a.params.flatten() == b.params.flatten());
}

TEST_CASE("zero steps returns the untouched initialization") {
  ExperimentConfig config = tiny_config();
  config.optimizer.max_steps = 0;
  const TrainResult result = train(config);
  CHECK(result.steps == 0);
  CHECK(result.log.empty());
  CHECK(result.params.flatten() == init_network(config.network).flatten());
}

TEST_CASE("warm start continues from given parameters") {
  ExperimentConfig config = tiny_config();
  const TrainResult first = train(config);

  config.optimizer.max_steps = 1;
  const TrainResult resumed = train(config, first.params);
  CHECK(resumed.steps == 1);
  CHECK(resumed.params.flatten() != first.params.flatten());

  NetworkParams wrong = init_network(NetworkConfig{2, 2, 4, Activation::Tanh, 1});
  CHECK_THROWS_AS(train(config, wrong), std::invalid_argument);
}

TEST_CASE("training writes checkpoints and a log") {
  const fs::path dir = fresh_dir("tdse-trainer-artifacts");
  ExperimentConfig config = tiny_config();
  config.output_dir = dir;
  const TrainResult result = train(config);

  CHECK(fs::exists(dir / "checkpoint_000001.bin"));
  CHECK(fs::exists(dir / "checkpoint_000002.bin"));
  CHECK(fs::exists(dir / "checkpoint_000003.bin"));
  CHECK(fs::exists(dir / "checkpoint_final.bin"));
  const NetworkParams restored = load_checkpoint(dir / "checkpoint_final.bin");
  CHECK(restored.flatten() == result.params.flatten());

  std::ifstream log(dir / "training_log.csv");
  REQUIRE(log.good());
  std::string line;
  std::getline(log, line);
  CHECK(line == "step,lr,L_f,L_BC,L_IC,total,min_causal_weight");
  int rows = 0;
  while (std::getline(log, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  fs::remove_all(dir);
}

TEST_CASE("non-finite parameters halt training with a diagnostic") {
  ExperimentConfig config = tiny_config();
  NetworkParams poisoned = init_network(config.network);
  poisoned.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  const TrainResult result = train(config, poisoned);
  CHECK(result.halted);
  CHECK(result.steps == 0);
  CHECK(result.halt_reason.find("step 0") != std::string::npos);
  CHECK_FALSE(result.halt_reason.empty());
}

TEST_CASE("a loose convergence threshold stops at the first check") {
  ExperimentConfig config = tiny_config();
  config.optimizer.max_steps = 10;
  config.checkpoint_interval = 2;
  config.optimizer.convergence_mse = 1e9;  // any field passes
  const TrainResult result = train(config);
  CHECK(result.converged);
  CHECK(result.steps == 2);
  CHECK(result.last_convergence_mse >= 0.0);
  CHECK(result.last_convergence_mse <= 1e9);
}

TEST_CASE("standalone log writer") {
  const fs::path path = fs::temp_directory_path() / "tdse-trainer-log.csv";
  std::vector<TrainLogRow> log{{0, 1e-3, 0.5, 0.25, 0.125, 0.875, 1.0}};
  save_training_log(log, path);
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  CHECK(text.find("step,lr,L_f,L_BC,L_IC,total,min_causal_weight") == 0);
  CHECK(text.find("0,0.001") != std::string::npos);
  fs::remove(path);
}
