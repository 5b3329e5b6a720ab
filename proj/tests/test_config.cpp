#include "doctest.h"

#include "tdse/config.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

using namespace tdse;
namespace fs = std::filesystem;
using doctest::Contains;

TEST_CASE("experiment kind names round trip") {
  for (const auto kind :
       {ExperimentKind::Baseline, ExperimentKind::Generalisability, ExperimentKind::LargeTime,
        ExperimentKind::HighEnergy}) {
    CHECK(kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(kind_from_string("warp_drive"), ConfigError);
}

TEST_CASE("kind defaults") {
  const auto baseline = default_config(ExperimentKind::Baseline);
  CHECK(baseline.state.m == 0);
  CHECK(baseline.state.n == 1);
  CHECK(baseline.state.omega == 1.0);
  CHECK(baseline.domain.x_min == doctest::Approx(-std::numbers::pi));
  CHECK(baseline.domain.t_max == doctest::Approx(2 * std::numbers::pi));
  CHECK(baseline.network.hidden_layers == 6);
  CHECK(baseline.network.hidden_width == 512);
  CHECK(baseline.network.activation == Activation::Tanh);
  CHECK(baseline.network.input_width == 2);
  CHECK(baseline.sampler.n_interior == 3140);
  CHECK(baseline.sampler.n_boundary == 200);
  CHECK(baseline.sampler.n_initial == 314);
  CHECK_FALSE(baseline.causal.enabled);
  CHECK(baseline.optimizer.gamma == 0.9);
  CHECK(baseline.optimizer.decay_steps == 2000);
  CHECK(baseline.optimizer.max_steps == 20000);

  const auto general = default_config(ExperimentKind::Generalisability);
  REQUIRE(general.sampler.omega_range.has_value());
  CHECK(general.sampler.omega_range->low == 0.75);
  CHECK(general.sampler.omega_range->high == 2.0);
  CHECK(general.network.input_width == 3);

  const auto large = default_config(ExperimentKind::LargeTime);
  CHECK(large.domain.t_max == doctest::Approx(6 * std::numbers::pi));
  CHECK(large.causal.enabled);
  CHECK(large.network.activation == Activation::Silu);
  CHECK(large.optimizer.gamma == 0.95);
  CHECK(large.optimizer.decay_steps == 100);
  CHECK(large.state.n == 1);

  const auto high = default_config(ExperimentKind::HighEnergy);
  CHECK(high.state.m == 0);
  CHECK(high.state.n == 3);
  CHECK(high.causal.enabled);
  CHECK(high.domain.t_max == doctest::Approx(2 * std::numbers::pi));
}

TEST_CASE("desk scale shrinks the run") {
  auto config = default_config(ExperimentKind::Baseline);
  apply_desk_scale(config);
  CHECK(config.network.hidden_layers == 4);
  CHECK(config.network.hidden_width == 64);
  CHECK(config.sampler.n_interior == 1024);
  CHECK(config.sampler.n_boundary == 128);
  CHECK(config.sampler.n_initial == 128);
  CHECK(config.optimizer.max_steps == 5000);
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("derive pushes shared wiring into the nested configs") {
  auto config = default_config(ExperimentKind::Baseline);
  config.seed = 77;
  config.state.omega = 1.4;
  config.derive();
  CHECK(config.network.seed == 77);
  CHECK(config.sampler.seed == 77);
  CHECK(config.sampler.omega == 1.4);
  CHECK(config.network.input_width == 2);
}

TEST_CASE("minimal config text picks defaults from the kind") {
  const auto config = parse_config("experiment = large_time\n", "inline");
  CHECK(config.kind == ExperimentKind::LargeTime);
  CHECK(config.causal.enabled);
  CHECK(config.network.activation == Activation::Silu);
}

TEST_CASE("overrides and comments") {
  const std::string text =
      "# run setup\n"
      "experiment = baseline\n"
      "seed = 9  # trailing comment\n"
      "hidden_width = 32\n"
      "max_steps = 17\n"
      "omega = 1.5\n"
      "lambda_ic = 10\n"
      "convergence_mse = 0.005\n";
  const auto config = parse_config(text, "inline");
  CHECK(config.seed == 9);
  CHECK(config.network.hidden_width == 32);
  CHECK(config.optimizer.max_steps == 17);
  CHECK(config.state.omega == 1.5);
  CHECK(config.sampler.omega == 1.5);  // derived
  CHECK(config.loss_weights.initial == 10.0);
  REQUIRE(config.optimizer.convergence_mse.has_value());
  CHECK(*config.optimizer.convergence_mse == 0.005);
}

TEST_CASE("the experiment key wins regardless of position") {
  const auto config = parse_config("hidden_width = 48\nexperiment = baseline\n", "inline");
  CHECK(config.network.hidden_width == 48);
}

TEST_CASE("parse errors carry the source and line") {
  CHECK_THROWS_WITH_AS(parse_config("experiment = baseline\nbogus_key = 1\n", "run.cfg"),
                       Contains("run.cfg:2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("experiment = baseline\nbogus_key = 1\n", "run.cfg"),
                       Contains("unknown key 'bogus_key'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("experiment = baseline\nmax_steps = soon\n", "run.cfg"),
                       Contains("run.cfg:2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("experiment = baseline\nno equals sign\n", "run.cfg"),
                       Contains("expected 'key = value'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("experiment = baseline\nomega =\n", "run.cfg"),
                       Contains("missing value"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("hidden_width = 32\n", "run.cfg"),
                       Contains("missing required key 'experiment'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("experiment = time_travel\n", "run.cfg"),
                       Contains("run.cfg:1"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("experiment = baseline\nseed = -3\n", "run.cfg"),
                       Contains("invalid unsigned integer"), ConfigError);
}

TEST_CASE("frequency range keys must come as a pair") {
  CHECK_THROWS_WITH_AS(
      parse_config("experiment = baseline\nomega_low = 0.75\n", "run.cfg"),
      Contains("omega_low and omega_high must be given together"), ConfigError);
  const auto config = parse_config(
      "experiment = generalisability\nomega_low = 0.8\nomega_high = 1.9\n", "inline");
  REQUIRE(config.sampler.omega_range.has_value());
  CHECK(config.sampler.omega_range->low == 0.8);
  CHECK(config.sampler.omega_range->high == 1.9);
}

TEST_CASE("kind consistency is enforced") {
  CHECK_THROWS_WITH_AS(
      parse_config("experiment = baseline\nomega_low = 0.75\nomega_high = 2\n", "run.cfg"),
      Contains("only valid for the generalisability"), ConfigError);

  auto config = default_config(ExperimentKind::Generalisability);
  config.sampler.omega_range.reset();
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("serialization round trips losslessly") {
  for (const auto kind :
       {ExperimentKind::Baseline, ExperimentKind::Generalisability, ExperimentKind::LargeTime,
        ExperimentKind::HighEnergy}) {
    auto config = default_config(kind);
    config.seed = 123456789;
    config.optimizer.alpha0 = 1.0 / 3.0;  // not representable in short decimal
    config.optimizer.convergence_mse = 5e-3;
    config.output_dir = "/tmp/run-out";
    config.derive();
    const std::string text = serialize_config(config);
    const auto reparsed = parse_config(text, "roundtrip");
    CHECK(serialize_config(reparsed) == text);
    CHECK(reparsed.optimizer.alpha0 == config.optimizer.alpha0);
    CHECK(reparsed.output_dir == config.output_dir);
  }
}

TEST_CASE("none sentinels clear optional fields") {
  const std::string text =
      "experiment = baseline\nconvergence_mse = none\noutput_dir = none\n";
  const auto config = parse_config(text, "inline");
  CHECK_FALSE(config.optimizer.convergence_mse.has_value());
  CHECK(config.output_dir.empty());
}

TEST_CASE("file save and load") {
  const fs::path path = fs::temp_directory_path() / "tdse-config-roundtrip.cfg";
  auto config = default_config(ExperimentKind::HighEnergy);
  config.seed = 5;
  config.derive();
  save_config(config, path);
  const auto loaded = load_config(path);
  CHECK(serialize_config(loaded) == serialize_config(config));
  fs::remove(path);

  CHECK_THROWS_WITH_AS(load_config(fs::temp_directory_path() / "does-not-exist.cfg"),
                       Contains("cannot open"), ConfigError);
}
