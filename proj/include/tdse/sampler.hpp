#pragma once

#include "tdse/network.hpp"
#include "tdse/physics.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tdse {

/// Closed frequency interval for conditioned training draws.
struct OmegaRange {
  double low = 0.75;
  double high = 2.0;
};

/**
 * Batch sizes and randomness for the three training point streams. Each
 * stream draws from its own sub-seed, so changing one batch size never
 * perturbs the other streams, and each (seed, stream, step) triple maps to
 * a fixed batch.
 */
struct SamplerConfig {
  int n_interior = 3140;
  int n_boundary = 200;
  int n_initial = 314;
  std::uint64_t seed = 0;
  double omega = 1.0;  ///< stamped on every point when no range is set
  std::optional<OmegaRange> omega_range;

  void validate() const;
};

/// Collocation points: x and t uniform over the open domain.
std::vector<Point> sample_interior(const SamplerConfig& config, const Domain& domain,
                                   std::uint64_t step);

/// Wall points: x alternates between x_min and x_max, t uniform.
std::vector<Point> sample_boundary(const SamplerConfig& config, const Domain& domain,
                                   std::uint64_t step);

/// Initial-slice points: x uniform, t exactly t_min.
std::vector<Point> sample_initial(const SamplerConfig& config, const Domain& domain,
                                  std::uint64_t step);

}  // namespace tdse
