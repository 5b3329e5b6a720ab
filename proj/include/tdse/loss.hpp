#pragma once

#include "tdse/autodiff.hpp"
#include "tdse/physics.hpp"

#include <span>
#include <utility>
#include <vector>

namespace tdse {

/// Regularization weights of the composite objective.
struct LossWeights {
  double pde = 1.0;
  double boundary = 1.0;
  double initial = 1.0;

  void validate() const;  // non-negative, at least one positive
};

/**
 * Causal time weighting: the time span is split into n_slices equal
 * components and slice i is damped by exp(-epsilon * sum of the residual
 * losses of all earlier slices), so later times only start to matter once
 * earlier times fit.
 */
struct CausalConfig {
  bool enabled = false;
  int n_slices = 20;
  double epsilon = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double pde = 0.0;       ///< causal mode: the weighted slice average
  double boundary = 0.0;
  double initial = 0.0;
  double total = 0.0;
  std::vector<double> slice_pde;       ///< raw per-slice residual losses (causal mode)
  std::vector<double> causal_weights;  ///< slice weights, first always 1 (causal mode)

  double min_causal_weight() const;  ///< 1.0 when not causal
};

/// Mean squared residual modulus over a collocation batch.
double pde_loss(std::span<const DerivativeBundle> bundles, std::span<const Point> points);

/// Index of the time slice containing t; half-open slices, last one closed.
int slice_of(double t, const Domain& domain, int n_slices);

/// Per-slice mean squared residual modulus; slices with no points give 0.
std::vector<double> pde_loss_slices(std::span<const DerivativeBundle> bundles,
                                    std::span<const Point> points, const Domain& domain,
                                    int n_slices);

/// Mean of u^2 + v^2 at wall points (zero Dirichlet target).
double bc_loss(std::span<const std::pair<double, double>> predictions);

/// Mean squared deviation from the initial wavefunction; the target is the
/// eigenstate superposition at each point's own frequency and time.
double ic_loss(std::span<const std::pair<double, double>> predictions,
               std::span<const Point> points, const OscillatorState& state);

/// w[0] = 1, w[i] = exp(-epsilon * sum of slice_losses[0..i-1]).
std::vector<double> causal_weights(std::span<const double> slice_losses, double epsilon);

LossBreakdown composite(double pde, double boundary, double initial, const LossWeights& weights);

/// Weighted combination with causal slice damping; the weights are treated
/// as constants of the current parameters.
LossBreakdown causal_composite(std::span<const double> slice_pde, double boundary, double initial,
                               const LossWeights& weights, const CausalConfig& causal);

/// One training step's point batches.
struct TrainingBatches {
  std::vector<Point> interior;
  std::vector<Point> boundary;
  std::vector<Point> initial;
};

/**
 * Builds the scalar training objective on the builder's tape so its
 * parameter gradient can be pulled out, and fills `breakdown` with the
 * component values of this evaluation. Causal slice weights enter as plain
 * numbers (not differentiated).
 */
Var training_loss(LossBuilder& builder, const TrainingBatches& batches,
                  const OscillatorState& state, const Domain& domain, const LossWeights& weights,
                  const CausalConfig& causal, LossBreakdown& breakdown);

}  // namespace tdse
