#include "tdse/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdse {

void LossWeights::validate() const {
  if (pde < 0.0 || boundary < 0.0 || initial < 0.0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (pde == 0.0 && boundary == 0.0 && initial == 0.0)
    throw std::invalid_argument("at least one loss weight must be positive");
}

void CausalConfig::validate() const {
  if (enabled && n_slices < 2)
    throw std::invalid_argument("causal weighting needs at least 2 time slices");
  if (n_slices < 1) throw std::invalid_argument("n_slices must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("causal epsilon must be positive");
}

double LossBreakdown::min_causal_weight() const {
  if (causal_weights.empty()) return 1.0;
  return *std::min_element(causal_weights.begin(), causal_weights.end());
}

double pde_loss(std::span<const DerivativeBundle> bundles, std::span<const Point> points) {
  if (bundles.empty()) throw std::invalid_argument("residual loss needs a non-empty batch");
  if (bundles.size() != points.size())
    throw std::invalid_argument("bundle/point count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto [f_r, f_i] = tdse_residual(bundles[i], points[i].omega, points[i].x);
    acc += f_r * f_r + f_i * f_i;
  }
  return acc / static_cast<double>(bundles.size());
}

int slice_of(double t, const Domain& domain, int n_slices) {
  if (n_slices < 1) throw std::invalid_argument("n_slices must be positive");
  const double width = domain.t_length() / n_slices;
  const int raw = static_cast<int>(std::floor((t - domain.t_min) / width));
  return std::clamp(raw, 0, n_slices - 1);
}

std::vector<double> pde_loss_slices(std::span<const DerivativeBundle> bundles,
                                    std::span<const Point> points, const Domain& domain,
                                    int n_slices) {
  if (bundles.size() != points.size())
    throw std::invalid_argument("bundle/point count mismatch");
  std::vector<double> sums(static_cast<std::size_t>(n_slices), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_slices), 0);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto [f_r, f_i] = tdse_residual(bundles[i], points[i].omega, points[i].x);
    const auto s = static_cast<std::size_t>(slice_of(points[i].t, domain, n_slices));
    sums[s] += f_r * f_r + f_i * f_i;
    counts[s] += 1;
  }
  for (std::size_t s = 0; s < sums.size(); ++s)
    if (counts[s] > 0) sums[s] /= static_cast<double>(counts[s]);
  return sums;
}

double bc_loss(std::span<const std::pair<double, double>> predictions) {
  if (predictions.empty()) throw std::invalid_argument("boundary loss needs a non-empty batch");
  double acc = 0.0;
  for (const auto& [u, v] : predictions) acc += u * u + v * v;
  return acc / static_cast<double>(predictions.size());
}

double ic_loss(std::span<const std::pair<double, double>> predictions,
               std::span<const Point> points, const OscillatorState& state) {
  if (predictions.empty()) throw std::invalid_argument("initial loss needs a non-empty batch");
  if (predictions.size() != points.size())
    throw std::invalid_argument("prediction/point count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const OscillatorState target_state{state.m, state.n, points[i].omega};
    const auto [u_t, v_t] = superposition(target_state, points[i].x, points[i].t);
    const double du = predictions[i].first - u_t;
    const double dv = predictions[i].second - v_t;
    acc += du * du + dv * dv;
  }
  return acc / static_cast<double>(predictions.size());
}

std::vector<double> causal_weights(std::span<const double> slice_losses, double epsilon) {
  std::vector<double> weights(slice_losses.size(), 1.0);
  double cumulative = 0.0;
  for (std::size_t i = 1; i < slice_losses.size(); ++i) {
    cumulative += slice_losses[i - 1];
    weights[i] = std::exp(-epsilon * cumulative);
  }
  return weights;
}

LossBreakdown composite(double pde, double boundary, double initial, const LossWeights& weights) {
  weights.validate();
  LossBreakdown breakdown;
  breakdown.pde = pde;
  breakdown.boundary = boundary;
  breakdown.initial = initial;
  breakdown.total =
      weights.pde * pde + weights.boundary * boundary + weights.initial * initial;
  return breakdown;
}

LossBreakdown causal_composite(std::span<const double> slice_pde, double boundary, double initial,
                               const LossWeights& weights, const CausalConfig& causal) {
  weights.validate();
  causal.validate();
  if (slice_pde.size() != static_cast<std::size_t>(causal.n_slices))
    throw std::invalid_argument("got " + std::to_string(slice_pde.size()) +
                                " slice losses for " + std::to_string(causal.n_slices) +
                                " configured slices");
  LossBreakdown breakdown;
  breakdown.slice_pde.assign(slice_pde.begin(), slice_pde.end());
  breakdown.causal_weights = causal_weights(slice_pde, causal.epsilon);
  double acc = 0.0;
  for (std::size_t i = 0; i < slice_pde.size(); ++i)
    acc += breakdown.causal_weights[i] * slice_pde[i];
  breakdown.pde = acc / static_cast<double>(causal.n_slices);
  breakdown.boundary = boundary;
  breakdown.initial = initial;
  breakdown.total = weights.pde * breakdown.pde + weights.boundary * boundary +
                    weights.initial * initial;
  return breakdown;
}

namespace {

Var mean(std::span<const Var> terms, Tape& tape) {
  return sum(terms, tape) / static_cast<double>(terms.size());
}

}  // namespace

Var training_loss(LossBuilder& builder, const TrainingBatches& batches,
                  const OscillatorState& state, const Domain& domain, const LossWeights& weights,
                  const CausalConfig& causal, LossBreakdown& breakdown) {
  weights.validate();
  causal.validate();
  state.validate();
  domain.validate();
  if (batches.interior.empty() || batches.boundary.empty() || batches.initial.empty())
    throw std::invalid_argument("training batches must all be non-empty");

  breakdown = LossBreakdown{};

  // residual term
  const auto jets = builder.with_derivatives(batches.interior);
  std::vector<Var> squares(jets.size());
  for (std::size_t i = 0; i < jets.size(); ++i) {
    const Point& p = batches.interior[i];
    auto [f_r, f_i] = tdse_residual(jets[i], p.omega, p.x);
    squares[i] = square(f_r) + square(f_i);
  }

  Var pde_var;
  if (!causal.enabled) {
    pde_var = mean(squares, builder.tape());
  } else {
    const auto n_slices = static_cast<std::size_t>(causal.n_slices);
    std::vector<std::vector<Var>> per_slice(n_slices);
    for (std::size_t i = 0; i < squares.size(); ++i)
      per_slice[static_cast<std::size_t>(slice_of(batches.interior[i].t, domain,
                                                  causal.n_slices))]
          .push_back(squares[i]);

    std::vector<Var> slice_means(n_slices);  // invalid where the slice is empty
    std::vector<double> slice_values(n_slices, 0.0);
    for (std::size_t s = 0; s < n_slices; ++s) {
      if (per_slice[s].empty()) continue;
      slice_means[s] = mean(per_slice[s], builder.tape());
      slice_values[s] = slice_means[s].value();
    }
    breakdown.slice_pde = slice_values;
    breakdown.causal_weights = causal_weights(slice_values, causal.epsilon);

    std::vector<Var> weighted;
    weighted.reserve(n_slices);
    for (std::size_t s = 0; s < n_slices; ++s)
      if (slice_means[s].valid())
        weighted.push_back(breakdown.causal_weights[s] * slice_means[s]);
    pde_var = sum(weighted, builder.tape()) / static_cast<double>(causal.n_slices);
  }

  // wall term
  const auto wall = builder.values(batches.boundary);
  std::vector<Var> wall_terms(wall.size());
  for (std::size_t i = 0; i < wall.size(); ++i)
    wall_terms[i] = square(wall[i].u) + square(wall[i].v);
  const Var bc_var = mean(wall_terms, builder.tape());

  // initial-slice term
  const auto start = builder.values(batches.initial);
  std::vector<Var> start_terms(start.size());
  for (std::size_t i = 0; i < start.size(); ++i) {
    const Point& p = batches.initial[i];
    const OscillatorState target_state{state.m, state.n, p.omega};
    const auto [u_t, v_t] = superposition(target_state, p.x, p.t);
    start_terms[i] = square(start[i].u - u_t) + square(start[i].v - v_t);
  }
  const Var ic_var = mean(start_terms, builder.tape());

  const Var total =
      weights.pde * pde_var + weights.boundary * bc_var + weights.initial * ic_var;

  breakdown.pde = pde_var.value();
  breakdown.boundary = bc_var.value();
  breakdown.initial = ic_var.value();
  breakdown.total = total.value();
  return total;
}

}  // namespace tdse
