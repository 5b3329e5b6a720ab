#pragma once

#include "tdse/network.hpp"

#include <functional>
#include <span>
#include <vector>

namespace tdse {

/// Network outputs and their input-derivatives at one collocation point,
/// generic over the scalar type so residual formulas can be written once
/// for plain doubles and for tape variables.
template <typename T>
struct Bundle {
  T u{};
  T v{};
  T u_t{};
  T v_t{};
  T u_xx{};
  T v_xx{};
};

using DerivativeBundle = Bundle<double>;

/// Flat parameter-gradient, canonical NetworkParams flattening order.
using GradientVector = std::vector<double>;

// ---------------------------------------------------------------------------
// Scalar reverse-mode tape. Only the handful of operations the loss
// expressions need are provided; the heavy lifting (network evaluation and
// its input-derivatives) happens outside the tape in batched form.
// ---------------------------------------------------------------------------

class Tape;

class Var {
 public:
  Var() = default;
  double value() const { return value_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;

  friend Var operator+(const Var& a, const Var& b);
  friend Var operator-(const Var& a, const Var& b);
  friend Var operator*(const Var& a, const Var& b);
  friend Var operator/(const Var& a, const Var& b);
  friend Var operator+(const Var& a, double c);
  friend Var operator+(double c, const Var& a);
  friend Var operator-(const Var& a, double c);
  friend Var operator-(double c, const Var& a);
  friend Var operator*(const Var& a, double c);
  friend Var operator*(double c, const Var& a);
  friend Var operator/(const Var& a, double c);
  friend Var operator-(const Var& a);
  friend Var square(const Var& a);
  friend Var exp(const Var& a);
  friend Var tanh(const Var& a);
  friend Var sqrt(const Var& a);
};

class Tape {
 public:
  Var leaf(double value);
  int size() const { return static_cast<int>(nodes_.size()); }
  double value(int index) const { return values_[static_cast<std::size_t>(index)]; }

  /// Reverse sweep from `root`; returns the adjoint of every node.
  std::vector<double> adjoints(const Var& root) const;

 private:
  friend class Var;
  friend Var operator+(const Var& a, const Var& b);
  friend Var operator-(const Var& a, const Var& b);
  friend Var operator*(const Var& a, const Var& b);
  friend Var operator/(const Var& a, const Var& b);
  friend Var operator+(const Var& a, double c);
  friend Var operator+(double c, const Var& a);
  friend Var operator-(const Var& a, double c);
  friend Var operator-(double c, const Var& a);
  friend Var operator*(const Var& a, double c);
  friend Var operator*(double c, const Var& a);
  friend Var operator/(const Var& a, double c);
  friend Var operator-(const Var& a);
  friend Var square(const Var& a);
  friend Var exp(const Var& a);
  friend Var tanh(const Var& a);
  friend Var sqrt(const Var& a);

  // Each node has at most two parents; constants fold into the partials.
  struct Node {
    int a = -1;
    int b = -1;
    double da = 0.0;
    double db = 0.0;
  };

  int push(double value, int a, double da, int b, double db);

  std::vector<Node> nodes_;
  std::vector<double> values_;
};

/// Sequential left-to-right sum (deterministic reduction order).
Var sum(std::span<const Var> terms, Tape& tape);

// ---------------------------------------------------------------------------
// Differentiation engine
// ---------------------------------------------------------------------------

/// Exact (to floating point) derivatives of the network outputs with
/// respect to the inputs: first order in t, second order in x, parameters
/// held fixed. Throws std::invalid_argument on an empty batch or a
/// params/arity mismatch and std::runtime_error (with the offending point
/// index) if an evaluation turns non-finite.
std::vector<DerivativeBundle> eval_with_input_derivatives(const NetworkParams& params,
                                                          std::span<const Point> points);

/// Handed to loss functionals: records every network application so the
/// reverse pass knows where parameter gradients flow.
class LossBuilder {
 public:
  template <typename T>
  struct UV {
    T u{};
    T v{};
  };

  /// Network applications whose input-derivatives enter the loss.
  std::vector<Bundle<Var>> with_derivatives(std::span<const Point> points);

  /// Plain evaluations (boundary / initial terms).
  std::vector<UV<Var>> values(std::span<const Point> points);

  Tape& tape() { return tape_; }
  const NetworkParams& params() const { return *params_; }

 private:
  friend struct LossGradientRunner;
  explicit LossBuilder(const NetworkParams& params) : params_(&params) {}

  struct Segment {
    std::vector<Point> points;
    int first_leaf = 0;
    bool with_jets = false;
  };

  const NetworkParams* params_;
  Tape tape_;
  std::vector<Segment> segments_;
};

struct LossValueAndGradient {
  double value = 0.0;
  GradientVector gradient;
};

/// Evaluates `loss` and returns its gradient with respect to every network
/// parameter. The functional may mix derivative bundles and plain
/// evaluations; anything composed on the tape is differentiated through.
LossValueAndGradient loss_parameter_gradient(const NetworkParams& params,
                                             const std::function<Var(LossBuilder&)>& loss);

/// Worker count used for batch fan-out: hardware concurrency capped by the
/// TDSE_PINN_THREADS environment variable. Results are independent of the
/// worker count up to floating-point summation order.
int worker_count();

}  // namespace tdse
