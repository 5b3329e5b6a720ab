#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tdse {

/// Activation kinds. Both are smooth enough for second-order PDE residuals.
enum class Activation : std::uint32_t { Tanh = 0, Silu = 1 };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation kind);

/// A network input point. `omega` is fed to the network only when the
/// configured input width is 3; it always travels with the point so that
/// residual terms know the oscillator frequency.
struct Point {
  double x = 0.0;
  double t = 0.0;
  double omega = 1.0;
};

struct NetworkConfig {
  int input_width = 2;  // 2 = (x,t), 3 = (x,t,omega)
  int hidden_layers = 6;
  int hidden_width = 512;
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/**
 * Fully-connected surrogate parameters: hidden_layers affine+activation
 * stages followed by an affine output layer of width 2 (u, v).
 *
 * Canonical flattening order (used by checkpoints, gradients and Adam
 * state): layer by layer, weight matrix row-major, then bias.
 */
struct NetworkParams {
  NetworkConfig config;
  std::vector<Eigen::MatrixXd> weights;  // rows = outputs, cols = inputs
  std::vector<Eigen::VectorXd> biases;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

/// Glorot-uniform weights, zero biases, deterministic under config.seed.
NetworkParams init_network(const NetworkConfig& config);

/// Single-point forward pass, returns (u, v).
std::pair<double, double> forward(const NetworkParams& params, const Point& point);

/// Batched forward pass. `inputs` is input_width x B; returns 2 x B with
/// u in row 0 and v in row 1.
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Packs points into an input_width x B matrix, validating the arity.
Eigen::MatrixXd input_matrix(const NetworkConfig& config, std::span<const Point> points);

struct ActivationDerivatives {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

/// sigma(z), sigma'(z), sigma''(z); analytically exact and saturation-safe.
ActivationDerivatives activation_value_and_derivatives(Activation kind, double z);

/// Third derivative, needed when differentiating losses that contain u_xx.
double activation_third_derivative(Activation kind, double z);

namespace detail {

/// The one transcendental per unit: tanh(z) for Tanh, logistic sigmoid for
/// Silu. All derivative orders are polynomial in (z, primitive).
Eigen::ArrayXXd activation_primitive(Activation kind, const Eigen::ArrayXXd& z);

/// Recovers sigma and derivative orders 1..3 from z and the cached
/// primitive. Null outputs are skipped.
void activation_orders(Activation kind, const Eigen::ArrayXXd& z, const Eigen::ArrayXXd& primitive,
                       Eigen::ArrayXXd* s0, Eigen::ArrayXXd* s1, Eigen::ArrayXXd* s2,
                       Eigen::ArrayXXd* s3);

}  // namespace detail

// Checkpoint file layout, little-endian: magic "TDSEPINN", u32 format
// version, u32 input_width, u32 hidden_layers, u32 hidden_width,
// u32 activation, u64 seed, u64 parameter count, f64 parameters in
// canonical flattening order.
inline constexpr char kCheckpointMagic[8] = {'T', 'D', 'S', 'E', 'P', 'I', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Atomic save (write to temp file, then rename).
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);

/// Throws std::runtime_error with a "bad checkpoint" diagnostic on
/// malformed files.
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace tdse
