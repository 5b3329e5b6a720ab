#include "tdse/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace tdse {

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "silu") return Activation::Silu;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or silu)");
}

std::string to_string(Activation kind) {
  return kind == Activation::Tanh ? "tanh" : "silu";
}

void NetworkConfig::validate() const {
  if (input_width != 2 && input_width != 3)
    throw std::invalid_argument("input_width must be 2 or 3, got " + std::to_string(input_width));
  if (hidden_layers < 1)
    throw std::invalid_argument("hidden_layers must be >= 1");
  if (hidden_width < 1)
    throw std::invalid_argument("hidden_width must be >= 1");
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  return n;
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    const auto& b = biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) flat.push_back(b(i));
  }
  return flat;
}

void NetworkParams::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("flat parameter array has length " + std::to_string(flat.size()) +
                                ", expected " + std::to_string(parameter_count()));
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    auto& b = biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = flat[k++];
  }
}

NetworkParams init_network(const NetworkConfig& config) {
  config.validate();
  NetworkParams params;
  params.config = config;

  std::vector<int> widths;
  widths.push_back(config.input_width);
  for (int l = 0; l < config.hidden_layers; ++l) widths.push_back(config.hidden_width);
  widths.push_back(2);

  std::mt19937_64 rng(config.seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    // fill in flattening order so the draw sequence matches the layout
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return params;
}

Eigen::MatrixXd input_matrix(const NetworkConfig& config, std::span<const Point> points) {
  Eigen::MatrixXd m(config.input_width, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    m(0, static_cast<Eigen::Index>(i)) = points[i].x;
    m(1, static_cast<Eigen::Index>(i)) = points[i].t;
    if (config.input_width == 3) m(2, static_cast<Eigen::Index>(i)) = points[i].omega;
  }
  return m;
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.config.input_width)
    throw std::invalid_argument("input arity " + std::to_string(inputs.rows()) +
                                " does not match network input width " +
                                std::to_string(params.config.input_width));
  Eigen::MatrixXd a = inputs;
  const std::size_t n_layers = params.weights.size();
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Eigen::MatrixXd z = (params.weights[l] * a).colwise() + params.biases[l];
    Eigen::ArrayXXd p = detail::activation_primitive(params.config.activation, z.array());
    Eigen::ArrayXXd s0;
    detail::activation_orders(params.config.activation, z.array(), p, &s0, nullptr, nullptr,
                              nullptr);
    a = s0.matrix();
  }
  return (params.weights.back() * a).colwise() + params.biases.back();
}

std::pair<double, double> forward(const NetworkParams& params, const Point& point) {
  Eigen::MatrixXd in(params.config.input_width, 1);
  in(0, 0) = point.x;
  in(1, 0) = point.t;
  if (params.config.input_width == 3) in(2, 0) = point.omega;
  Eigen::MatrixXd out = forward_batch(params, in);
  return {out(0, 0), out(1, 0)};
}

namespace {

// Overflow-safe logistic sigmoid.
double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ActivationDerivatives activation_value_and_derivatives(Activation kind, double z) {
  ActivationDerivatives d;
  if (kind == Activation::Tanh) {
    const double s = std::tanh(z);
    d.value = s;
    d.first = 1.0 - s * s;
    d.second = -2.0 * s * d.first;
  } else {
    const double s = logistic(z);
    const double s1 = s * (1.0 - s);
    const double s2 = s1 * (1.0 - 2.0 * s);
    d.value = z * s;
    d.first = s + z * s1;
    d.second = 2.0 * s1 + z * s2;
  }
  return d;
}

double activation_third_derivative(Activation kind, double z) {
  if (kind == Activation::Tanh) {
    const double s = std::tanh(z);
    const double d1 = 1.0 - s * s;
    return -2.0 * d1 * d1 + 4.0 * s * s * d1;
  }
  const double s = logistic(z);
  const double s1 = s * (1.0 - s);
  const double s2 = s1 * (1.0 - 2.0 * s);
  const double s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
  return 3.0 * s2 + z * s3;
}

namespace detail {

Eigen::ArrayXXd activation_primitive(Activation kind, const Eigen::ArrayXXd& z) {
  if (kind == Activation::Tanh) return z.tanh();
  Eigen::ArrayXXd p(z.rows(), z.cols());
  const double* zp = z.data();
  double* pp = p.data();
  const Eigen::Index n = z.size();
  for (Eigen::Index i = 0; i < n; ++i) pp[i] = logistic(zp[i]);
  return p;
}

void activation_orders(Activation kind, const Eigen::ArrayXXd& z, const Eigen::ArrayXXd& primitive,
                       Eigen::ArrayXXd* s0, Eigen::ArrayXXd* s1, Eigen::ArrayXXd* s2,
                       Eigen::ArrayXXd* s3) {
  if (kind == Activation::Tanh) {
    // primitive = tanh(z); every order is polynomial in it
    const Eigen::ArrayXXd d1 = 1.0 - primitive.square();
    if (s0) *s0 = primitive;
    if (s1) *s1 = d1;
    if (s2) *s2 = -2.0 * primitive * d1;
    if (s3) *s3 = -2.0 * d1.square() + 4.0 * primitive.square() * d1;
    return;
  }
  // primitive = logistic sigmoid s(z); silu(z) = z*s(z)
  const Eigen::ArrayXXd& s = primitive;
  const Eigen::ArrayXXd sd1 = s * (1.0 - s);
  const Eigen::ArrayXXd sd2 = sd1 * (1.0 - 2.0 * s);
  if (s0) *s0 = z * s;
  if (s1) *s1 = s + z * sd1;
  if (s2) *s2 = 2.0 * sd1 + z * sd2;
  if (s3) *s3 = 3.0 * sd2 + z * (sd2 * (1.0 - 2.0 * s) - 2.0 * sd1.square());
}

}  // namespace detail

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

}  // namespace

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + tmp.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_raw(out, kCheckpointVersion);
    write_raw(out, static_cast<std::uint32_t>(params.config.input_width));
    write_raw(out, static_cast<std::uint32_t>(params.config.hidden_layers));
    write_raw(out, static_cast<std::uint32_t>(params.config.hidden_width));
    write_raw(out, static_cast<std::uint32_t>(params.config.activation));
    write_raw(out, params.config.seed);
    const std::vector<double> flat = params.flatten();
    write_raw(out, static_cast<std::uint64_t>(flat.size()));
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to checkpoint file: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("bad checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("bad checkpoint: magic mismatch in " + path.string());
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("bad checkpoint: unsupported format version " +
                             std::to_string(version));
  NetworkConfig config;
  config.input_width = static_cast<int>(read_raw<std::uint32_t>(in));
  config.hidden_layers = static_cast<int>(read_raw<std::uint32_t>(in));
  config.hidden_width = static_cast<int>(read_raw<std::uint32_t>(in));
  config.activation = static_cast<Activation>(read_raw<std::uint32_t>(in));
  config.seed = read_raw<std::uint64_t>(in);
  if (!in) throw std::runtime_error("bad checkpoint: truncated header in " + path.string());
  config.validate();

  NetworkParams params = init_network(config);
  const auto count = read_raw<std::uint64_t>(in);
  if (count != params.parameter_count())
    throw std::runtime_error("bad checkpoint: parameter count " + std::to_string(count) +
                             " does not match config (" +
                             std::to_string(params.parameter_count()) + ")");
  std::vector<double> flat(count);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("bad checkpoint: truncated parameter block in " + path.string());
  params.unflatten(flat);
  return params;
}

}  // namespace tdse
