#include "tdse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace tdse {

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

int Tape::push(double value, int a, double da, int b, double db) {
  nodes_.push_back(Node{a, b, da, db});
  values_.push_back(value);
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(double value) { return Var(this, push(value, -1, 0.0, -1, 0.0), value); }

std::vector<double> Tape::adjoints(const Var& root) const {
  if (root.tape_ != this) throw std::invalid_argument("root variable belongs to another tape");
  std::vector<double> adj(nodes_.size(), 0.0);
  adj[static_cast<std::size_t>(root.index_)] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const double a_i = adj[static_cast<std::size_t>(i)];
    if (a_i == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += n.da * a_i;
    if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += n.db * a_i;
  }
  return adj;
}

namespace {

Tape* common_tape(const Var& a, const Var& b, Tape* ta, Tape* tb) {
  (void)a;
  (void)b;
  if (ta != tb) throw std::invalid_argument("variables belong to different tapes");
  return ta;
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, a.tape_, b.tape_);
  const double v = a.value_ + b.value_;
  return Var(t, t->push(v, a.index_, 1.0, b.index_, 1.0), v);
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, a.tape_, b.tape_);
  const double v = a.value_ - b.value_;
  return Var(t, t->push(v, a.index_, 1.0, b.index_, -1.0), v);
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, a.tape_, b.tape_);
  const double v = a.value_ * b.value_;
  return Var(t, t->push(v, a.index_, b.value_, b.index_, a.value_), v);
}

Var operator/(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, a.tape_, b.tape_);
  const double v = a.value_ / b.value_;
  return Var(t, t->push(v, a.index_, 1.0 / b.value_, b.index_, -v / b.value_), v);
}

Var operator+(const Var& a, double c) {
  return Var(a.tape_, a.tape_->push(a.value_ + c, a.index_, 1.0, -1, 0.0), a.value_ + c);
}
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) {
  return Var(a.tape_, a.tape_->push(c - a.value_, a.index_, -1.0, -1, 0.0), c - a.value_);
}
Var operator*(const Var& a, double c) {
  return Var(a.tape_, a.tape_->push(a.value_ * c, a.index_, c, -1, 0.0), a.value_ * c);
}
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) { return a * (1.0 / c); }
Var operator-(const Var& a) { return a * -1.0; }

Var square(const Var& a) {
  const double v = a.value_ * a.value_;
  return Var(a.tape_, a.tape_->push(v, a.index_, 2.0 * a.value_, -1, 0.0), v);
}

Var exp(const Var& a) {
  const double v = std::exp(a.value_);
  return Var(a.tape_, a.tape_->push(v, a.index_, v, -1, 0.0), v);
}

Var tanh(const Var& a) {
  const double v = std::tanh(a.value_);
  return Var(a.tape_, a.tape_->push(v, a.index_, 1.0 - v * v, -1, 0.0), v);
}

Var sqrt(const Var& a) {
  const double v = std::sqrt(a.value_);
  return Var(a.tape_, a.tape_->push(v, a.index_, 0.5 / v, -1, 0.0), v);
}

Var sum(std::span<const Var> terms, Tape& tape) {
  if (terms.empty()) return tape.leaf(0.0);
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Worker fan-out
// ---------------------------------------------------------------------------

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("TDSE_PINN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

namespace {

// Static round-robin assignment: item i goes to worker i % K. For a fixed
// worker count the floating-point result is reproducible run to run.
void parallel_for(int n_items, const std::function<void(int item, int worker)>& body) {
  const int workers = std::min(worker_count(), std::max(n_items, 1));
  if (workers == 1) {
    for (int i = 0; i < n_items; ++i) body(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](int w) {
    try {
      for (int i = w; i < n_items; i += workers) body(i, w);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

constexpr Eigen::Index kChunk = 256;
constexpr std::size_t kCacheBudgetBytes = 128ull << 20;

void validate_shapes(const NetworkParams& params) {
  params.config.validate();
  const std::size_t n_layers = static_cast<std::size_t>(params.config.hidden_layers) + 1;
  if (params.weights.size() != n_layers || params.biases.size() != n_layers)
    throw std::invalid_argument("network parameters do not match config layer count");
  int in = params.config.input_width;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int out = (l + 1 == n_layers) ? 2 : params.config.hidden_width;
    if (params.weights[l].rows() != out || params.weights[l].cols() != in ||
        params.biases[l].size() != out)
      throw std::invalid_argument("network parameter shapes do not chain at layer " +
                                  std::to_string(l));
    in = out;
  }
}

// Value, d/dx, d2/dx2 and d/dt streams of one batch of activations.
struct StreamBatch {
  Eigen::MatrixXd v, x, xx, t;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    v.resize(rows, cols);
    x.resize(rows, cols);
    xx.resize(rows, cols);
    t.resize(rows, cols);
  }
};

struct JetCache {
  std::vector<StreamBatch> a;        // activations, a[0] = inputs .. a[H]
  std::vector<StreamBatch> z;        // pre-activations per hidden layer
  std::vector<Eigen::ArrayXXd> prim; // activation primitive per hidden layer
};

struct ValueCache {
  std::vector<Eigen::MatrixXd> a;
  std::vector<Eigen::ArrayXXd> z;
  std::vector<Eigen::ArrayXXd> prim;
};

// Parameter-gradient accumulator mirroring the layer structure.
struct GradAccum {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  bool used = false;

  void init_like(const NetworkParams& params) {
    w.clear();
    b.clear();
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      w.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
      b.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
    }
  }

  void add(const GradAccum& other) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      w[l] += other.w[l];
      b[l] += other.b[l];
    }
  }

  GradientVector flatten() const {
    GradientVector flat;
    std::size_t total = 0;
    for (std::size_t l = 0; l < w.size(); ++l)
      total += static_cast<std::size_t>(w[l].size()) + static_cast<std::size_t>(b[l].size());
    flat.reserve(total);
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (Eigen::Index r = 0; r < w[l].rows(); ++r)
        for (Eigen::Index c = 0; c < w[l].cols(); ++c) flat.push_back(w[l](r, c));
      for (Eigen::Index i = 0; i < b[l].size(); ++i) flat.push_back(b[l](i));
    }
    return flat;
  }
};

// Forward propagation of the input-derivative streams through the network.
// Streams transform as: affine z = W a + b gives z_s = W a_s; activation
// a' = sigma(z) gives a'_x = s1 z_x, a'_t = s1 z_t,
// a'_xx = s2 z_x^2 + s1 z_xx.
StreamBatch forward_jet(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                        JetCache* cache) {
  const int hidden = params.config.hidden_layers;
  const Eigen::Index batch = inputs.cols();
  const Activation act = params.config.activation;

  StreamBatch a;
  a.v = inputs;
  a.x = Eigen::MatrixXd::Zero(inputs.rows(), batch);
  a.x.row(0).setOnes();
  a.xx = Eigen::MatrixXd::Zero(inputs.rows(), batch);
  a.t = Eigen::MatrixXd::Zero(inputs.rows(), batch);
  a.t.row(1).setOnes();

  if (cache) {
    cache->a.clear();
    cache->z.clear();
    cache->prim.clear();
    cache->a.push_back(a);
  }

  for (int l = 0; l < hidden; ++l) {
    const Eigen::MatrixXd& w = params.weights[static_cast<std::size_t>(l)];
    StreamBatch z;
    z.v.noalias() = w * a.v;
    z.v.colwise() += params.biases[static_cast<std::size_t>(l)];
    z.x.noalias() = w * a.x;
    z.xx.noalias() = w * a.xx;
    z.t.noalias() = w * a.t;

    const Eigen::ArrayXXd prim = detail::activation_primitive(act, z.v.array());
    Eigen::ArrayXXd s0, s1, s2;
    detail::activation_orders(act, z.v.array(), prim, &s0, &s1, &s2, nullptr);

    StreamBatch next;
    next.v = s0.matrix();
    next.x = (s1 * z.x.array()).matrix();
    next.t = (s1 * z.t.array()).matrix();
    next.xx = (s2 * z.x.array().square() + s1 * z.xx.array()).matrix();

    if (cache) {
      cache->z.push_back(std::move(z));
      cache->prim.push_back(prim);
      cache->a.push_back(next);
    }
    a = std::move(next);
  }

  const Eigen::MatrixXd& w_out = params.weights.back();
  StreamBatch out;
  out.v.noalias() = w_out * a.v;
  out.v.colwise() += params.biases.back();
  out.x.noalias() = w_out * a.x;
  out.xx.noalias() = w_out * a.xx;
  out.t.noalias() = w_out * a.t;
  return out;
}

// Reverse sweep matching forward_jet. `seed` holds dL/d(out streams).
void backward_jet(const NetworkParams& params, const JetCache& cache, const StreamBatch& seed,
                  GradAccum& grad) {
  const int hidden = params.config.hidden_layers;
  const Activation act = params.config.activation;
  const std::size_t out_l = static_cast<std::size_t>(hidden);

  grad.used = true;
  const StreamBatch& a_top = cache.a[out_l];
  grad.w[out_l].noalias() += seed.v * a_top.v.transpose();
  grad.w[out_l].noalias() += seed.x * a_top.x.transpose();
  grad.w[out_l].noalias() += seed.xx * a_top.xx.transpose();
  grad.w[out_l].noalias() += seed.t * a_top.t.transpose();
  grad.b[out_l] += seed.v.rowwise().sum();

  const Eigen::MatrixXd& w_out = params.weights[out_l];
  StreamBatch abar;
  abar.v.noalias() = w_out.transpose() * seed.v;
  abar.x.noalias() = w_out.transpose() * seed.x;
  abar.xx.noalias() = w_out.transpose() * seed.xx;
  abar.t.noalias() = w_out.transpose() * seed.t;

  for (int l = hidden - 1; l >= 0; --l) {
    const std::size_t sl = static_cast<std::size_t>(l);
    const StreamBatch& z = cache.z[sl];
    Eigen::ArrayXXd s1, s2, s3;
    detail::activation_orders(act, z.v.array(), cache.prim[sl], nullptr, &s1, &s2, &s3);

    StreamBatch zbar;
    zbar.xx = (abar.xx.array() * s1).matrix();
    zbar.x = (abar.x.array() * s1 + 2.0 * abar.xx.array() * s2 * z.x.array()).matrix();
    zbar.t = (abar.t.array() * s1).matrix();
    zbar.v = (abar.v.array() * s1 + abar.x.array() * s2 * z.x.array() +
              abar.t.array() * s2 * z.t.array() +
              abar.xx.array() * (s3 * z.x.array().square() + s2 * z.xx.array()))
                 .matrix();

    const StreamBatch& a_in = cache.a[sl];
    grad.w[sl].noalias() += zbar.v * a_in.v.transpose();
    grad.w[sl].noalias() += zbar.x * a_in.x.transpose();
    grad.w[sl].noalias() += zbar.xx * a_in.xx.transpose();
    grad.w[sl].noalias() += zbar.t * a_in.t.transpose();
    grad.b[sl] += zbar.v.rowwise().sum();

    if (l > 0) {
      const Eigen::MatrixXd& w = params.weights[sl];
      abar.v.noalias() = w.transpose() * zbar.v;
      abar.x.noalias() = w.transpose() * zbar.x;
      abar.xx.noalias() = w.transpose() * zbar.xx;
      abar.t.noalias() = w.transpose() * zbar.t;
    }
  }
}

Eigen::MatrixXd forward_value(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                              ValueCache* cache) {
  const int hidden = params.config.hidden_layers;
  const Activation act = params.config.activation;
  Eigen::MatrixXd a = inputs;
  if (cache) {
    cache->a.clear();
    cache->z.clear();
    cache->prim.clear();
    cache->a.push_back(a);
  }
  for (int l = 0; l < hidden; ++l) {
    Eigen::MatrixXd z = (params.weights[static_cast<std::size_t>(l)] * a).colwise() +
                        params.biases[static_cast<std::size_t>(l)];
    Eigen::ArrayXXd prim = detail::activation_primitive(act, z.array());
    Eigen::ArrayXXd s0;
    detail::activation_orders(act, z.array(), prim, &s0, nullptr, nullptr, nullptr);
    a = s0.matrix();
    if (cache) {
      cache->z.push_back(z.array());
      cache->prim.push_back(std::move(prim));
      cache->a.push_back(a);
    }
  }
  return (params.weights.back() * a).colwise() + params.biases.back();
}

void backward_value(const NetworkParams& params, const ValueCache& cache,
                    const Eigen::MatrixXd& seed, GradAccum& grad) {
  const int hidden = params.config.hidden_layers;
  const Activation act = params.config.activation;
  const std::size_t out_l = static_cast<std::size_t>(hidden);

  grad.used = true;
  grad.w[out_l].noalias() += seed * cache.a[out_l].transpose();
  grad.b[out_l] += seed.rowwise().sum();
  Eigen::MatrixXd abar = params.weights[out_l].transpose() * seed;

  for (int l = hidden - 1; l >= 0; --l) {
    const std::size_t sl = static_cast<std::size_t>(l);
    Eigen::ArrayXXd s1;
    detail::activation_orders(act, cache.z[sl], cache.prim[sl], nullptr, &s1, nullptr, nullptr);
    Eigen::MatrixXd zbar = (abar.array() * s1).matrix();
    grad.w[sl].noalias() += zbar * cache.a[sl].transpose();
    grad.b[sl] += zbar.rowwise().sum();
    if (l > 0) abar.noalias() = params.weights[sl].transpose() * zbar;
  }
}

std::size_t jet_cache_bytes(const NetworkParams& params, Eigen::Index batch) {
  const std::size_t h = static_cast<std::size_t>(params.config.hidden_layers);
  const std::size_t w = static_cast<std::size_t>(params.config.hidden_width);
  const std::size_t mats = (h + 1) * 4 + h * 5;
  return mats * w * static_cast<std::size_t>(batch) * sizeof(double);
}

void check_finite_columns(const StreamBatch& out, std::size_t offset) {
  for (Eigen::Index c = 0; c < out.v.cols(); ++c) {
    const bool ok = std::isfinite(out.v(0, c)) && std::isfinite(out.v(1, c)) &&
                    std::isfinite(out.t(0, c)) && std::isfinite(out.t(1, c)) &&
                    std::isfinite(out.xx(0, c)) && std::isfinite(out.xx(1, c));
    if (!ok)
      throw std::runtime_error("non-finite network evaluation at point index " +
                               std::to_string(offset + static_cast<std::size_t>(c)));
  }
}

}  // namespace

std::vector<DerivativeBundle> eval_with_input_derivatives(const NetworkParams& params,
                                                          std::span<const Point> points) {
  if (points.empty()) throw std::invalid_argument("empty collocation batch");
  validate_shapes(params);

  std::vector<DerivativeBundle> bundles(points.size());
  const int n_chunks = static_cast<int>((points.size() + kChunk - 1) / static_cast<std::size_t>(kChunk));
  parallel_for(n_chunks, [&](int chunk, int) {
    const std::size_t begin = static_cast<std::size_t>(chunk) * static_cast<std::size_t>(kChunk);
    const std::size_t count = std::min(static_cast<std::size_t>(kChunk), points.size() - begin);
    const Eigen::MatrixXd inputs = input_matrix(params.config, points.subspan(begin, count));
    const StreamBatch out = forward_jet(params, inputs, nullptr);
    check_finite_columns(out, begin);
    for (std::size_t i = 0; i < count; ++i) {
      const Eigen::Index c = static_cast<Eigen::Index>(i);
      DerivativeBundle& d = bundles[begin + i];
      d.u = out.v(0, c);
      d.v = out.v(1, c);
      d.u_t = out.t(0, c);
      d.v_t = out.t(1, c);
      d.u_xx = out.xx(0, c);
      d.v_xx = out.xx(1, c);
    }
  });
  return bundles;
}

std::vector<Bundle<Var>> LossBuilder::with_derivatives(std::span<const Point> points) {
  const std::vector<DerivativeBundle> bundles = eval_with_input_derivatives(*params_, points);
  Segment seg;
  seg.points.assign(points.begin(), points.end());
  seg.first_leaf = tape_.size();
  seg.with_jets = true;
  segments_.push_back(std::move(seg));

  std::vector<Bundle<Var>> vars;
  vars.reserve(bundles.size());
  for (const DerivativeBundle& d : bundles) {
    Bundle<Var> b;
    b.u = tape_.leaf(d.u);
    b.v = tape_.leaf(d.v);
    b.u_t = tape_.leaf(d.u_t);
    b.v_t = tape_.leaf(d.v_t);
    b.u_xx = tape_.leaf(d.u_xx);
    b.v_xx = tape_.leaf(d.v_xx);
    vars.push_back(b);
  }
  return vars;
}

std::vector<LossBuilder::UV<Var>> LossBuilder::values(std::span<const Point> points) {
  if (points.empty()) throw std::invalid_argument("empty evaluation batch");
  validate_shapes(*params_);
  const Eigen::MatrixXd inputs = input_matrix(params_->config, points);
  const Eigen::MatrixXd out = forward_value(*params_, inputs, nullptr);

  Segment seg;
  seg.points.assign(points.begin(), points.end());
  seg.first_leaf = tape_.size();
  seg.with_jets = false;
  segments_.push_back(std::move(seg));

  std::vector<UV<Var>> vars;
  vars.reserve(points.size());
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (!std::isfinite(out(0, c)) || !std::isfinite(out(1, c)))
      throw std::runtime_error("non-finite network evaluation at point index " +
                               std::to_string(c));
    UV<Var> uv;
    uv.u = tape_.leaf(out(0, c));
    uv.v = tape_.leaf(out(1, c));
    vars.push_back(uv);
  }
  return vars;
}

struct LossGradientRunner {
  static LossValueAndGradient run(const NetworkParams& params,
                                  const std::function<Var(LossBuilder&)>& loss) {
    validate_shapes(params);
    LossBuilder builder(params);
    const Var root = loss(builder);
    if (!root.valid()) throw std::invalid_argument("loss functional returned a default variable");
    if (!std::isfinite(root.value()))
      throw std::runtime_error("loss evaluated non-finite: " + std::to_string(root.value()));

    const std::vector<double> adj = builder.tape_.adjoints(root);

    const int workers = worker_count();
    std::vector<GradAccum> accums(static_cast<std::size_t>(workers));
    for (auto& acc : accums) acc.init_like(params);

    for (const LossBuilder::Segment& seg : builder.segments_) {
      const std::span<const Point> pts(seg.points);
      const int n_chunks =
          static_cast<int>((pts.size() + kChunk - 1) / static_cast<std::size_t>(kChunk));
      parallel_for(n_chunks, [&](int chunk, int worker) {
        const std::size_t begin =
            static_cast<std::size_t>(chunk) * static_cast<std::size_t>(kChunk);
        const std::size_t count = std::min(static_cast<std::size_t>(kChunk), pts.size() - begin);
        const Eigen::MatrixXd inputs = input_matrix(params.config, pts.subspan(begin, count));
        GradAccum& acc = accums[static_cast<std::size_t>(worker)];
        if (seg.with_jets) {
          JetCache cache;
          forward_jet(params, inputs, &cache);
          StreamBatch seed;
          seed.resize(2, static_cast<Eigen::Index>(count));
          seed.x.setZero();
          for (std::size_t i = 0; i < count; ++i) {
            const std::size_t base =
                static_cast<std::size_t>(seg.first_leaf) + 6 * (begin + i);
            const Eigen::Index c = static_cast<Eigen::Index>(i);
            seed.v(0, c) = adj[base + 0];
            seed.v(1, c) = adj[base + 1];
            seed.t(0, c) = adj[base + 2];
            seed.t(1, c) = adj[base + 3];
            seed.xx(0, c) = adj[base + 4];
            seed.xx(1, c) = adj[base + 5];
          }
          backward_jet(params, cache, seed, acc);
        } else {
          ValueCache cache;
          forward_value(params, inputs, &cache);
          Eigen::MatrixXd seed(2, static_cast<Eigen::Index>(count));
          for (std::size_t i = 0; i < count; ++i) {
            const std::size_t base =
                static_cast<std::size_t>(seg.first_leaf) + 2 * (begin + i);
            const Eigen::Index c = static_cast<Eigen::Index>(i);
            seed(0, c) = adj[base + 0];
            seed(1, c) = adj[base + 1];
          }
          backward_value(params, cache, seed, acc);
        }
      });
    }

    GradAccum total = std::move(accums[0]);
    for (std::size_t w = 1; w < accums.size(); ++w)
      if (accums[w].used) total.add(accums[w]);

    LossValueAndGradient result;
    result.value = root.value();
    result.gradient = total.flatten();
    for (std::size_t i = 0; i < result.gradient.size(); ++i)
      if (!std::isfinite(result.gradient[i]))
        throw std::runtime_error("non-finite parameter gradient at index " + std::to_string(i));
    return result;
  }
};

LossValueAndGradient loss_parameter_gradient(const NetworkParams& params,
                                             const std::function<Var(LossBuilder&)>& loss) {
  return LossGradientRunner::run(params, loss);
}

}  // namespace tdse
