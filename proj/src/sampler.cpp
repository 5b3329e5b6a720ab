#include "tdse/sampler.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace tdse {

namespace {

constexpr std::uint64_t kInteriorStream = 0;
constexpr std::uint64_t kBoundaryStream = 1;
constexpr std::uint64_t kInitialStream = 2;

// splitmix64 finalizer; applied in stages so seed, stream and step each get
// a full avalanche before feeding the engine
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
  return std::mt19937_64(mix64(mix64(mix64(seed) ^ stream) ^ step));
}

double draw_omega(const SamplerConfig& config, std::mt19937_64& rng) {
  if (!config.omega_range) return config.omega;
  std::uniform_real_distribution<double> dist(config.omega_range->low, config.omega_range->high);
  return dist(rng);
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_interior < 1 || n_boundary < 1 || n_initial < 1)
    throw std::invalid_argument("sampler batch sizes must be at least 1");
  if (!(omega > 0.0)) throw std::invalid_argument("sampler omega must be positive");
  if (omega_range) {
    if (!(omega_range->low < omega_range->high))
      throw std::invalid_argument("omega range requires low < high");
    if (!(omega_range->low > 0.0)) throw std::invalid_argument("omega range must be positive");
  }
}

std::vector<Point> sample_interior(const SamplerConfig& config, const Domain& domain,
                                   std::uint64_t step) {
  config.validate();
  domain.validate();
  auto rng = stream_engine(config.seed, kInteriorStream, step);
  std::uniform_real_distribution<double> dist_x(domain.x_min, domain.x_max);
  std::uniform_real_distribution<double> dist_t(domain.t_min, domain.t_max);
  std::vector<Point> batch(static_cast<std::size_t>(config.n_interior));
  for (Point& p : batch) {
    p.x = dist_x(rng);
    p.t = dist_t(rng);
    p.omega = draw_omega(config, rng);
  }
  return batch;
}

std::vector<Point> sample_boundary(const SamplerConfig& config, const Domain& domain,
                                   std::uint64_t step) {
  config.validate();
  domain.validate();
  auto rng = stream_engine(config.seed, kBoundaryStream, step);
  std::uniform_real_distribution<double> dist_t(domain.t_min, domain.t_max);
  std::vector<Point> batch(static_cast<std::size_t>(config.n_boundary));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].x = (i % 2 == 0) ? domain.x_min : domain.x_max;
    batch[i].t = dist_t(rng);
    batch[i].omega = draw_omega(config, rng);
  }
  return batch;
}

std::vector<Point> sample_initial(const SamplerConfig& config, const Domain& domain,
                                  std::uint64_t step) {
  config.validate();
  domain.validate();
  auto rng = stream_engine(config.seed, kInitialStream, step);
  std::uniform_real_distribution<double> dist_x(domain.x_min, domain.x_max);
  std::vector<Point> batch(static_cast<std::size_t>(config.n_initial));
  for (Point& p : batch) {
    p.x = dist_x(rng);
    p.t = domain.t_min;
    p.omega = draw_omega(config, rng);
  }
  return batch;
}

}  // namespace tdse
