#include "smallball/rng.hpp"

#include <cmath>

namespace smallball {
namespace {

constexpr std::uint32_t kMult0 = 0xD2511F53u;
constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t prod0 = std::uint64_t{kMult0} * c[0];
  const std::uint64_t prod1 = std::uint64_t{kMult1} * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(prod0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(prod0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(prod1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(prod1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

// Two uniforms in [0,1) from one block, each with full 53-bit resolution.
inline void block_uniforms(const SeedSpec& seed, std::uint64_t block, double& u1, double& u2) {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block),
      static_cast<std::uint32_t>(block >> 32),
      static_cast<std::uint32_t>(seed.stream_id),
      static_cast<std::uint32_t>(seed.stream_id >> 32),
  };
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed.master_seed),
      static_cast<std::uint32_t>(seed.master_seed >> 32),
  };
  const auto x = philox4x32_10(counter, key);
  const std::uint64_t a = (std::uint64_t{x[0]} << 32) | x[1];
  const std::uint64_t b = (std::uint64_t{x[2]} << 32) | x[3];
  constexpr double kScale = 0x1.0p-53;
  u1 = static_cast<double>(a >> 11) * kScale;
  u2 = static_cast<double>(b >> 11) * kScale;
}

// Box-Muller pair. log1p(-u1) keeps the radius finite at u1 = 0 and well
// conditioned near u1 = 1.
inline void normal_pair(const SeedSpec& seed, std::uint64_t block, double& z0, double& z1) {
  double u1 = 0.0;
  double u2 = 0.0;
  block_uniforms(seed, block, u1, u2);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  const double theta = 2.0 * M_PI * u2;
  z0 = r * std::cos(theta);
  z1 = r * std::sin(theta);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(const std::array<std::uint32_t, 4>& counter,
                                           const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = counter;
  std::array<std::uint32_t, 2> k = key;
  for (int round = 0; round < 10; ++round) {
    round_once(c, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

double normal_at(const SeedSpec& seed, std::uint64_t i) {
  double z0 = 0.0;
  double z1 = 0.0;
  normal_pair(seed, i >> 1, z0, z1);
  return (i & 1u) ? z1 : z0;
}

double GaussianStream::next() {
  if (has_cached_) {
    has_cached_ = false;
    ++index_;
    return cached_;
  }
  double z0 = 0.0;
  double z1 = 0.0;
  normal_pair(seed_, index_ >> 1, z0, z1);
  if ((index_ & 1u) == 0u) {
    cached_ = z1;
    has_cached_ = true;
    ++index_;
    return z0;
  }
  ++index_;
  return z1;
}

void GaussianStream::generate(double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] = next();
}

std::vector<double> GaussianStream::take(std::size_t n) {
  std::vector<double> v(n);
  generate(v.data(), n);
  return v;
}

}  // namespace smallball
