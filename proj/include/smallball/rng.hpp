#pragma once
// Counter-based random number generation with reproducible, splittable streams.
//
// The generator is Philox4x32-10. Each (master_seed, stream_id) pair addresses an
// independent stream of standard Gaussian variates, and every variate in a stream
// is randomly accessible by index. This makes Monte Carlo results independent of
// how work is divided among threads: worker w drawing path r always evaluates the
// same counters as a single-threaded run would.

#include <array>
#include <cstdint>
#include <vector>

namespace smallball {

// Addresses one deterministic Gaussian stream.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
};

// One 10-round Philox4x32 block: 128-bit counter + 64-bit key -> 128 output bits.
std::array<std::uint32_t, 4> philox4x32_10(const std::array<std::uint32_t, 4>& counter,
                                           const std::array<std::uint32_t, 2>& key);

// i-th standard Gaussian of the stream, via Box-Muller on two 53-bit uniforms
// drawn from block i/2 of the stream's counter sequence. Pure function of its
// arguments; O(1) random access.
double normal_at(const SeedSpec& seed, std::uint64_t i);

// Sequential reader over a stream; caches the second Box-Muller lane so a full
// sweep costs one Philox block per two variates.
class GaussianStream {
 public:
  explicit GaussianStream(SeedSpec seed) : seed_(seed) {}

  double next();
  void generate(double* out, std::size_t n);
  std::vector<double> take(std::size_t n);

  const SeedSpec& seed() const { return seed_; }
  std::uint64_t position() const { return index_; }

 private:
  SeedSpec seed_;
  std::uint64_t index_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace smallball
