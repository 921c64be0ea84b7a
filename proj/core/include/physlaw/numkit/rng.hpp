#pragma once

#include <cstdint>
#include <initializer_list>

namespace physlaw::numkit {

// xoshiro256++ seeded through splitmix64. Self-contained so that streams are
// reproducible across standard libraries and builds; std::normal_distribution
// et al. are implementation-defined and would break dataset determinism.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // [0, 1), 53-bit mantissa.
  double uniform();
  // [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n), n > 0. Rejection sampling on the top bits.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; caches the spare draw.
  double gaussian();
  float gaussian_f() { return static_cast<float>(gaussian()); }

  // Derives a decorrelated seed from a list of stream labels. Used to key
  // per-episode / per-step substreams off one experiment seed.
  static std::uint64_t mix(std::initializer_list<std::uint64_t> parts);

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace physlaw::numkit
