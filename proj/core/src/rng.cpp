#include "physlaw/numkit/rng.hpp"

#include <cmath>

#include "physlaw/common.hpp"

namespace physlaw::numkit {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw NumericError("Rng::below: n must be positive");
  std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  // Guard log(0); u1 == 0 happens once per 2^53 draws.
  while (u1 <= 0.0) u1 = uniform();
  double mag = std::sqrt(-2.0 * std::log(u1));
  double ang = 2.0 * 3.141592653589793238462643383279502884 * u2;
  spare_ = mag * std::sin(ang);
  has_spare_ = true;
  return mag * std::cos(ang);
}

std::uint64_t Rng::mix(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t x = 0x243f6a8885a308d3ull;  // arbitrary nonzero start
  for (std::uint64_t p : parts) {
    x ^= p + 0x9e3779b97f4a7c15ull + (x << 6) + (x >> 2);
    x = splitmix64(x);
  }
  return splitmix64(x);
}

}  // namespace physlaw::numkit
