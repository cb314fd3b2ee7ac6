#include "rng.hpp"

#include <cmath>
#include <numbers>

namespace mmlc {

namespace {

uint64_t splitmix_finalize(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

uint64_t fnv1a64(std::string_view text) {
  uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

Rng Rng::fork(std::string_view purpose) const {
  return Rng(splitmix_finalize(key_ ^ fnv1a64(purpose)));
}

uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return splitmix_finalize(state_);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_gaussian() {
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;       // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t Rng::next_below(uint64_t bound) {
  if (bound <= 1) return 0;
  // Accept only draws below the largest multiple of bound to stay unbiased.
  uint64_t residue = (UINT64_MAX % bound + 1) % bound;
  uint64_t limit = UINT64_MAX - residue;
  uint64_t x;
  do {
    x = next_u64();
  } while (x > limit);
  return x % bound;
}

}  // namespace mmlc
