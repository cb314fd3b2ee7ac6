#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mmlc {

// Deterministic splittable PRNG behind every seeded operation.
//
// A stream is identified by a 64-bit key and generated with SplitMix64:
//   state += 0x9E3779B97F4A7C15
//   x = state; x ^= x >> 30; x *= 0xBF58476D1CE4E5B9;
//   x ^= x >> 27; x *= 0x94D049BB133111EB; x ^= x >> 31
// fork(purpose) derives an independent child stream with
//   child_key = finalize(key ^ fnv1a64(purpose))
// where finalize is the SplitMix64 output function above. Forking depends
// only on the stream key, never on how many values were drawn.
//
// Derived draws:
//   next_double()   = (next_u64() >> 11) * 2^-53                in [0, 1)
//   next_gaussian() = Box-Muller, sqrt(-2 ln u1) cos(2 pi u2)
//                     with u1 in (0, 1] from ((bits >> 11) + 1) * 2^-53
//   next_below(n)   = rejection-sampled unbiased integer in [0, n)
//   shuffle         = Fisher-Yates driven by next_below
//
// Same seed, same purposes, same call sequence => identical values on any
// platform with IEEE-754 doubles.
class Rng {
 public:
  explicit Rng(uint64_t seed) : key_(seed), state_(seed) {}

  Rng fork(std::string_view purpose) const;

  uint64_t key() const { return key_; }

  uint64_t next_u64();
  double next_double();
  double next_gaussian();
  uint64_t next_below(uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  uint64_t key_;
  uint64_t state_;
};

uint64_t fnv1a64(std::string_view text);

}  // namespace mmlc
