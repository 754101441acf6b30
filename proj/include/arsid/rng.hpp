#pragma once

#include <cmath>
#include <cstdint>

namespace arsid::rng {

// Counter-based 64-bit generator built on the splitmix64 finalizer.
// A draw is a pure function of (key, counter), so streams can be consumed
// in any order and from any thread without shared state.
//
// Stream derivation used across the library:
//   key               = derive(user_seed, stream_tag)
//   noise (n, t, i)   = counters 2*lin and 2*lin+1, lin = (n*T + t-1)*d + i
//                       (t is 1-based; the second counter feeds Box-Muller)
//   matrix entries    = counter (k*d + row)*d + col for block k (0-based)
// Changing T or d therefore changes the noise stream; (seed, N, T, d, family)
// fully determines every sample.

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// Stream tags (keys for derive).
inline constexpr std::uint64_t kStreamNoise = 1;
inline constexpr std::uint64_t kStreamTruth = 2;
inline constexpr std::uint64_t kStreamInit = 3;

constexpr std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Value of the stream `key` at position `counter`; identical to the
// counter-th output of sequential splitmix64 seeded with `key`.
constexpr std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
  return mix(key + (counter + 1) * kGamma);
}

constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return at(mix(seed), tag);
}

// Uniform on (0,1), never exactly 0 or 1 (safe for log()).
inline double uniform01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// One standard normal per counter pair (2k, 2k+1), Box-Muller cosine branch.
inline double standard_normal(std::uint64_t key, std::uint64_t k) {
  const double u1 = uniform01(at(key, 2 * k));
  const double u2 = uniform01(at(key, 2 * k + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double rademacher(std::uint64_t key, std::uint64_t k) {
  return (at(key, 2 * k) >> 63) ? 1.0 : -1.0;
}

// Uniform on (-1, 1).
inline double symmetric_uniform(std::uint64_t key, std::uint64_t k) {
  return 2.0 * uniform01(at(key, 2 * k)) - 1.0;
}

}  // namespace arsid::rng
