#pragma once

#include <cstdint>
#include <utility>

#include "arsid/types.hpp"

namespace arsid {

// Draw the Td x N noise matrix E. Coordinates are i.i.d. within and across
// columns; every family is centered with coordinate variance sigma^2:
//   gaussian    Normal(0, sigma^2)
//   rademacher  sigma * (+-1 equiprobable)
//   uniform     Uniform(-sigma*sqrt(3), sigma*sqrt(3))
// Trajectories map to disjoint counter ranges of one splitmix64 stream, so
// the result is independent of evaluation order (see rng.hpp).
NoiseTensor sample_noise(const NoiseSpec& spec, int N, int T, int d,
                         std::uint64_t seed);

// Run the recursion x_t = sum_{k=1}^{min(t-1,p)} A_k x_{t-k} + xi_t for each
// column of e. Deterministic function of (m, e).
Dataset simulate_from_noise(const ARModel& m, const NoiseTensor& e);

// sample_noise followed by simulate_from_noise; the noise is returned so
// callers can exercise the data = L * noise identity.
std::pair<Dataset, NoiseTensor> simulate(const ARModel& m, const NoiseSpec& spec,
                                         int N, int T, std::uint64_t seed);

// Serial reference kernels; plain loops, no OpenMP. The parallel versions
// above must agree bit-for-bit (each trajectory is an independent unit).
namespace ref {
NoiseTensor sample_noise(const NoiseSpec& spec, int N, int T, int d,
                         std::uint64_t seed);
Dataset simulate_from_noise(const ARModel& m, const NoiseTensor& e);
}  // namespace ref

}  // namespace arsid
