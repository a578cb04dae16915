#pragma once

#include <cstdint>
#include <random>

namespace glmfunk {

using Engine = std::mt19937_64;

// splitmix64 finalizer; used to turn (seed, stream) pairs into
// decorrelated engine seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

// Seed for an independent sub-stream, e.g. one replicate of an experiment.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

inline Engine make_engine(std::uint64_t seed) { return Engine{mix_seed(seed)}; }

}  // namespace glmfunk
