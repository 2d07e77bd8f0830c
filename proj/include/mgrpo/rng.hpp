#pragma once

#include <cstdint>
#include <random>

namespace mgrpo {

using Engine = std::mt19937_64;

/// Named random streams derived from one root seed. Each consumer owns a
/// stream keyed by (root, kind, a, b), so the draws of one consumer never
/// shift the draws of another.
enum class Stream : std::uint32_t {
  Init = 1,
  Env = 2,
  Shuffle = 3,
  Current = 4,
  Momentum = 5,
  Eval = 6,
};

/// Builds an independent engine for (root_seed, kind, a, b). Typical keys are
/// (step, prompt_id) for rollout streams and (epoch, 0) for shuffling.
Engine make_stream(std::uint64_t root_seed, Stream kind, std::uint64_t a = 0,
                   std::uint64_t b = 0);

/// Uniform double in [0, 1).
double uniform01(Engine& rng);

}  // namespace mgrpo
