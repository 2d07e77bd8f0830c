#include "mgrpo/rng.hpp"

namespace mgrpo {

namespace {

std::uint32_t lo32(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
std::uint32_t hi32(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

}  // namespace

Engine make_stream(std::uint64_t root_seed, Stream kind, std::uint64_t a,
                   std::uint64_t b) {
  std::seed_seq seq{lo32(root_seed), hi32(root_seed),
                    static_cast<std::uint32_t>(kind),
                    lo32(a), hi32(a), lo32(b), hi32(b)};
  return Engine(seq);
}

double uniform01(Engine& rng) {
  // 53 high bits -> exactly representable double in [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace mgrpo
