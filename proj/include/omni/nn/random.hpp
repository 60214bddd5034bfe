#pragma once

#include <cstdint>

namespace omni::nn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based uniform draw in [0, 1): the same key always gives the same
/// value, independent of call order.
inline double counter_uniform(std::uint64_t seed, std::uint64_t step, std::uint64_t stream,
                              std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ step);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Identifies one forward pass for dropout masks.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

}  // namespace omni::nn
