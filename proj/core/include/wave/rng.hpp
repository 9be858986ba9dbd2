#pragma once

#include <cstdint>
#include <initializer_list>

namespace wave {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the same words always give the same seed,
/// independent of call order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = splitmix64(base);
  for (auto w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

}  // namespace wave
