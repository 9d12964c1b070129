#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace contam::rng {

using Engine = std::mt19937_64;

// Independent stream for (seed, index). Both the engine and seed_seq are
// fully specified by the standard, so streams are identical on every platform.
inline Engine stream(std::uint64_t seed, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Engine(seq);
}

// Unbiased draw from [0, n). std::uniform_int_distribution is
// implementation-defined, so reproducible sampling uses plain rejection.
inline std::uint64_t uniform_index(Engine& engine, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = engine();
  } while (x >= limit);
  return x % n;
}

inline double uniform_real(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::vector<T>& items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(engine, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace contam::rng
