#pragma once
// Deterministic randomness. Every random decision in the simulator flows
// through Rng so a (seed, stream) pair fully determines a run. The engine is
// std::mt19937_64, whose output sequence is fixed by the standard; the value
// mappings below replace std::uniform_*_distribution, whose results are
// implementation-defined and would break byte-identical logs across
// toolchains.

#include <cstdint>
#include <random>
#include <vector>

namespace fedkge {

constexpr std::uint64_t fnv1a64(const char* s) {
  std::uint64_t h = 1469598103934665603ULL;
  while (*s != '\0') {
    h ^= static_cast<unsigned char>(*s++);
    h *= 1099511628211ULL;
  }
  return h;
}

// splitmix64 finalizer, used only to derive substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of a named substream. Tags keep unrelated consumers (partitioning,
// per-client training, downstream tie-breaking, ...) on disjoint streams, so
// adding a consumer never perturbs the draws seen by another.
constexpr std::uint64_t substream(std::uint64_t seed, const char* tag,
                                  std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ fnv1a64(tag));
  h = mix64(h ^ a);
  return mix64(h ^ b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool coin() { return (eng_() & 1ULL) != 0; }

  // Fisher-Yates; identical results on every platform.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace fedkge
