#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sortcell {

// Seeded random stream. All simulator randomness flows through this type so
// runs are reproducible from a single seed. Draw mapping is done by hand
// (std distributions are not bit-stable across standard libraries).
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  double uniform_range(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(engine_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t seed() const { return seed_; }

  // Child stream keyed by a stable string. Independent of draw order on the
  // parent, so concurrent use of sibling streams stays deterministic.
  RngStream split(std::string_view key) const {
    return RngStream(mix(seed_, fnv1a(key)));
  }

  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static uint64_t mix(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the xor of the two keys
    uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sortcell
