#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace as3cma {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// A seeded pseudo-random stream. Every random decision in a run draws from
/// an explicit stream so that runs are reproducible and independent.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Named sub-stream of a master seed. Different names give statistically
  /// independent streams; the same (seed, name) pair always gives the same one.
  static RandomStream derive(std::uint64_t master_seed, std::string_view name) {
    return RandomStream(splitmix64(master_seed ^ fnv1a(name)));
  }

  /// Uniform in [0, 1); never returns 1.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace as3cma
