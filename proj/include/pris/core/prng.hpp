#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace pris {

// Counter-based generator: every draw is a pure function of its key, so the
// order in which jobs run never changes what they observe.
class KeyedRng {
 public:
  static constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  static constexpr std::uint64_t bits(std::initializer_list<std::uint64_t> key) {
    std::uint64_t h = 0x6A09E667F3BCC908ULL;
    for (std::uint64_t k : key) h = mix(h ^ mix(k));
    return h;
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  static double uniform(std::initializer_list<std::uint64_t> key) {
    return static_cast<double>(bits(key) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller over two keyed uniforms.
  static double normal(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    const double u1 = 1.0 - uniform({a, b, c, d, 1});
    const double u2 = uniform({a, b, c, d, 2});
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

// Named streams keep unrelated draws independent.
enum class Stream : std::uint64_t {
  satisfy = 1,
  affinity = 2,
  omission = 3,
  yes_bias = 4,
  reward_noise = 5,
  prompt_gate = 6,
  prompt_draw = 7,
  fresh_seed = 8,
  generation_failure = 9,
  bench = 10,
};

constexpr std::uint64_t key(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace pris
