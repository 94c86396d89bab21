#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace cadsim {

/// Stafford "mix13" finalizer used by SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/**
 * Counter-based random stream.
 *
 * Output i of a stream is mix64(key + i * gamma), so a stream is fully
 * described by (key, counter) and child streams are derived from the key
 * alone. Two streams with different derivation labels never share state,
 * which is what lets callers hand one stream to each independent consumer.
 *
 * Satisfies UniformRandomBitGenerator, but uniform() and normal() are
 * implemented here so sequences do not depend on the standard library's
 * distribution algorithms.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  constexpr explicit RandomStream(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  /// Stream for a user-facing seed. Seeds 0 and 1 give unrelated streams.
  static constexpr RandomStream from_seed(std::uint64_t seed) noexcept {
    return RandomStream(mix64(seed ^ 0x6A09E667F3BCC909ULL));
  }

  /// Independent child stream named by `label`; does not advance this stream.
  constexpr RandomStream derive(std::uint64_t label) const noexcept {
    return RandomStream(mix64(key_ ^ mix64(label + 0x3C6EF372FE94F82BULL)) + kGamma);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Standard normal draw (Box-Muller, cosine branch; consumes two outputs).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  friend constexpr bool operator==(const RandomStream&, const RandomStream&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace cadsim
