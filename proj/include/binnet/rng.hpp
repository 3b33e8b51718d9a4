#pragma once

#include <cmath>
#include <cstdint>

namespace binnet {

/// Deterministic 64-bit pseudo-random stream (splitmix64). The generator is
/// counter-like: draw i of a stream is a pure function of (state0, i), so
/// skip() can jump ahead in O(1) and chunked consumers reproduce the exact
/// sequential stream. State is a single word, which keeps checkpoints small.
class Rng {
 public:
  Rng() : state_(0x9e3779b97f4a7c15ULL) {}
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent stream for (seed, stream_id); used to give shuffling,
  /// initialization and stochastic draws separate histories.
  static Rng derive(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(mix(seed ^ mix(0xd1b54a32d192ed03ULL + stream_id)));
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

  /// Advances as if n draws had been made.
  void skip(std::uint64_t n) { state_ += n * kGamma; }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 24 random bits.
  float next_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform integer in [0, bound), bias-free (rejection sampling).
  /// Consumes a variable number of draws; not skip-compatible.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t u = next_u64();
      if (u >= threshold) return u % bound;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t state_;
};

}  // namespace binnet
