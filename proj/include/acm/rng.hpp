#pragma once

#include <cstdint>

namespace acm {

// Counter-based randomness: every draw is a pure function of
// (seed, stream tag, time, draw index). Nothing is carried between steps,
// so two runs sharing a seed see the same delays and the same theta draws
// no matter which construction consumes them.

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class StreamTag : std::uint64_t {
  Delay = 0x5851f42d4c957f2dULL,
  Theta = 0x14057b7ef767814fULL,
  Replica = 0x2545f4914f6cdd1dULL,
};

inline constexpr std::uint64_t counter_hash(std::uint64_t seed, StreamTag tag, std::uint64_t t,
                                            std::uint64_t index) noexcept {
  std::uint64_t h = mix64(seed ^ static_cast<std::uint64_t>(tag));
  h = mix64(h + 0x9e3779b97f4a7c15ULL * (t + 1));
  h = mix64(h ^ (0xd1b54a32d192ed03ULL * (index + 1)));
  return h;
}

// Open interval (0, 1); never returns exactly 0 so log(u) is finite.
inline constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Seed for replica i of a batch: independent streams, each reproducible alone.
inline constexpr std::uint64_t replica_seed(std::uint64_t seed_base, std::uint64_t i) noexcept {
  return seed_base + i;
}

// Per-step randomness for theta_t. Draws are consumed in call order.
class ThetaStream {
 public:
  constexpr ThetaStream(std::uint64_t seed, std::uint64_t t) noexcept : seed_(seed), t_(t) {}

  constexpr std::uint64_t next_u64() noexcept {
    return counter_hash(seed_, StreamTag::Theta, t_, counter_++);
  }

  constexpr double uniform01() noexcept { return to_unit_open(next_u64()); }

  // Uniform on [0, n), n >= 1. Lemire's multiply-shift with rejection.
  std::uint64_t uniform_below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    for (;;) {
      const std::uint64_t x = next_u64();
      const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= n) return static_cast<std::uint64_t>(m >> 64);
      const std::uint64_t threshold = (0 - n) % n;
      if (low >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  constexpr std::uint64_t draws_used() const noexcept { return counter_; }
  constexpr std::uint64_t time() const noexcept { return t_; }

 private:
  std::uint64_t seed_;
  std::uint64_t t_;
  std::uint64_t counter_ = 0;
};

}  // namespace acm
