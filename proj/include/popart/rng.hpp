#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace popart {

/// Counter-based random numbers: every draw is a pure function of
/// (seed, stream, counter), so simulations replay exactly regardless of
/// call order or threading.
namespace rng {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t hash3(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) noexcept {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (stream * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (counter + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

/// Uniform in the open interval (0, 1).
inline double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  return (static_cast<double>(hash3(seed, stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two independent counter slots.
inline double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  const double u1 = uniform_at(seed, stream, 2 * counter);
  const double u2 = uniform_at(seed, stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Named streams so independent consumers of one seed never collide.
enum Stream : std::uint64_t {
  kRewardNoise = 1,
  kExplorationArm = 2,
  kDesignRestart = 3,
  kInstance = 4,
  kSampleArm = 5,
  kSampleNoise = 6,
  kOracle = 7,
  kTest = 99,
};

}  // namespace rng

/// Sequential facade over the counter generator.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  double uniform() { return rng::uniform_at(seed_, stream_, counter_++); }
  double normal() { return rng::normal_at(seed_, stream_, counter_++); }
  double exponential() { return -std::log(uniform()); }

  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<double>(hi - lo + 1);
    auto k = static_cast<std::int64_t>(std::floor(uniform() * span));
    if (k > hi - lo) k = hi - lo;
    return lo + k;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace popart
