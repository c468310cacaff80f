#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ocusum {

/// One step of the splitmix64 sequence. Used for seed mixing only.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a master seed, a stream tag
/// and an index. Every source of randomness in the library obtains its
/// seed through this function, so results depend only on the master
/// seed and the (stream, index) coordinates, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
  std::uint64_t s = master;
  (void)splitmix64_next(s);
  s ^= 0xA0761D6478BD642Full * (stream + 1);
  (void)splitmix64_next(s);
  s ^= 0xE7037ED1A0B428DBull * (index + 1);
  std::uint64_t t = s;
  return splitmix64_next(t);
}

/// Seed-stream tags (second argument of derive_seed).
namespace seed_stream {
inline constexpr std::uint64_t experiment = 1;
inline constexpr std::uint64_t calibration = 2;
inline constexpr std::uint64_t sweep_cell = 3;
}  // namespace seed_stream

/// Deterministic random source: std::mt19937_64 (bit-exact across
/// implementations) plus a hand-rolled Box-Muller normal sampler, since
/// std::normal_distribution is not portable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double strictly inside (0, 1).
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ocusum
