#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace polariton {

/// Identifier recorded with every sample set; bump when any draw changes.
inline constexpr std::string_view kGeneratorId = "mt19937_64+splitmix64/box-muller/v1";

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for (master, a, b). Frozen: sweeps depend on it for
/// reproducibility across machines and thread counts.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

/// Portable variate generation on top of std::mt19937_64, whose output
/// sequence is fixed by the standard (std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on (0, 1].
  double uniform();
  double standard_normal();
  double exponential();
  bool coin() { return (engine_() >> 63) != 0; }
  bool bernoulli(double p) { return uniform() <= p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace polariton
