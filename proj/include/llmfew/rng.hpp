#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace llmfew {

// FNV-1a, 64-bit.
std::uint64_t stable_hash(std::string_view text);

std::uint64_t splitmix64(std::uint64_t x);

// Portable pseudo-random source. The engine (mt19937_64) has a sequence
// fixed by the standard; the distributions below are implemented here
// because the standard library's are implementation-defined.
// Version tag: "llmfew-rng-1".
class Rng {
 public:
  static constexpr std::string_view kVersion = "llmfew-rng-1";

  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::string_view stream)
      : engine_(splitmix64(seed ^ stable_hash(stream))) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n), rejection sampled.
  std::size_t index(std::size_t n);

  // Uniform real in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace llmfew
