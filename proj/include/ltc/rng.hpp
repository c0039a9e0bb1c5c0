#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace ltc {

// Seed splitting rule. A substream seed is
//   splitmix64(splitmix64(master ^ fnv1a64(name)) + index)
// so any (master, name, index) triple can be regenerated in isolation.
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

// Deterministic random source. The engine is std::mt19937_64 (fully specified
// by the standard); all distributions are implemented here rather than with
// <random>'s implementation-defined ones so streams are bit-stable across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
    return Rng(derive_seed(master, name, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double exponential();

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }
  void fill_uniform(std::span<double> out) {
    for (double& v : out) v = uniform();
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ltc
