#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/codec.hpp"
#include "ltc/metrics.hpp"
#include "ltc/rng.hpp"

namespace ltc {

// Reverse channel coding of the optimal Gaussian RDP channel. The source is
// i.i.d. N(mu, sigma2) per coordinate; blocks of `block_dim` coordinates are
// coded jointly with product densities.
struct RCCConfig {
  double sigma2 = 1.0;
  double mean = 0.0;
  double target_D = 0.5;
  double target_P = 0.0;  // +infinity for no perception constraint
  std::size_t codebook_size = 10000;
  int block_dim = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::uint64_t kZipfSupport = 1'000'000;

struct PfrResult {
  std::uint64_t index = 1;  // 1-based position in the candidate list
  std::vector<double> xhat;
  std::uint64_t candidates_examined = 0;
};

/// Poisson functional representation: K = argmin_i ln W_i - ln r(xhat_i | x),
/// W_i the arrival times of a unit-rate Poisson process and xhat_i ~ Q, both
/// drawn from `shared`. Stops once no later candidate can win.
PfrResult pfr_encode(const RCCConfig& config, std::span<const double> x, Rng& shared);

/// Replays the shared stream to recover candidate `index`.
std::vector<double> pfr_decode(const RCCConfig& config, std::uint64_t index, Rng& shared);

/// Zipf exponent 1 + 1 / (I + e^-1 log2 e + 1).
double zipf_exponent(double I_bits);

/// Mean code length -log2 q(K) under Zipf(lambda) normalised on {1..10^6}.
Estimate zipf_rate(std::span<const std::uint64_t> indices, double I_bits);

struct RCCReport {
  RDPoint point;             // rate in bits per dimension
  double xhat_variance = 0;  // pooled empirical Var(xhat)
  double xhat_variance_se = 0;
  double mutual_information_bits = 0;  // per block
  double mean_candidates = 0;
};

/// Per-dim distortion, exact-Gaussian W2^2 perception from the empirical
/// moments of xhat, and the Zipf rate with I = block_dim * R(D, P).
RCCReport rcc_evaluate(const RCCConfig& config, std::size_t n_trials, Rng& rng);

}  // namespace ltc
