#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltc/codec.hpp"
#include "ltc/lattice.hpp"
#include "ltc/rng.hpp"
#include "ltc/stats.hpp"

namespace ltc {

// ---- shared-dither construction (scalar transforms around a lattice) ----

enum class SdBranch { PerceptionActive, PerceptionInactive };

struct SDConstruction {
  SdBranch branch = SdBranch::PerceptionActive;
  double lattice_second_moment = 0.0;  // eta^2, or 1 / (1/D - 1/sigma^2)
  double analysis_scale = 1.0;
  double synthesis_scale = 0.0;        // (sigma - sqrt P) / sqrt(sigma^2 + eta^2), or (sigma^2 - D) / sigma^2
};

/// Requires P in [0, sigma2] and D in (0, 2 sigma2]; throws DomainError naming
/// the branch when its parameters are not finite and positive.
SDConstruction sd_params(double sigma2, double D, double P);

// ---- private-dither construction: xhat = beta (Q(alpha x) + s u) ----

struct PDConstruction {
  double nu = 0.0;
  double alpha = 0.0;
  double beta = 1.0;
  double s = 1.0;
  double lattice_second_moment = 0.0;  // (sigma^2 - nu) nu / sigma^2
  double constraint_residual = 0.0;         // (sigma^2-nu) + s^2 (sigma^2-nu) nu / sigma^2 - sigma^2 / beta^2
};

/// nu = D/2, beta = 1, s = sigma / sqrt(sigma^2 - D/2). D in (0, 2 sigma2).
PDConstruction pd_params(double sigma2, double D);

/// General triple: given nu in (0, sigma2) and s >= 1, beta is solved from the
/// constraint (sigma^2 - nu) + s^2 (sigma^2 - nu) nu / sigma^2 = sigma^2 / beta^2.
PDConstruction pd_params_general(double sigma2, double nu, double s);

double pd_constraint_residual(double sigma2, double nu, double s, double beta);

// ---- codec builders ----

/// A lattice of `family` scaled so that its Monte-Carlo second moment hits
/// `target`; returns the measured second moment of the scaled lattice too.
struct CalibratedLattice {
  Lattice lattice;
  Estimate second_moment;
};
CalibratedLattice calibrate_lattice(LatticeFamily family, int n, double target_second_moment,
                                    std::size_t num_samples, Rng& rng);

struct BuiltCodec {
  CodecConfig config;
  Estimate lattice_second_moment;
};

BuiltCodec build_sd_codec(LatticeFamily family, int n, double sigma2, const SDConstruction& c,
                          std::size_t calibration_samples, Rng& rng);
BuiltCodec build_pd_codec(LatticeFamily family, int n, double sigma2, const PDConstruction& c,
                          std::size_t calibration_samples, Rng& rng);

/// QSD around the SD lattice: identity analysis, fine dither multiplier s, and
/// a synthesis gain chosen so the reconstruction variance equals
/// `target_marginal_var` on a pilot run.
BuiltCodec build_qsd_codec(LatticeFamily family, int n, double sigma2, const SDConstruction& c, int gamma,
                           double s, double target_marginal_var, std::size_t calibration_samples, Rng& rng);

/// Gain g such that Var(g * t) = target per dimension, where t is the
/// pre-synthesis signal of `config` (synthesis gain is ignored) on a pilot run.
double variance_matched_gain(const CodecConfig& config, const GaussianSpec& source, double target_var,
                             std::size_t n_pilot, std::uint64_t seed);

// ---- lattice Gaussian ----

// Exact sampler for the lattice Gaussian D_{Lambda, c, sigma^2}: every point
// within radius R of c is enumerated once, weighted by exp(-||x - c||^2 / (2 sigma^2)),
// and drawn categorically. R^2 = sigma^2 (n + 2 sqrt(n t) + 2 t) with
// t = ln(10^10), the chi-square tail bound for 10^-10 of Gaussian mass.
class LatticeGaussianSampler {
 public:
  LatticeGaussianSampler(const Lattice& lattice, std::span<const double> center, double sigma2,
                         std::size_t cap = 10'000'000);

  LatticePoint sample(Rng& rng) const;

  std::size_t support_size() const { return cumulative_.size(); }
  double radius() const { return radius_; }
  /// Gaussian tail mass outside the enumeration radius (the documented truncation bound).
  double truncation_bound() const { return truncation_bound_; }

 private:
  Lattice lattice_;
  std::vector<std::vector<std::int64_t>> coords_;
  std::vector<double> cumulative_;
  double radius_ = 0.0;
  double truncation_bound_ = 0.0;
};

LatticePoint lattice_gaussian_sample(const Lattice& lattice, std::span<const double> center, double sigma2,
                                     Rng& rng);

// ---- flatness factor ----

struct FlatnessEstimate {
  double value = 0.0;            // max over probes of |V rho_gamma(x) - 1|; a lower bound on the true max
  std::vector<double> argmax;
  std::size_t probes = 0;
  std::size_t terms = 0;         // lattice points summed per probe
  bool dual_sum = false;         // Poisson-summed over the dual lattice
  double truncation_bound = 0.0; // bound on the neglected part of each sum
};

/// Evaluates V rho_{gamma,Lambda}(x) - 1 at the origin, n_probe cell-uniform
/// points and a deep-hole proxy (the largest probe pushed to the cell
/// boundary). Uses the primal sum or the Poisson dual sum
/// sum_{mu in Lambda*} exp(-2 pi^2 gamma^2 ||mu||^2) cos(2 pi <mu, x>),
/// whichever needs fewer terms.
FlatnessEstimate flatness_estimate(const Lattice& lattice, double gamma, std::size_t n_probe, Rng& rng,
                                   std::size_t cap = 10'000'000);

}  // namespace ltc
