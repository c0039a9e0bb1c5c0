#include "ltc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "ltc/enumeration.hpp"
#include "ltc/errors.hpp"
#include "ltc/parallel.hpp"

namespace ltc {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Squared radius holding all but exp(-t) of a chi-square(n) scaled by var.
double chi_square_radius2(int n, double var, double t) {
  const double dn = static_cast<double>(n);
  return var * (dn + 2.0 * std::sqrt(dn * t) + 2.0 * t);
}

double log_ball_volume(int n, double radius) {
  const double dn = static_cast<double>(n);
  return 0.5 * dn * std::log(std::numbers::pi) + dn * std::log(radius) - std::lgamma(0.5 * dn + 1.0);
}

}  // namespace

SDConstruction sd_params(double sigma2, double D, double P) {
  if (!positive_finite(sigma2)) throw DomainError("sd_params: sigma2 must be positive and finite");
  if (!(std::isfinite(D) && D > 0.0 && D <= 2.0 * sigma2)) {
    throw DomainError(fmt::format("sd_params: D = {} outside (0, 2 sigma2 = {}]", D, 2.0 * sigma2));
  }
  if (!(P >= 0.0 && P <= sigma2)) {
    throw DomainError(fmt::format("sd_params: P = {} outside [0, sigma2 = {}]", P, sigma2));
  }
  const double sigma = std::sqrt(sigma2);
  SDConstruction c;
  if (std::sqrt(P) < sigma - std::sqrt(std::abs(sigma2 - D))) {
    c.branch = SdBranch::PerceptionActive;
    const double m = (sigma - std::sqrt(P)) * (sigma - std::sqrt(P));
    const double half = 0.5 * (sigma2 + m - D);
    const double eta2 = sigma2 * (sigma2 * m / (half * half) - 1.0);
    if (!positive_finite(eta2)) {
      throw DomainError(fmt::format(
          "sd_params: perception-active branch gives eta^2 = {} (sigma2={}, D={}, P={}); need eta^2 > 0", eta2,
          sigma2, D, P));
    }
    c.lattice_second_moment = eta2;
    c.synthesis_scale = (sigma - std::sqrt(P)) / std::sqrt(sigma2 + eta2);
  } else {
    c.branch = SdBranch::PerceptionInactive;
    if (!(D < sigma2)) {
      throw DomainError(fmt::format(
          "sd_params: perception-inactive branch needs D < sigma2 (D={}, sigma2={}); zero rate suffices", D,
          sigma2));
    }
    c.lattice_second_moment = 1.0 / (1.0 / D - 1.0 / sigma2);
    c.synthesis_scale = (sigma2 - D) / sigma2;
  }
  c.analysis_scale = 1.0;
  return c;
}

double pd_constraint_residual(double sigma2, double nu, double s, double beta) {
  const double a = sigma2 - nu;
  return a + s * s * a * nu / sigma2 - sigma2 / (beta * beta);
}

PDConstruction pd_params(double sigma2, double D) {
  if (!positive_finite(sigma2)) throw DomainError("pd_params: sigma2 must be positive and finite");
  if (!(std::isfinite(D) && D > 0.0 && D < 2.0 * sigma2)) {
    throw DomainError(fmt::format("pd_params: D = {} outside (0, 2 sigma2 = {})", D, 2.0 * sigma2));
  }
  PDConstruction c;
  c.nu = 0.5 * D;
  c.alpha = (sigma2 - c.nu) / sigma2;
  c.beta = 1.0;
  c.s = std::sqrt(sigma2 / (sigma2 - c.nu));
  c.lattice_second_moment = (sigma2 - c.nu) * c.nu / sigma2;
  c.constraint_residual = pd_constraint_residual(sigma2, c.nu, c.s, c.beta);
  return c;
}

PDConstruction pd_params_general(double sigma2, double nu, double s) {
  if (!positive_finite(sigma2)) throw DomainError("pd_params_general: sigma2 must be positive and finite");
  if (!(nu > 0.0 && nu < sigma2)) {
    throw DomainError(fmt::format("pd_params_general: nu = {} outside (0, sigma2 = {})", nu, sigma2));
  }
  if (!(std::isfinite(s) && s >= 1.0)) throw DomainError(fmt::format("pd_params_general: s = {} < 1", s));
  PDConstruction c;
  c.nu = nu;
  c.alpha = (sigma2 - nu) / sigma2;
  c.s = s;
  c.beta = std::sqrt(sigma2 / ((sigma2 - nu) * (1.0 + s * s * nu / sigma2)));
  c.lattice_second_moment = (sigma2 - nu) * nu / sigma2;
  c.constraint_residual = pd_constraint_residual(sigma2, nu, s, c.beta);
  if (std::abs(c.constraint_residual) >= 1e-9) {
    throw NumericError(fmt::format("pd_params_general: constraint residual {} too large", c.constraint_residual));
  }
  return c;
}

CalibratedLattice calibrate_lattice(LatticeFamily family, int n, double target_second_moment,
                                    std::size_t num_samples, Rng& rng) {
  if (!positive_finite(target_second_moment)) {
    throw ConfigError("calibrate_lattice: target second moment must be positive and finite");
  }
  const Lattice unit = build_lattice(family, n, 1.0);
  const Estimate base = second_moment_mc(unit, num_samples, rng);
  const Lattice scaled = unit.scaled(std::sqrt(target_second_moment / base.value));
  const Estimate measured = second_moment_mc(scaled, num_samples, rng);
  if (std::abs(measured.value - target_second_moment) > 0.01 * target_second_moment) {
    throw NumericError(fmt::format("calibrate_lattice: measured second moment {} misses target {} by more than 1%",
                                   measured.value, target_second_moment));
  }
  return {scaled, measured};
}

BuiltCodec build_sd_codec(LatticeFamily family, int n, double sigma2, const SDConstruction& c,
                          std::size_t calibration_samples, Rng& rng) {
  auto cal = calibrate_lattice(family, n, c.lattice_second_moment, calibration_samples, rng);
  const auto source = GaussianSpec::isotropic(n, sigma2);
  return {CodecConfig::with_gains(CodecMode::SD, cal.lattice, source, c.analysis_scale, c.synthesis_scale),
          cal.second_moment};
}

BuiltCodec build_pd_codec(LatticeFamily family, int n, double sigma2, const PDConstruction& c,
                          std::size_t calibration_samples, Rng& rng) {
  auto cal = calibrate_lattice(family, n, c.lattice_second_moment, calibration_samples, rng);
  const auto source = GaussianSpec::isotropic(n, sigma2);
  return {CodecConfig::with_gains(CodecMode::PD, cal.lattice, source, c.alpha, c.beta, c.s), cal.second_moment};
}

double variance_matched_gain(const CodecConfig& config, const GaussianSpec& source, double target_var,
                             std::size_t n_pilot, std::uint64_t seed) {
  if (!positive_finite(target_var)) throw ConfigError("variance_matched_gain: target variance must be positive");
  CodecConfig unit = config;
  unit.synthesis = AffineTransform::identity(config.lattice.dim());
  const auto batch = roundtrip_batch(unit, source, n_pilot, seed);
  const int d = batch.reconstruction.dim;
  double total = 0.0;
  for (int j = 0; j < d; ++j) {
    RunningStats stats;
    for (std::size_t i = 0; i < batch.reconstruction.size(); ++i) stats.add(batch.reconstruction.row(i)[j]);
    total += stats.variance();
  }
  const double var = total / d;
  if (!positive_finite(var)) throw NumericError("variance_matched_gain: pilot variance is not positive");
  return std::sqrt(target_var / var);
}

BuiltCodec build_qsd_codec(LatticeFamily family, int n, double sigma2, const SDConstruction& c, int gamma,
                           double s, double target_marginal_var, std::size_t calibration_samples, Rng& rng) {
  auto cal = calibrate_lattice(family, n, c.lattice_second_moment, calibration_samples, rng);
  const auto source = GaussianSpec::isotropic(n, sigma2);
  auto config = CodecConfig::with_gains(CodecMode::QSD, cal.lattice, source, 1.0, 1.0, s, gamma);
  const double g = variance_matched_gain(config, source, target_marginal_var, calibration_samples, rng.next_u64());
  config.synthesis = AffineTransform::scalar(n, g);
  return {config, cal.second_moment};
}

LatticeGaussianSampler::LatticeGaussianSampler(const Lattice& lattice, std::span<const double> center,
                                               double sigma2, std::size_t cap)
    : lattice_(lattice) {
  const int n = lattice.dim();
  if (n > 16) throw ConfigError(fmt::format("lattice Gaussian sampling supports n <= 16, got {}", n));
  if (!positive_finite(sigma2)) throw ConfigError("lattice Gaussian sampling needs sigma2 > 0");
  const auto nearest = nearest_point(lattice, center);
  const double d_min2 = squared_distance(center, nearest.embedding);

  constexpr double kTailExponent = 23.025850929940457;  // ln(1e10)
  const double r2 = chi_square_radius2(n, sigma2, kTailExponent);
  radius_ = std::sqrt(std::max(r2, d_min2 * (1.0 + 1e-9) + 1e-12));
  truncation_bound_ = std::exp(-kTailExponent);

  BallEnumerator enumerator(lattice.generator());
  double total = 0.0;
  enumerator.for_each_point(
      center, radius_,
      [&](std::span<const std::int64_t> k, double d2) {
        total += std::exp(-(d2 - d_min2) / (2.0 * sigma2));
        coords_.emplace_back(k.begin(), k.end());
        cumulative_.push_back(total);
      },
      cap);
  if (coords_.empty() || !(total > 0.0)) throw NumericError("lattice Gaussian sampler found no support");
  for (double& c : cumulative_) c /= total;
}

LatticePoint LatticeGaussianSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  const auto& k = coords_[static_cast<std::size_t>(it - cumulative_.begin())];
  return {k, lattice_.embed(k)};
}

LatticePoint lattice_gaussian_sample(const Lattice& lattice, std::span<const double> center, double sigma2,
                                     Rng& rng) {
  return LatticeGaussianSampler(lattice, center, sigma2).sample(rng);
}

FlatnessEstimate flatness_estimate(const Lattice& lattice, double gamma, std::size_t n_probe, Rng& rng,
                                   std::size_t cap) {
  if (!positive_finite(gamma)) throw ConfigError("flatness_estimate: gamma must be positive");
  const int n = lattice.dim();
  const double V = lattice.volume();
  constexpr double kTailExponent = 36.841361487904734;  // ln(1e16)

  // Probes: origin, cell-uniform points, and the largest probe pushed out to the cell boundary.
  std::vector<std::vector<double>> probes;
  probes.emplace_back(n, 0.0);
  std::vector<double> u(n), q(n);
  double best_norm = -1.0;
  std::vector<double> farthest(n, 0.0);
  for (std::size_t i = 0; i < n_probe; ++i) {
    lattice.sample_cell_uniform(rng, u);
    const double norm = squared_distance(u, std::vector<double>(n, 0.0));
    if (norm > best_norm) {
      best_norm = norm;
      farthest = u;
    }
    probes.push_back(u);
  }
  if (best_norm > 0.0) {
    auto in_cell = [&](double t) {
      for (int j = 0; j < n; ++j) u[j] = t * farthest[j];
      lattice.quantize(u, q);
      return std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; });
    };
    double lo = 1.0;
    double hi = 2.0;
    while (in_cell(hi)) hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (in_cell(mid) ? lo : hi) = mid;
    }
    for (int j = 0; j < n; ++j) u[j] = lo * farthest[j];
    probes.push_back(u);
  }

  // Term counts for the two representations, from ball volume over cell volume.
  const double primal_var = gamma * gamma;
  const double dual_var = 1.0 / (4.0 * std::numbers::pi * std::numbers::pi * gamma * gamma);
  const double r_primal = std::sqrt(chi_square_radius2(n, primal_var, kTailExponent));
  const double r_dual = std::sqrt(chi_square_radius2(n, dual_var, kTailExponent));
  const double log_primal_terms = log_ball_volume(n, r_primal) - std::log(V);
  const double log_dual_terms = log_ball_volume(n, r_dual) + std::log(V);

  FlatnessEstimate result;
  result.probes = probes.size();
  result.dual_sum = log_dual_terms <= log_primal_terms;
  std::vector<double> values(probes.size(), 0.0);

  if (result.dual_sum) {
    // Dual basis: rows of G^{-T}; the points G^{-1} j pair with G^T k to integers.
    const Eigen::MatrixXd dual = lattice.generator().inverse().transpose();
    BallEnumerator enumerator(dual);
    std::vector<double> mu;
    std::vector<double> weight;
    const std::vector<double> origin(n, 0.0);
    result.terms = enumerator.for_each_point(
        origin, r_dual,
        [&](std::span<const std::int64_t> k, double d2) {
          for (int j = 0; j < n; ++j) {
            double v = 0.0;
            for (int i = 0; i < n; ++i) v += dual(i, j) * static_cast<double>(k[i]);
            mu.push_back(v);
          }
          weight.push_back(std::exp(-2.0 * std::numbers::pi * std::numbers::pi * gamma * gamma * d2));
        },
        cap);
    parallel_for(probes.size(), [&](std::size_t p) {
      const auto& x = probes[p];
      double sum = 0.0;
      for (std::size_t t = 0; t < weight.size(); ++t) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += mu[t * n + j] * x[j];
        sum += weight[t] * std::cos(2.0 * std::numbers::pi * dot);
      }
      values[p] = sum - 1.0;
    });
    // Dual Gaussian mass is (2 pi dual_var)^{n/2} V; exp(-t) of it lies outside the ball.
    result.truncation_bound =
        std::exp(-kTailExponent + 0.5 * n * std::log(2.0 * std::numbers::pi * dual_var) + std::log(V));
  } else {
    BallEnumerator enumerator(lattice.generator());
    const double log_norm = std::log(V) - 0.5 * n * std::log(2.0 * std::numbers::pi * primal_var);
    std::vector<std::size_t> counts(probes.size(), 0);
    parallel_for(probes.size(), [&](std::size_t p) {
      double sum = 0.0;
      counts[p] = enumerator.for_each_point(
          probes[p], r_primal, [&](std::span<const std::int64_t>, double d2) { sum += std::exp(-d2 / (2.0 * primal_var)); },
          cap);
      values[p] = std::exp(log_norm) * sum - 1.0;
    });
    result.terms = *std::max_element(counts.begin(), counts.end());
    result.truncation_bound = std::exp(-kTailExponent);
  }

  std::size_t arg = 0;
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (std::abs(values[p]) > std::abs(values[arg])) arg = p;
  }
  result.value = std::abs(values[arg]);
  result.argmax = probes[arg];
  if (!result.dual_sum) result.truncation_bound *= 1.0 + result.value;
  return result;
}

}  // namespace ltc
