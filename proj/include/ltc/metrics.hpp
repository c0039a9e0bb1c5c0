#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ltc/rng.hpp"
#include "ltc/stats.hpp"

namespace ltc {

/// Row-major batch of `size()` vectors of length `dim`.
struct SampleBatch {
  int dim = 0;
  std::vector<double> data;

  SampleBatch() = default;
  SampleBatch(int d, std::size_t rows) : dim(d), data(rows * static_cast<std::size_t>(d), 0.0) {}

  std::size_t size() const { return dim ? data.size() / static_cast<std::size_t>(dim) : 0; }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> diag_cov;

  static GaussianSpec isotropic(int n, double variance, double mean_value = 0.0);
  int dim() const { return static_cast<int>(mean.size()); }
  /// Throws InputError unless lengths match and variances are positive and finite.
  void validate() const;
  void sample(Rng& rng, std::span<double> out) const;
  SampleBatch sample(Rng& rng, std::size_t count) const;
};

enum class PerceptionMetric { SlicedW2Sq, ExactGaussianW2Sq };

std::string_view to_string(PerceptionMetric metric);
PerceptionMetric parse_perception_metric(std::string_view name);

/// Mean of (1/n)||x - xhat||^2 over the batch, with its standard error.
Estimate mse_per_dim(const SampleBatch& x, const SampleBatch& xhat);

/// (1/n) sum_i [(m_a - m_b)^2 + (sd_a - sd_b)^2] for diagonal Gaussians.
double gaussian_w2sq_per_dim(const GaussianSpec& a, const GaussianSpec& b);

/// Squared sliced 2-Wasserstein distance between two equal-size empirical
/// measures: the mean over random unit directions of the 1-D squared W2 of the
/// projections (sorted coupling). Unit directions make this a per-dimension
/// quantity already. SE is taken across projections.
Estimate sliced_w2sq(const SampleBatch& a, const SampleBatch& b, int n_projections, Rng& rng);

/// Per-dimension W2^2 between `reference` and the diagonal Gaussian fitted to
/// the empirical per-coordinate moments of `samples`; SE by a 10-block jackknife.
Estimate empirical_gaussian_w2sq(const GaussianSpec& reference, const SampleBatch& samples);

/// Gaussian rate-distortion-perception function in bits (squared-error
/// distortion D, squared-W2 perception P). P may be +infinity.
double gaussian_rdp(double sigma2, double D, double P);

/// Optimal jointly Gaussian reconstruction channel for gaussian_rdp.
struct GaussianChannel {
  double marginal_var = 0.0;  // Var(Xhat)
  double cross_cov = 0.0;     // Cov(X, Xhat)
  bool perception_active = false;
};
GaussianChannel gaussian_rdp_channel(double sigma2, double D, double P);

}  // namespace ltc
