#include "ltc/metrics.hpp"

#include <algorithm>
#include <string>

#include "ltc/errors.hpp"
#include "ltc/parallel.hpp"

namespace ltc {

GaussianSpec GaussianSpec::isotropic(int n, double variance, double mean_value) {
  GaussianSpec g;
  g.mean.assign(static_cast<std::size_t>(n), mean_value);
  g.diag_cov.assign(static_cast<std::size_t>(n), variance);
  return g;
}

void GaussianSpec::validate() const {
  if (mean.empty() || mean.size() != diag_cov.size()) {
    throw InputError("Gaussian spec: mean and diag_cov must be non-empty and of equal length");
  }
  for (double v : diag_cov) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("Gaussian spec: variances must be positive");
  }
  for (double m : mean) {
    if (!std::isfinite(m)) throw InputError("Gaussian spec: non-finite mean");
  }
}

void GaussianSpec::sample(Rng& rng, std::span<double> out) const {
  for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] + std::sqrt(diag_cov[i]) * rng.normal();
}

SampleBatch GaussianSpec::sample(Rng& rng, std::size_t count) const {
  SampleBatch b(dim(), count);
  for (std::size_t r = 0; r < count; ++r) sample(rng, b.row(r));
  return b;
}

std::string_view to_string(PerceptionMetric metric) {
  return metric == PerceptionMetric::SlicedW2Sq ? "sliced_w2sq" : "exact_gaussian_w2sq";
}

PerceptionMetric parse_perception_metric(std::string_view name) {
  if (name == "sliced_w2sq" || name == "sliced") return PerceptionMetric::SlicedW2Sq;
  if (name == "exact_gaussian_w2sq" || name == "gaussian") return PerceptionMetric::ExactGaussianW2Sq;
  throw ConfigError("unknown perception metric '" + std::string(name) + "'");
}

Estimate mse_per_dim(const SampleBatch& x, const SampleBatch& xhat) {
  if (x.dim != xhat.dim || x.size() != xhat.size()) throw InputError("mse_per_dim: shape mismatch");
  RunningStats stats;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto a = x.row(r);
    const auto b = xhat.row(r);
    double s = 0.0;
    for (int i = 0; i < x.dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    stats.add(s / x.dim);
  }
  return stats.estimate();
}

double gaussian_w2sq_per_dim(const GaussianSpec& a, const GaussianSpec& b) {
  if (a.dim() != b.dim()) throw InputError("gaussian_w2sq_per_dim: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double dm = a.mean[i] - b.mean[i];
    const double ds = std::sqrt(a.diag_cov[i]) - std::sqrt(b.diag_cov[i]);
    s += dm * dm + ds * ds;
  }
  return s / a.dim();
}

Estimate sliced_w2sq(const SampleBatch& a, const SampleBatch& b, int n_projections, Rng& rng) {
  if (a.dim != b.dim) throw InputError("sliced_w2sq: dimension mismatch");
  if (a.size() != b.size()) throw ContractError("sliced_w2sq: sample sets must have equal size");
  if (n_projections < 1) throw ContractError("sliced_w2sq: need at least one projection");
  const int n = a.dim;
  const std::size_t count = a.size();
  std::vector<std::vector<double>> directions(static_cast<std::size_t>(n_projections),
                                              std::vector<double>(static_cast<std::size_t>(n)));
  for (auto& d : directions) {
    double norm = 0.0;
    do {
      rng.fill_normal(d);
      norm = 0.0;
      for (double v : d) norm += v * v;
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : d) v /= norm;
  }
  std::vector<double> per_projection(static_cast<std::size_t>(n_projections));
  parallel_for(per_projection.size(), [&](std::size_t p) {
    const auto& d = directions[p];
    std::vector<double> pa(count);
    std::vector<double> pb(count);
    for (std::size_t r = 0; r < count; ++r) {
      const auto ra = a.row(r);
      const auto rb = b.row(r);
      double sa = 0.0;
      double sb = 0.0;
      for (int i = 0; i < n; ++i) {
        sa += d[i] * ra[i];
        sb += d[i] * rb[i];
      }
      pa[r] = sa;
      pb[r] = sb;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double s = 0.0;
    for (std::size_t r = 0; r < count; ++r) s += (pa[r] - pb[r]) * (pa[r] - pb[r]);
    per_projection[p] = count ? s / static_cast<double>(count) : 0.0;
  });
  return mean_and_se(per_projection);
}

Estimate empirical_gaussian_w2sq(const GaussianSpec& reference, const SampleBatch& samples) {
  if (reference.dim() != samples.dim) throw InputError("empirical_gaussian_w2sq: dimension mismatch");
  const int n = samples.dim;
  const std::size_t count = samples.size();
  if (count < 20) throw ContractError("empirical_gaussian_w2sq: need at least 20 samples");
  constexpr int blocks = 10;
  // Per-block, per-coordinate sums so each leave-one-block-out fit is cheap.
  std::vector<RunningStats> block_stats(static_cast<std::size_t>(blocks * n));
  for (std::size_t r = 0; r < count; ++r) {
    const int blk = static_cast<int>(r * blocks / count);
    const auto row = samples.row(r);
    for (int i = 0; i < n; ++i) block_stats[static_cast<std::size_t>(blk * n + i)].add(row[i]);
  }
  auto stat = [&](int excluded) {
    GaussianSpec fit;
    fit.mean.resize(static_cast<std::size_t>(n));
    fit.diag_cov.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      RunningStats merged;
      for (int b = 0; b < blocks; ++b) {
        if (b != excluded) merged.merge(block_stats[static_cast<std::size_t>(b * n + i)]);
      }
      fit.mean[i] = merged.mean();
      fit.diag_cov[i] = merged.variance();
    }
    return gaussian_w2sq_per_dim(reference, fit);
  };
  return jackknife(blocks, stat);
}

namespace {

void check_rdp_domain(double sigma2, double D, double P) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("gaussian_rdp: sigma2 must be positive");
  if (!(D > 0.0) || D > 2.0 * sigma2) {
    throw DomainError("gaussian_rdp: D = " + std::to_string(D) + " outside (0, 2 sigma2]");
  }
  if (!(P >= 0.0)) throw DomainError("gaussian_rdp: P must be >= 0");
}

bool perception_active(double sigma2, double D, double P) {
  const double sigma = std::sqrt(sigma2);
  return std::isfinite(P) && std::sqrt(P) < sigma - std::sqrt(std::abs(sigma2 - D));
}

}  // namespace

double gaussian_rdp(double sigma2, double D, double P) {
  check_rdp_domain(sigma2, D, P);
  if (perception_active(sigma2, D, P)) {
    const double root = std::sqrt(sigma2) - std::sqrt(P);
    const double m = root * root;
    const double half = 0.5 * (sigma2 + m - D);
    return 0.5 * std::log2(sigma2 * m / (sigma2 * m - half * half));
  }
  return std::max(0.5 * std::log2(sigma2 / D), 0.0);
}

GaussianChannel gaussian_rdp_channel(double sigma2, double D, double P) {
  check_rdp_domain(sigma2, D, P);
  GaussianChannel ch;
  if (perception_active(sigma2, D, P)) {
    const double root = std::sqrt(sigma2) - std::sqrt(P);
    ch.marginal_var = root * root;
    ch.cross_cov = std::max(0.5 * (sigma2 + ch.marginal_var - D), 0.0);
    ch.perception_active = true;
  } else {
    ch.marginal_var = std::max(sigma2 - D, 0.0);
    ch.cross_cov = ch.marginal_var;
  }
  return ch;
}

}  // namespace ltc
