#include "ltc/rcc.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "ltc/errors.hpp"
#include "ltc/parallel.hpp"

namespace ltc {

namespace {

struct ScalarChannel {
  double gain = 0.0;      // E[xhat - mu | x] = gain * (x - mu)
  double cond_var = 0.0;  // Var(xhat | x)
  double marginal_var = 0.0;
};

ScalarChannel channel_for(const RCCConfig& config) {
  const GaussianChannel ch = gaussian_rdp_channel(config.sigma2, config.target_D, config.target_P);
  ScalarChannel s;
  s.marginal_var = ch.marginal_var;
  s.gain = ch.cross_cov / config.sigma2;
  s.cond_var = std::max(ch.marginal_var - ch.cross_cov * ch.cross_cov / config.sigma2, 0.0);
  return s;
}

void draw_candidate(const RCCConfig& config, const ScalarChannel& ch, Rng& shared, double& w,
                    std::span<double> xhat) {
  w += shared.exponential();
  const double sd = std::sqrt(ch.marginal_var);
  for (double& v : xhat) v = config.mean + sd * shared.normal();
}

}  // namespace

void RCCConfig::validate() const {
  if (codebook_size < 1) throw ConfigError("RCC codebook size must be >= 1");
  if (block_dim < 1) throw ConfigError("RCC block dimension must be >= 1");
  if (!std::isfinite(mean)) throw ConfigError("RCC source mean must be finite");
  gaussian_rdp(sigma2, target_D, target_P);  // domain check
}

PfrResult pfr_encode(const RCCConfig& config, std::span<const double> x, Rng& shared) {
  const ScalarChannel ch = channel_for(config);
  const std::size_t n = static_cast<std::size_t>(config.block_dim);
  if (x.size() != n) throw InputError("pfr_encode: block has wrong length");
  PfrResult best;
  best.xhat.resize(n);
  std::vector<double> cand(n);
  double w = 0.0;
  draw_candidate(config, ch, shared, w, best.xhat);
  best.candidates_examined = 1;
  // A channel independent of x has a constant density ratio: the first arrival wins.
  if (ch.gain == 0.0 || ch.cond_var <= 0.0 || ch.marginal_var <= 0.0) return best;

  const double m = ch.marginal_var;
  const double v = ch.cond_var;
  // ln r(y|x) = sum_i [ -0.5 ln(v/m) - (y_i - a x_i)^2 / (2v) + y_i^2 / (2m) ] in centred
  // coordinates; its maximum over y is attained at y_i = a x_i m / (m - v).
  double max_log_ratio = 0.0;
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) {
    centred[i] = ch.gain * (x[i] - config.mean);
    max_log_ratio += 0.5 * std::log(m / v) + centred[i] * centred[i] / (2.0 * (m - v));
  }
  auto log_ratio = [&](std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = y[i] - config.mean;
      const double d = yi - centred[i];
      s += -0.5 * std::log(v / m) - d * d / (2.0 * v) + yi * yi / (2.0 * m);
    }
    return s;
  };
  double best_score = std::log(w) - log_ratio(best.xhat);
  for (std::uint64_t i = 2; i <= config.codebook_size; ++i) {
    draw_candidate(config, ch, shared, w, cand);
    const double lw = std::log(w);
    const double score = lw - log_ratio(cand);
    best.candidates_examined = i;
    if (score < best_score) {
      best_score = score;
      best.index = i;
      best.xhat = cand;
    }
    // Later arrivals have larger W, so none can beat best_score once this holds.
    if (lw - max_log_ratio >= best_score) break;
  }
  return best;
}

std::vector<double> pfr_decode(const RCCConfig& config, std::uint64_t index, Rng& shared) {
  if (index < 1 || index > config.codebook_size) throw ProtocolError("pfr_decode: index out of range");
  const ScalarChannel ch = channel_for(config);
  std::vector<double> xhat(static_cast<std::size_t>(config.block_dim));
  double w = 0.0;
  for (std::uint64_t i = 1; i <= index; ++i) draw_candidate(config, ch, shared, w, xhat);
  return xhat;
}

double zipf_exponent(double I_bits) {
  if (!(I_bits >= 0.0)) throw DomainError("zipf_exponent: I must be >= 0");
  return 1.0 + 1.0 / (I_bits + std::numbers::log2e / std::numbers::e + 1.0);
}

namespace {
double zipf_log2_normalizer(double lambda) {
  static std::mutex mutex;
  static std::map<double, double> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(lambda);
  if (it != cache.end()) return it->second;
  // Sum smallest terms first for accuracy.
  double z = 0.0;
  for (std::uint64_t k = kZipfSupport; k >= 1; --k) z += std::pow(static_cast<double>(k), -lambda);
  const double l = std::log2(z);
  cache.emplace(lambda, l);
  return l;
}
}  // namespace

Estimate zipf_rate(std::span<const std::uint64_t> indices, double I_bits) {
  const double lambda = zipf_exponent(I_bits);
  const double log2_z = zipf_log2_normalizer(lambda);
  RunningStats stats;
  for (std::uint64_t k : indices) {
    if (k < 1 || k > kZipfSupport) throw InputError("zipf_rate: index outside the Zipf support");
    stats.add(lambda * std::log2(static_cast<double>(k)) + log2_z);
  }
  return stats.estimate();
}

RCCReport rcc_evaluate(const RCCConfig& config, std::size_t n_trials, Rng& rng) {
  config.validate();
  if (n_trials < 10000) throw ContractError("rcc_evaluate needs n_trials >= 10^4");
  const std::size_t n = static_cast<std::size_t>(config.block_dim);
  const std::uint64_t master = rng.next_u64();
  constexpr std::size_t chunk = 1024;
  const std::size_t chunks = chunk_count(n_trials, chunk);

  std::vector<std::uint64_t> indices(n_trials);
  SampleBatch xhat(config.block_dim, n_trials);
  std::vector<RunningStats> err(chunks);
  std::vector<RunningStats> examined(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Rng source(derive_seed(master, "rcc_source", c));
    std::vector<double> x(n);
    const double sd = std::sqrt(config.sigma2);
    for (std::size_t t = c * chunk; t < std::min(n_trials, (c + 1) * chunk); ++t) {
      for (double& v : x) v = config.mean + sd * source.normal();
      // Each trial has its own shared stream so decoding can replay it alone.
      Rng shared(derive_seed(master, "rcc_shared", t));
      const PfrResult r = pfr_encode(config, x, shared);
      indices[t] = r.index;
      double e = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xhat.row(t)[i] = r.xhat[i];
        e += (x[i] - r.xhat[i]) * (x[i] - r.xhat[i]);
      }
      err[c].add(e / static_cast<double>(n));
      examined[c].add(static_cast<double>(r.candidates_examined));
    }
  });

  RCCReport report;
  RunningStats mse;
  RunningStats cand;
  for (std::size_t c = 0; c < chunks; ++c) {
    mse.merge(err[c]);
    cand.merge(examined[c]);
  }
  const double I_block = config.block_dim * gaussian_rdp(config.sigma2, config.target_D, config.target_P);
  const Estimate rate = zipf_rate(indices, I_block);
  const GaussianSpec source_spec = GaussianSpec::isotropic(config.block_dim, config.sigma2, config.mean);
  const Estimate w2 = empirical_gaussian_w2sq(source_spec, xhat);

  // Pooled variance of xhat with a jackknife over 10 blocks.
  const Estimate var = jackknife(10, [&](int excluded) {
    RunningStats s;
    for (std::size_t t = 0; t < n_trials; ++t) {
      if (static_cast<int>(t * 10 / n_trials) == excluded) continue;
      for (double v : xhat.row(t)) s.add(v);
    }
    return s.variance();
  });

  RDPoint& p = report.point;
  p.rate = rate.value / static_cast<double>(n);
  p.rate_se = rate.se / static_cast<double>(n);
  p.distortion = mse.mean();
  p.distortion_se = mse.se();
  p.perception = w2.value;
  p.perception_se = w2.se;
  p.perception_metric = PerceptionMetric::ExactGaussianW2Sq;
  p.n_rate = p.n_dist = p.n_perc = n_trials;
  p.seed = master;
  p.rate_estimator = "zipf";
  report.xhat_variance = var.value;
  report.xhat_variance_se = var.se;
  report.mutual_information_bits = I_block;
  report.mean_candidates = cand.mean();
  return report;
}

}  // namespace ltc
