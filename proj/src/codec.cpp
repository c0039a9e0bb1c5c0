#include "ltc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ltc/errors.hpp"
#include "ltc/parallel.hpp"

namespace ltc {

namespace {
constexpr std::size_t kChunk = 2048;

// Runs body(chunk, begin, end) over fixed-size chunks; the chunking depends
// only on `total`, so results do not depend on the thread count.
template <class Body>
void for_each_chunk(std::size_t total, Body&& body) {
  parallel_for(chunk_count(total, kChunk), [&](std::size_t c) {
    body(c, c * kChunk, std::min(total, (c + 1) * kChunk));
  });
}

RunningStats merge_all(const std::vector<RunningStats>& parts) {
  RunningStats total;
  for (const auto& p : parts) total.merge(p);
  return total;
}
}  // namespace

// ---- transforms and densities ----

AffineTransform AffineTransform::identity(int n) { return scalar(n, 1.0); }

AffineTransform AffineTransform::scalar(int n, double gain, double offset) {
  AffineTransform t;
  t.matrix = Eigen::MatrixXd::Identity(n, n) * gain;
  t.offset = Eigen::VectorXd::Constant(n, offset);
  return t;
}

void AffineTransform::validate() const {
  if (matrix.rows() == 0 || matrix.cols() == 0) throw ConfigError("affine transform is empty");
  if (offset.size() != matrix.rows()) throw ConfigError("affine transform offset has wrong length");
  if (!matrix.allFinite() || !offset.allFinite()) throw ConfigError("affine transform has non-finite entries");
}

void AffineTransform::apply(std::span<const double> in, std::span<double> out) const {
  const int rows = out_dim();
  const int cols = in_dim();
  for (int i = 0; i < rows; ++i) {
    double acc = offset(i);
    for (int j = 0; j < cols; ++j) acc += matrix(i, j) * in[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = acc;
  }
}

LatentDensity LatentDensity::from_source(const GaussianSpec& source, const AffineTransform& analysis) {
  source.validate();
  analysis.validate();
  if (analysis.in_dim() != source.dim()) throw ConfigError("analysis transform does not match source dimension");
  const Eigen::Map<const Eigen::VectorXd> mu(source.mean.data(), source.dim());
  const Eigen::Map<const Eigen::VectorXd> var(source.diag_cov.data(), source.dim());
  const Eigen::VectorXd m = analysis.matrix * mu + analysis.offset;
  const Eigen::MatrixXd cov = analysis.matrix * var.asDiagonal() * analysis.matrix.transpose();
  LatentDensity d;
  d.mean.assign(m.data(), m.data() + m.size());
  d.diag_cov.resize(static_cast<std::size_t>(cov.rows()));
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      if (i != j && std::abs(cov(i, j)) > 1e-12 * scale) {
        throw ConfigError("latent covariance is not diagonal; only diagonal latent densities are supported");
      }
    }
    if (!(cov(i, i) > 0.0)) throw ConfigError("latent variance must be positive");
    d.diag_cov[static_cast<std::size_t>(i)] = cov(i, i);
  }
  return d;
}

double LatentDensity::log_pdf(std::span<const double> y) const {
  constexpr double log_2pi = 1.8378770664093453;
  double s = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = y[i] - mean[i];
    s += d * d / diag_cov[i] + std::log(diag_cov[i]) + log_2pi;
  }
  return -0.5 * s;
}

bool LatentDensity::matches(const LatentDensity& other, double tol) const {
  if (mean.size() != other.mean.size()) return false;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (std::abs(mean[i] - other.mean[i]) > tol) return false;
    if (std::abs(diag_cov[i] - other.diag_cov[i]) > tol * std::max(1.0, diag_cov[i])) return false;
  }
  return true;
}

std::string_view to_string(CodecMode mode) {
  switch (mode) {
    case CodecMode::Deterministic: return "deterministic";
    case CodecMode::PD: return "pd";
    case CodecMode::SD: return "sd";
    case CodecMode::QSD: return "qsd";
  }
  return "?";
}

CodecMode parse_codec_mode(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "deterministic" || s == "det") return CodecMode::Deterministic;
  if (s == "pd") return CodecMode::PD;
  if (s == "sd") return CodecMode::SD;
  if (s == "qsd") return CodecMode::QSD;
  throw ConfigError("unknown codec mode '" + std::string(name) + "'");
}

// ---- configuration ----

CodecConfig CodecConfig::with_identity(CodecMode mode, const Lattice& lattice, const GaussianSpec& source, double s,
                                       int gamma) {
  return with_gains(mode, lattice, source, 1.0, 1.0, s, gamma);
}

CodecConfig CodecConfig::with_gains(CodecMode mode, const Lattice& lattice, const GaussianSpec& source,
                                    double analysis_gain, double synthesis_gain, double s, int gamma) {
  CodecConfig c;
  c.mode = mode;
  c.s = s;
  c.gamma = gamma;
  c.lattice = lattice;
  c.analysis = AffineTransform::scalar(source.dim(), analysis_gain);
  c.synthesis = AffineTransform::scalar(source.dim(), synthesis_gain);
  c.latent = LatentDensity::from_source(source, c.analysis);
  return c;
}

void CodecConfig::validate() const {
  analysis.validate();
  synthesis.validate();
  const int m = lattice.dim();
  if (analysis.out_dim() != m) throw ConfigError("analysis output dimension does not match the lattice");
  if (synthesis.in_dim() != m) throw ConfigError("synthesis input dimension does not match the lattice");
  if (synthesis.out_dim() != analysis.in_dim()) {
    throw ConfigError("synthesis output dimension does not match the source dimension");
  }
  if (latent.dim() != m) throw ConfigError("latent density dimension does not match the lattice");
  if ((mode == CodecMode::PD || mode == CodecMode::QSD) && !(s >= 1.0)) {
    throw ConfigError("dither multiplier s must be >= 1 (got " + std::to_string(s) + ")");
  }
  if (mode == CodecMode::QSD) {
    if (gamma < 1) throw ConfigError("nesting ratio gamma must be >= 1");
    NestedPair check(lattice, gamma);  // enforces the coset cap
  }
}

// ---- codec ----

Codec::Codec(CodecConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.mode == CodecMode::QSD) nested_.emplace(config_.lattice, config_.gamma);
}

Encoded Codec::encode(std::span<const double> x, Rng& shared) const {
  if (static_cast<int>(x.size()) != config_.source_dim()) throw InputError("encode: input has wrong length");
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("encode: non-finite input");
  }
  const std::size_t m = static_cast<std::size_t>(config_.lattice.dim());
  std::vector<double> y(m);
  config_.analysis.apply(x, y);
  Encoded e;
  std::vector<double> target = y;
  if (config_.mode == CodecMode::SD) {
    std::vector<double> u = sample_cell_uniform(config_.lattice, shared);
    for (std::size_t i = 0; i < m; ++i) target[i] = y[i] - u[i];
    e.dither.shared = std::move(u);
  } else if (config_.mode == CodecMode::QSD) {
    CosetDraw draw = sample_coset_uniform(*nested_, shared);
    for (std::size_t i = 0; i < m; ++i) target[i] = y[i] - draw.vector[i];
    e.dither.coset_index = draw.index;
  }
  e.codeword = nearest_point(config_.lattice, target);
  return e;
}

std::vector<double> Codec::decode(const Encoded& encoded, Rng& priv) const {
  const std::size_t m = static_cast<std::size_t>(config_.lattice.dim());
  const std::vector<double>& c = encoded.codeword.embedding;
  if (c.size() != m) throw InputError("decode: codeword has wrong length");
  std::vector<double> t(c);
  switch (config_.mode) {
    case CodecMode::Deterministic:
      break;
    case CodecMode::PD: {
      const std::vector<double> u = sample_cell_uniform(config_.lattice, priv);
      for (std::size_t i = 0; i < m; ++i) t[i] = c[i] + config_.s * u[i];
      break;
    }
    case CodecMode::SD: {
      if (!encoded.dither.shared) throw ProtocolError("SD decode needs the shared dither u");
      const std::vector<double>& u = *encoded.dither.shared;
      if (u.size() != m) throw ProtocolError("SD decode: shared dither has wrong length");
      for (std::size_t i = 0; i < m; ++i) t[i] = c[i] + u[i];
      break;
    }
    case CodecMode::QSD: {
      if (!encoded.dither.coset_index) throw ProtocolError("QSD decode needs the shared coset index");
      if (*encoded.dither.coset_index >= nested_->coset_count()) {
        throw ProtocolError("QSD decode: coset index out of range");
      }
      std::vector<double> uhat(m);
      nested_->representative(*encoded.dither.coset_index, uhat);
      const std::vector<double> uf = sample_cell_uniform(nested_->fine(), priv);
      for (std::size_t i = 0; i < m; ++i) t[i] = (c[i] + uhat[i]) + config_.s * uf[i];
      break;
    }
  }
  std::vector<double> xhat(static_cast<std::size_t>(config_.synthesis.out_dim()));
  config_.synthesis.apply(t, xhat);
  return xhat;
}

void Codec::roundtrip(std::span<const double> x, Rng& shared, Rng& priv, std::span<double> c,
                      std::span<double> xhat, std::span<double> scratch) const {
  const std::size_t m = static_cast<std::size_t>(config_.lattice.dim());
  const std::span<double> y = scratch.subspan(0, m);
  const std::span<double> t = scratch.subspan(m, m);
  const std::span<double> u = scratch.subspan(2 * m, m);
  config_.analysis.apply(x, y);
  switch (config_.mode) {
    case CodecMode::Deterministic:
      config_.lattice.quantize(y, c);
      std::copy(c.begin(), c.end(), t.begin());
      break;
    case CodecMode::PD:
      config_.lattice.quantize(y, c);
      config_.lattice.sample_cell_uniform(priv, u);
      for (std::size_t i = 0; i < m; ++i) t[i] = c[i] + config_.s * u[i];
      break;
    case CodecMode::SD:
      config_.lattice.sample_cell_uniform(shared, u);
      for (std::size_t i = 0; i < m; ++i) t[i] = y[i] - u[i];
      config_.lattice.quantize(t, c);
      for (std::size_t i = 0; i < m; ++i) t[i] = c[i] + u[i];
      break;
    case CodecMode::QSD: {
      nested_->representative(shared.uniform_index(nested_->coset_count()), u);
      for (std::size_t i = 0; i < m; ++i) t[i] = y[i] - u[i];
      config_.lattice.quantize(t, c);
      for (std::size_t i = 0; i < m; ++i) t[i] = c[i] + u[i];
      // u now free: reuse it for the fine dither.
      nested_->fine().sample_cell_uniform(priv, u);
      for (std::size_t i = 0; i < m; ++i) t[i] = t[i] + config_.s * u[i];
      break;
    }
  }
  config_.synthesis.apply(t, xhat);
}

Encoded encode(const CodecConfig& config, std::span<const double> x, Rng& rng) {
  return Codec(config).encode(x, rng);
}

std::vector<double> decode(const CodecConfig& config, const Encoded& encoded, Rng& rng) {
  return Codec(config).decode(encoded, rng);
}

// ---- rate estimators ----

namespace {

enum class RateKind { Conditional, NoisyProxy, Codeword };

void check_rate_inputs(const CodecConfig& config, const GaussianSpec& source, const RateOptions& options) {
  source.validate();
  if (source.dim() != config.source_dim()) throw ContractError("source dimension does not match the codec");
  if (!config.latent.matches(LatentDensity::from_source(source, config.analysis))) {
    throw ContractError("latent density is inconsistent with the source and analysis transform");
  }
  if (options.n_outer < 1000) throw ContractError("rate estimation needs n_outer >= 1000");
  if (options.n_inner < 64) throw ContractError("rate estimation needs n_inner >= 64");
  if (!(options.floor > 0.0)) throw ContractError("probability floor must be positive");
}

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

RateEstimate estimate_rate(const CodecConfig& config, const GaussianSpec& source, const RateOptions& options,
                           Rng& rng, RateKind kind) {
  check_rate_inputs(config, source, options);
  const Codec codec(config);
  const Lattice& lattice = config.lattice;
  const std::size_t m = static_cast<std::size_t>(lattice.dim());
  const std::size_t n_in = options.doubling_diagnostic ? 2 * options.n_inner : options.n_inner;
  const double log_v = std::log(lattice.volume());
  const double log_floor = std::log(options.floor);
  const double bits = 1.0 / (std::numbers::ln2 * static_cast<double>(m));
  const std::uint64_t base = rng.next_u64();
  const std::size_t chunks = chunk_count(options.n_outer, kChunk);
  // log p_y(v) = log_norm - 0.5 sum (v_i - mean_i)^2 / var_i
  std::vector<double> inv_var(m);
  double log_norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    inv_var[i] = 1.0 / config.latent.diag_cov[i];
    log_norm -= 0.5 * (std::log(2.0 * std::numbers::pi * config.latent.diag_cov[i]));
  }
  const std::vector<double>& mean = config.latent.mean;

  std::vector<RunningStats> parts(chunks);
  std::vector<RunningStats> shifts(chunks);
  std::vector<std::size_t> clamps(chunks, 0);
  for_each_chunk(options.n_outer, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Rng source_rng(derive_seed(base, "rate_source", chunk));
    Rng dither_rng(derive_seed(base, "rate_dither", chunk));
    Rng inner_rng(derive_seed(base, "rate_inner", chunk));
    std::vector<double> x(static_cast<std::size_t>(source.dim()));
    std::vector<double> y(m), t(m), c(m), u(m);
    std::vector<double> logs(n_in);
    RunningStats stats;
    RunningStats shift;
    for (std::size_t s = begin; s < end; ++s) {
      source.sample(source_rng, x);
      config.analysis.apply(x, y);
      switch (kind) {
        case RateKind::Codeword:
          lattice.quantize(y, t);
          break;
        case RateKind::NoisyProxy:
          lattice.sample_cell_uniform(dither_rng, u);
          for (std::size_t i = 0; i < m; ++i) t[i] = y[i] + u[i];
          break;
        case RateKind::Conditional:
          if (config.mode == CodecMode::SD) {
            lattice.sample_cell_uniform(dither_rng, u);
          } else {
            const NestedPair& nested = *codec.nested();
            nested.representative(dither_rng.uniform_index(nested.coset_count()), u);
          }
          for (std::size_t i = 0; i < m; ++i) c[i] = y[i] - u[i];
          lattice.quantize(c, t);
          for (std::size_t i = 0; i < m; ++i) t[i] = t[i] + u[i];
          break;
      }
      for (std::size_t j = 0; j < n_in; ++j) {
        lattice.sample_cell_uniform(inner_rng, u);
        double q = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double d = t[i] + u[i] - mean[i];
          q += d * d * inv_var[i];
        }
        logs[j] = log_norm - 0.5 * q;
      }
      auto log_prob = [&](std::size_t count, bool primary) {
        double lp = log_v + log_sum_exp(std::span<const double>(logs.data(), count)) -
                    std::log(static_cast<double>(count));
        if (!(lp >= log_floor)) {
          if (primary) ++clamps[chunk];
          lp = log_floor;
        }
        return lp;
      };
      const double lp = log_prob(options.n_inner, true);
      stats.add(-lp * bits);
      if (options.doubling_diagnostic) shift.add((lp - log_prob(n_in, false)) * bits);
    }
    parts[chunk] = stats;
    shifts[chunk] = shift;
  });
  const RunningStats total = merge_all(parts);
  RateEstimate r;
  r.value = total.mean();
  r.se = total.se();
  r.samples = options.n_outer;
  for (std::size_t c : clamps) r.clamp_events += c;
  if (options.doubling_diagnostic) r.inner_doubling_shift = merge_all(shifts).mean();
  return r;
}

}  // namespace

RateEstimate rate_conditional_mc(const CodecConfig& config, const GaussianSpec& source, const RateOptions& options,
                                 Rng& rng) {
  if (config.mode != CodecMode::SD && config.mode != CodecMode::QSD) {
    throw ContractError("rate_conditional_mc applies to SD and QSD codecs");
  }
  return estimate_rate(config, source, options, rng, RateKind::Conditional);
}

RateEstimate rate_noisy_proxy_mc(const CodecConfig& config, const GaussianSpec& source, const RateOptions& options,
                                 Rng& rng) {
  if (config.mode != CodecMode::SD) {
    throw ContractError("the additive-channel rate form holds only for SD codecs");
  }
  return estimate_rate(config, source, options, rng, RateKind::NoisyProxy);
}

RateEstimate rate_codeword_entropy_mc(const CodecConfig& config, const GaussianSpec& source,
                                      const RateOptions& options, Rng& rng) {
  if (config.mode != CodecMode::Deterministic && config.mode != CodecMode::PD) {
    throw ContractError("codeword entropy applies to Deterministic and PD codecs");
  }
  return estimate_rate(config, source, options, rng, RateKind::Codeword);
}

RateEstimate rate_plugin_entropy(const CodecConfig& config, const GaussianSpec& source, std::size_t n_samples,
                                 Rng& rng) {
  if (config.mode != CodecMode::Deterministic && config.mode != CodecMode::PD) {
    throw ContractError("plug-in entropy applies to Deterministic and PD codecs");
  }
  if (n_samples < 10000) throw ContractError("plug-in entropy needs n_samples >= 10^4");
  source.validate();
  config.validate();
  constexpr int blocks = 10;
  const Lattice& lattice = config.lattice;
  const std::size_t m = static_cast<std::size_t>(lattice.dim());
  using Key = std::vector<std::int64_t>;
  std::map<Key, std::array<std::size_t, blocks>> counts;
  std::vector<double> x(static_cast<std::size_t>(source.dim())), y(m), c(m);
  for (std::size_t s = 0; s < n_samples; ++s) {
    source.sample(rng, x);
    config.analysis.apply(x, y);
    lattice.quantize(y, c);
    auto& slot = counts[lattice.coordinates_of(c)];
    ++slot[s * blocks / n_samples];
  }
  std::array<std::size_t, blocks> block_sizes{};
  for (std::size_t s = 0; s < n_samples; ++s) ++block_sizes[s * blocks / n_samples];
  auto entropy = [&](int excluded) {
    const double total = static_cast<double>(n_samples - (excluded >= 0 ? block_sizes[excluded] : 0));
    double h = 0.0;
    for (const auto& [key, per_block] : counts) {
      std::size_t k = 0;
      for (int b = 0; b < blocks; ++b) {
        if (b != excluded) k += per_block[b];
      }
      if (k == 0) continue;
      const double p = static_cast<double>(k) / total;
      h -= p * std::log2(p);
    }
    return h / static_cast<double>(m);
  };
  const Estimate e = jackknife(blocks, entropy);
  RateEstimate r;
  r.value = e.value;
  r.se = e.se;
  r.samples = n_samples;
  r.distinct_codewords = counts.size();
  r.plugin_bias_warning = counts.size() > n_samples / 20;
  return r;
}

// ---- evaluation ----

RoundtripBatch roundtrip_batch(const CodecConfig& config, const GaussianSpec& source, std::size_t count,
                               std::uint64_t seed) {
  const Codec codec(config);
  const int n = source.dim();
  const std::size_t m = static_cast<std::size_t>(config.lattice.dim());
  RoundtripBatch out{SampleBatch(n, count), SampleBatch(n, count)};
  for_each_chunk(count, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Rng source_rng(derive_seed(seed, "source", chunk));
    Rng shared_rng(derive_seed(seed, "shared", chunk));
    Rng private_rng(derive_seed(seed, "private", chunk));
    std::vector<double> c(m), scratch(3 * m);
    for (std::size_t s = begin; s < end; ++s) {
      source.sample(source_rng, out.source.row(s));
      codec.roundtrip(out.source.row(s), shared_rng, private_rng, c, out.reconstruction.row(s), scratch);
    }
  });
  return out;
}

RDPoint evaluate(const CodecConfig& config, const GaussianSpec& source, const EvalBudget& budget,
                 PerceptionMetric metric, Rng& rng) {
  source.validate();
  config.validate();
  if (budget.n_perc < 20) throw ContractError("perception needs at least 20 paired samples");
  if (budget.n_dist < 2) throw ContractError("distortion needs at least 2 samples");
  const std::uint64_t master = rng.next_u64();
  RDPoint p;
  p.seed = master;
  p.perception_metric = metric;

  Rng rate_rng(derive_seed(master, "rate"));
  RateOptions opts;
  opts.n_outer = budget.n_rate;
  opts.n_inner = budget.n_inner;
  opts.doubling_diagnostic = budget.doubling_diagnostic;
  RateEstimate rate;
  switch (config.mode) {
    case CodecMode::SD:
    case CodecMode::QSD:
      rate = rate_conditional_mc(config, source, opts, rate_rng);
      p.rate_estimator = "conditional_mc";
      break;
    case CodecMode::Deterministic:
    case CodecMode::PD:
      if (budget.pd_rate == PdRateEstimator::PlugIn) {
        rate = rate_plugin_entropy(config, source, budget.n_rate, rate_rng);
        p.rate_estimator = "plugin";
      } else {
        rate = rate_codeword_entropy_mc(config, source, opts, rate_rng);
        p.rate_estimator = "cell_mc";
      }
      break;
  }
  p.rate = std::max(rate.value, 0.0);
  p.rate_se = rate.se;
  p.clamp_events = rate.clamp_events;
  p.inner_doubling_shift = rate.inner_doubling_shift;
  p.n_rate = budget.n_rate;

  const RoundtripBatch dist = roundtrip_batch(config, source, budget.n_dist, derive_seed(master, "distortion"));
  const Estimate mse = mse_per_dim(dist.source, dist.reconstruction);
  p.distortion = mse.value;
  p.distortion_se = mse.se;
  p.n_dist = budget.n_dist;

  const RoundtripBatch perc = roundtrip_batch(config, source, budget.n_perc, derive_seed(master, "perception"));
  Estimate w;
  if (metric == PerceptionMetric::SlicedW2Sq) {
    Rng ref_rng(derive_seed(master, "reference"));
    const SampleBatch reference = source.sample(ref_rng, budget.n_perc);
    Rng proj_rng(derive_seed(master, "projections"));
    w = sliced_w2sq(reference, perc.reconstruction, budget.n_projections, proj_rng);
  } else {
    w = empirical_gaussian_w2sq(source, perc.reconstruction);
  }
  p.perception = w.value;
  p.perception_se = w.se;
  p.n_perc = budget.n_perc;
  return p;
}

PdSdIdentityReport verify_pd_sd_identity(const Lattice& lattice, double s, std::size_t n_samples, Rng& rng,
                                         bool lattice_point_inputs) {
  if (!(s >= 1.0)) throw ConfigError("verify_pd_sd_identity: s must be >= 1");
  const std::size_t n = static_cast<std::size_t>(lattice.dim());
  const std::uint64_t base = rng.next_u64();
  const std::size_t chunks = chunk_count(n_samples, kChunk);
  std::vector<RunningStats> pd(chunks), sd(chunks), q(chunks), res(chunks);
  for_each_chunk(n_samples, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Rng source_rng(derive_seed(base, "identity_source", chunk));
    Rng shared_rng(derive_seed(base, "identity_shared", chunk));
    Rng private_rng(derive_seed(base, "identity_private", chunk));
    std::vector<double> x(n), qx(n), u(n), t(n), c(n);
    for (std::size_t k = begin; k < end; ++k) {
      source_rng.fill_normal(x);
      if (lattice_point_inputs) {
        lattice.quantize(x, qx);
        x = qx;
      }
      lattice.quantize(x, qx);
      lattice.sample_cell_uniform(private_rng, u);
      double e_pd = 0.0;
      double e_q = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - (qx[i] + s * u[i]);
        e_pd += d * d;
        e_q += (x[i] - qx[i]) * (x[i] - qx[i]);
      }
      lattice.sample_cell_uniform(shared_rng, u);
      for (std::size_t i = 0; i < n; ++i) t[i] = x[i] - u[i];
      lattice.quantize(t, c);
      double e_sd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - (c[i] + u[i]);
        e_sd += d * d;
      }
      const double dn = static_cast<double>(n);
      pd[chunk].add(e_pd / dn);
      sd[chunk].add(e_sd / dn);
      q[chunk].add(e_q / dn);
      res[chunk].add((e_pd - s * s * e_sd - e_q) / dn);
    }
  });
  return {merge_all(pd).estimate(), merge_all(sd).estimate(), merge_all(q).estimate(), merge_all(res).estimate()};
}

}  // namespace ltc
