#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ltc/dither.hpp"
#include "ltc/lattice.hpp"
#include "ltc/metrics.hpp"
#include "ltc/rng.hpp"
#include "ltc/stats.hpp"

namespace ltc {

/// y = A x + b.
struct AffineTransform {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;

  static AffineTransform identity(int n);
  /// gain * I with a constant offset.
  static AffineTransform scalar(int n, double gain, double offset = 0.0);

  int in_dim() const { return static_cast<int>(matrix.cols()); }
  int out_dim() const { return static_cast<int>(matrix.rows()); }
  void validate() const;
  void apply(std::span<const double> in, std::span<double> out) const;
};

/// Analytic diagonal-Gaussian density of the latent y = g_a(X).
struct LatentDensity {
  std::vector<double> mean;
  std::vector<double> diag_cov;

  /// Pushes a diagonal Gaussian source through an affine map; throws
  /// ConfigError if the result is not diagonal.
  static LatentDensity from_source(const GaussianSpec& source, const AffineTransform& analysis);

  int dim() const { return static_cast<int>(mean.size()); }
  double log_pdf(std::span<const double> y) const;  // natural log
  bool matches(const LatentDensity& other, double tol = 1e-9) const;
};

enum class CodecMode { Deterministic, PD, SD, QSD };

std::string_view to_string(CodecMode mode);
CodecMode parse_codec_mode(std::string_view name);

struct CodecConfig {
  CodecMode mode = CodecMode::SD;
  double s = 1.0;  // PD dither multiplier; for QSD the fine-dither multiplier
  int gamma = 1;   // QSD nesting ratio
  Lattice lattice{LatticeFamily::IntegerZ, 1, 1.0};
  AffineTransform analysis;
  AffineTransform synthesis;
  LatentDensity latent;

  /// Identity transforms with the latent density implied by `source`.
  static CodecConfig with_identity(CodecMode mode, const Lattice& lattice, const GaussianSpec& source,
                                   double s = 1.0, int gamma = 1);
  /// Scalar gains g_a(x) = a x, g_s(v) = g v.
  static CodecConfig with_gains(CodecMode mode, const Lattice& lattice, const GaussianSpec& source,
                                double analysis_gain, double synthesis_gain, double s = 1.0, int gamma = 1);

  int source_dim() const { return analysis.in_dim(); }
  /// Throws ConfigError for inconsistent dimensions, s < 1, gamma < 1 or an
  /// oversize coset table.
  void validate() const;
};

/// Shared randomness the encoder used: u for SD, the coset index for QSD.
struct DitherRecord {
  std::optional<std::vector<double>> shared;
  std::optional<std::uint64_t> coset_index;
};

struct Encoded {
  LatticePoint codeword;
  DitherRecord dither;
};

// A validated codec. Holds the nested pair for QSD so encode/decode loops do
// not rebuild it.
class Codec {
 public:
  explicit Codec(CodecConfig config);

  const CodecConfig& config() const { return config_; }
  const NestedPair* nested() const { return nested_ ? &*nested_ : nullptr; }

  /// `shared` supplies the dither known to both sides; it is not touched in
  /// PD and Deterministic modes.
  Encoded encode(std::span<const double> x, Rng& shared) const;
  /// `priv` supplies the decoder's private dither (PD u, QSD u_f).
  std::vector<double> decode(const Encoded& encoded, Rng& priv) const;

  // Allocation-free path used by the estimators: writes the codeword
  // embedding into c and the reconstruction into xhat. `scratch` must have
  // room for 3 * latent_dim values.
  void roundtrip(std::span<const double> x, Rng& shared, Rng& priv, std::span<double> c,
                 std::span<double> xhat, std::span<double> scratch) const;

 private:
  CodecConfig config_;
  std::optional<NestedPair> nested_;
};

Encoded encode(const CodecConfig& config, std::span<const double> x, Rng& rng);
std::vector<double> decode(const CodecConfig& config, const Encoded& encoded, Rng& rng);

struct RateEstimate {
  double value = 0.0;  // bits per dimension
  double se = 0.0;
  std::size_t clamp_events = 0;
  std::size_t samples = 0;
  // Inner-MC bias diagnostic: estimate(2 n_inner) - estimate(n_inner) on the
  // same outer samples; NaN when not requested.
  double inner_doubling_shift = std::nan("");
  // Plug-in estimator only.
  std::size_t distinct_codewords = 0;
  bool plugin_bias_warning = false;
};

struct RateOptions {
  std::size_t n_outer = 10000;
  std::size_t n_inner = 256;
  double floor = 1e-300;
  bool doubling_diagnostic = false;
};

/// H(c | dither) per dimension: the probability of the codeword is
/// V * E_u'[p_y(Q(y - u) + u + u')] with u' cell-uniform, estimated by an
/// inner average inside an outer average of -log2. SD and QSD only (for QSD u
/// is the discrete coset dither and u' stays continuous on the coarse cell).
/// The log of an inner average is biased upwards for small n_inner.
RateEstimate rate_conditional_mc(const CodecConfig& config, const GaussianSpec& source, const RateOptions& options,
                                 Rng& rng);

/// The additive-channel form: -log2(V * E_u'[p_y(y + u + u')]). SD only.
RateEstimate rate_noisy_proxy_mc(const CodecConfig& config, const GaussianSpec& source, const RateOptions& options,
                                 Rng& rng);

/// H(Q(y)) per dimension for Deterministic/PD via the cell integral
/// P(c) = V * E_u'[p_y(c + u')]; the zero-dither case of rate_conditional_mc.
RateEstimate rate_codeword_entropy_mc(const CodecConfig& config, const GaussianSpec& source,
                                      const RateOptions& options, Rng& rng);

/// Plug-in entropy of empirical codeword frequencies, per dimension, with a
/// 10-block jackknife SE. Deterministic/PD only; n_samples >= 10^4.
RateEstimate rate_plugin_entropy(const CodecConfig& config, const GaussianSpec& source, std::size_t n_samples,
                                 Rng& rng);

enum class PdRateEstimator { CellMc, PlugIn };

struct EvalBudget {
  std::size_t n_rate = 10000;   // outer samples (or plug-in samples)
  std::size_t n_inner = 256;
  std::size_t n_dist = 100000;
  std::size_t n_perc = 10000;   // reconstruction samples; the reference set has the same size
  int n_projections = 50;
  PdRateEstimator pd_rate = PdRateEstimator::CellMc;
  bool doubling_diagnostic = false;
};

struct RDPoint {
  double rate = 0.0;
  double rate_se = 0.0;
  double distortion = 0.0;
  double distortion_se = 0.0;
  double perception = 0.0;
  double perception_se = 0.0;
  PerceptionMetric perception_metric = PerceptionMetric::SlicedW2Sq;
  std::size_t n_rate = 0;
  std::size_t n_dist = 0;
  std::size_t n_perc = 0;
  std::uint64_t seed = 0;
  std::string rate_estimator;
  std::size_t clamp_events = 0;
  double inner_doubling_shift = std::nan("");
};

/// Rate, distortion and perception of one codec on a Gaussian source. The
/// three estimates use independent substreams derived from one draw of `rng`.
RDPoint evaluate(const CodecConfig& config, const GaussianSpec& source, const EvalBudget& budget,
                 PerceptionMetric metric, Rng& rng);

/// Mean per-dimension squared error and the empirical reconstruction batch.
struct RoundtripBatch {
  SampleBatch source;
  SampleBatch reconstruction;
};
RoundtripBatch roundtrip_batch(const CodecConfig& config, const GaussianSpec& source, std::size_t count,
                               std::uint64_t seed);

struct PdSdIdentityReport {
  Estimate pd_error;             // E||x - xhat_PD||^2 / n
  Estimate sd_error;             // E||x - xhat_SD||^2 / n
  Estimate quantization_error;   // E||x - Q(x)||^2 / n
  Estimate residual;             // pd - s^2 sd - quantization, per sample
};

/// Checks E||x - xhat_PD||^2 = s^2 E||x - xhat_SD||^2 + E||x - Q(x)||^2 on
/// shared standard-normal inputs with identity transforms. With
/// `lattice_point_inputs` the inputs are snapped to the lattice first.
PdSdIdentityReport verify_pd_sd_identity(const Lattice& lattice, double s, std::size_t n_samples, Rng& rng,
                                         bool lattice_point_inputs = false);

}  // namespace ltc
