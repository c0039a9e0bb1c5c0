#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ltc/codec.hpp"
#include "ltc/errors.hpp"

using namespace ltc;

namespace {
const GaussianSpec kStd8 = GaussianSpec::isotropic(8, 1.0);
const GaussianSpec kStd1 = GaussianSpec::isotropic(1, 1.0);

bool in_cell(const Lattice& l, std::span<const double> v) {
  for (double q : l.quantize(v)) {
    if (q != 0.0) return false;
  }
  return true;
}

// Entropy in bits of the integer-binned standard normal, from the CDF.
double binned_gaussian_entropy(double width) {
  double h = 0.0;
  for (int k = -200; k <= 200; ++k) {
    const double p = normal_cdf((k + 0.5) * width) - normal_cdf((k - 0.5) * width);
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}
}  // namespace

TEST(Codec, EncodeExamples) {
  const Lattice z8 = build_lattice(LatticeFamily::IntegerZ, 8, 1.0);
  Rng rng(1);
  const std::vector<double> small{0.1, -0.2, 0.3, 0.0, 0.4, -0.4, 0.2, 0.1};
  const Encoded det = encode(CodecConfig::with_identity(CodecMode::Deterministic, z8, kStd8), small, rng);
  EXPECT_EQ(det.codeword.embedding, std::vector<double>(8, 0.0));
  EXPECT_FALSE(det.dither.shared);

  const Lattice e8 = build_lattice(LatticeFamily::E8, 8, 0.7);
  const Codec sd(CodecConfig::with_identity(CodecMode::SD, e8, kStd8));
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(8);
    rng.fill_normal(x);
    const Encoded e = sd.encode(x, rng);
    ASSERT_TRUE(e.dither.shared);
    std::vector<double> r(8);
    for (int i = 0; i < 8; ++i) r[i] = x[i] - (e.codeword.embedding[i] + (*e.dither.shared)[i]);
    // x - u - c is the quantisation residual of x - u, hence in the cell.
    EXPECT_TRUE(in_cell(e8, r));
  }

  const Codec qsd(CodecConfig::with_identity(CodecMode::QSD, e8, kStd8, 1.0, 1));
  const Codec plain(CodecConfig::with_identity(CodecMode::Deterministic, e8, kStd8));
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(8);
    rng.fill_normal(x);
    EXPECT_EQ(qsd.encode(x, rng).codeword.coords, plain.encode(x, rng).codeword.coords);
  }
}

TEST(Codec, DecodeNeedsSharedDither) {
  const Lattice z8 = build_lattice(LatticeFamily::IntegerZ, 8, 1.0);
  Rng rng(2);
  const std::vector<double> x(8, 0.3);
  Encoded e = encode(CodecConfig::with_identity(CodecMode::SD, z8, kStd8), x, rng);
  e.dither.shared.reset();
  EXPECT_THROW(decode(CodecConfig::with_identity(CodecMode::SD, z8, kStd8), e, rng), ProtocolError);
  Encoded q = encode(CodecConfig::with_identity(CodecMode::QSD, z8, kStd8, 1.0, 2), x, rng);
  q.dither.coset_index.reset();
  EXPECT_THROW(decode(CodecConfig::with_identity(CodecMode::QSD, z8, kStd8, 1.0, 2), q, rng), ProtocolError);
}

TEST(Codec, SdResidualIsCellUniform) {
  // Crypto lemma: x_hat - x for a fixed x has the law of a cell-uniform vector.
  const Lattice e8 = build_lattice(LatticeFamily::E8, 8, 1.0);
  const Codec sd(CodecConfig::with_identity(CodecMode::SD, e8, kStd8));
  Rng shared(3);
  Rng priv(4);
  Rng ref(5);
  const std::vector<double> x{0.3, -1.2, 0.8, 2.1, -0.4, 0.0, 1.7, -0.9};
  const std::size_t n = 50000;
  std::vector<std::vector<double>> resid(8, std::vector<double>(n));
  std::vector<std::vector<double>> indep(8, std::vector<double>(n));
  RunningStats m_res;
  RunningStats m_ind;
  for (std::size_t k = 0; k < n; ++k) {
    const std::vector<double> xhat = sd.decode(sd.encode(x, shared), priv);
    const std::vector<double> u = sample_cell_uniform(e8, ref);
    double a = 0.0;
    double b = 0.0;
    for (int i = 0; i < 8; ++i) {
      resid[i][k] = xhat[i] - x[i];
      indep[i][k] = u[i];
      a += resid[i][k] * resid[i][k];
      b += u[i] * u[i];
    }
    m_res.add(a / 8);
    m_ind.add(b / 8);
  }
  EXPECT_NEAR(m_res.mean(), m_ind.mean(), 3 * combined_se(m_res.estimate(), m_ind.estimate()));
  for (int i = 0; i < 8; ++i) {
    EXPECT_LT(ks_statistic(resid[i], indep[i]), ks_critical_value(n, n, 0.01)) << i;
  }
}

TEST(Codec, PdOnLatticePointIsCellUniform) {
  const Lattice z8 = build_lattice(LatticeFamily::IntegerZ, 8, 1.0);
  const Codec pd(CodecConfig::with_identity(CodecMode::PD, z8, kStd8, 1.0));
  Rng shared(6);
  Rng priv(7);
  const std::vector<double> x{1, -2, 0, 3, 1, 0, -1, 2};
  RunningStats m2;
  for (int k = 0; k < 20000; ++k) {
    const Encoded e = pd.encode(x, shared);
    EXPECT_EQ(e.codeword.embedding, x);
    const std::vector<double> xhat = pd.decode(e, priv);
    double a = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double r = xhat[i] - x[i];
      ASSERT_GE(r, -0.5);
      ASSERT_LT(r, 0.5);
      a += r * r;
    }
    m2.add(a / 8);
  }
  EXPECT_NEAR(m2.mean(), 1.0 / 12, 3 * m2.se());
}

TEST(Codec, QsdWithGammaOneIsPd) {
  for (auto family : {LatticeFamily::IntegerZ, LatticeFamily::E8}) {
    const Lattice l = build_lattice(family, 8, 0.6);
    const CodecConfig pd = CodecConfig::with_gains(CodecMode::PD, l, kStd8, 1.1, 0.8, 1.5);
    const CodecConfig qsd = CodecConfig::with_gains(CodecMode::QSD, l, kStd8, 1.1, 0.8, 1.5, 1);
    const RoundtripBatch a = roundtrip_batch(pd, kStd8, 5000, 99);
    const RoundtripBatch b = roundtrip_batch(qsd, kStd8, 5000, 99);
    EXPECT_EQ(a.reconstruction.data, b.reconstruction.data);

    EvalBudget budget;
    budget.n_rate = 2000;
    budget.n_inner = 64;
    budget.n_dist = 5000;
    budget.n_perc = 1000;
    Rng ra(42);
    Rng rb(42);
    const RDPoint pa = evaluate(pd, kStd8, budget, PerceptionMetric::SlicedW2Sq, ra);
    const RDPoint pb = evaluate(qsd, kStd8, budget, PerceptionMetric::SlicedW2Sq, rb);
    EXPECT_EQ(pa.rate, pb.rate);
    EXPECT_EQ(pa.rate_se, pb.rate_se);
    EXPECT_EQ(pa.distortion, pb.distortion);
    EXPECT_EQ(pa.perception, pb.perception);
  }
}

TEST(Codec, FineLatticeRateMatchesHighResolutionEntropy) {
  const Lattice fine = build_lattice(LatticeFamily::IntegerZ, 1, 0.05);
  const CodecConfig sd = CodecConfig::with_identity(CodecMode::SD, fine, kStd1);
  RateOptions opts;
  opts.n_outer = 10000;
  Rng rng(8);
  const RateEstimate r = rate_conditional_mc(sd, kStd1, opts, rng);
  const double expected = 0.5 * std::log2(2 * std::numbers::pi * std::numbers::e) - std::log2(0.05);
  EXPECT_NEAR(r.value, expected, 0.05);
}

TEST(Codec, CoarseLatticeRateVanishes) {
  // With a shared dither the codeword is not constant even for a very coarse
  // lattice: x straddles a boundary when |u| is near a/2. For Z^1 at scale a the
  // exact rate is (1/a) * integral of h2(Phi(z)) dz, computed here by quadrature.
  double integral = 0.0;
  const double dz = 1e-3;
  for (double z = -40; z < 40; z += dz) {
    const double p = normal_cdf(z + dz / 2);
    if (p > 0 && p < 1) integral += dz * (-p * std::log2(p) - (1 - p) * std::log2(1 - p));
  }
  Rng rng(9);
  RateOptions opts;
  opts.n_outer = 2000;
  opts.n_inner = 8192;
  const CodecConfig sd64 =
      CodecConfig::with_identity(CodecMode::SD, build_lattice(LatticeFamily::IntegerZ, 1, 64.0), kStd1);
  const RateEstimate r4 = rate_conditional_mc(sd64, kStd1, opts, rng);
  const RateEstimate r6 = rate_noisy_proxy_mc(sd64, kStd1, opts, rng);
  EXPECT_NEAR(r4.value, integral / 64, 3 * r4.se + 0.003);
  EXPECT_NEAR(r6.value, integral / 64, 3 * r6.se + 0.003);

  opts.n_outer = 1000;
  opts.n_inner = 65536;
  const CodecConfig sd512 =
      CodecConfig::with_identity(CodecMode::SD, build_lattice(LatticeFamily::IntegerZ, 1, 512.0), kStd1);
  const RateEstimate r512 = rate_conditional_mc(sd512, kStd1, opts, rng);
  EXPECT_LT(std::abs(r512.value), 0.01);
  EXPECT_NEAR(r512.value, integral / 512, 3 * r512.se + 0.003);

  const Lattice coarse8 = build_lattice(LatticeFamily::IntegerZ, 8, 64.0);
  const CodecConfig det = CodecConfig::with_identity(CodecMode::Deterministic, coarse8, kStd8);
  EXPECT_EQ(rate_plugin_entropy(det, kStd8, 20000, rng).value, 0.0);
}

TEST(Codec, NoisyProxyEnvelopeOnZ1) {
  const Lattice z1 = build_lattice(LatticeFamily::IntegerZ, 1, 1.0);
  const CodecConfig sd = CodecConfig::with_identity(CodecMode::SD, z1, kStd1);
  RateOptions opts;
  Rng rng(10);
  const RateEstimate r = rate_noisy_proxy_mc(sd, kStd1, opts, rng);
  const double h = 0.5 * std::log2(2 * std::numbers::pi * std::numbers::e);
  EXPECT_GT(r.value, 0.0);
  EXPECT_LT(r.value, h + std::numbers::log2e);
}

TEST(Codec, ConditionalAndNoisyProxyRatesAgree) {
  for (auto family : {LatticeFamily::IntegerZ, LatticeFamily::E8}) {
    const CodecConfig sd = CodecConfig::with_identity(CodecMode::SD, build_lattice(family, 8, 1.0), kStd8);
    RateOptions opts;
    opts.n_outer = 5000;
    Rng a(11);
    Rng b(12);
    const RateEstimate r4 = rate_conditional_mc(sd, kStd8, opts, a);
    const RateEstimate r6 = rate_noisy_proxy_mc(sd, kStd8, opts, b);
    EXPECT_NEAR(r4.value, r6.value, 3 * std::hypot(r4.se, r6.se));
  }
}

TEST(Codec, InnerDoublingShiftIsSmall) {
  const CodecConfig sd =
      CodecConfig::with_identity(CodecMode::SD, build_lattice(LatticeFamily::E8, 8, 1.0), kStd8);
  RateOptions opts;
  opts.n_outer = 2000;
  opts.doubling_diagnostic = true;
  Rng rng(13);
  const RateEstimate r = rate_conditional_mc(sd, kStd8, opts, rng);
  EXPECT_LT(std::abs(r.inner_doubling_shift), 0.01);
  EXPECT_EQ(r.clamp_events, 0u);
}

TEST(Codec, PluginEntropyMatchesBinnedGaussian) {
  const Lattice z1 = build_lattice(LatticeFamily::IntegerZ, 1, 1.0);
  const CodecConfig det = CodecConfig::with_identity(CodecMode::Deterministic, z1, kStd1);
  const CodecConfig pd = CodecConfig::with_identity(CodecMode::PD, z1, kStd1, 1.3);
  Rng a(14);
  Rng b(14);
  const RateEstimate rd = rate_plugin_entropy(det, kStd1, 100000, a);
  const RateEstimate rp = rate_plugin_entropy(pd, kStd1, 100000, b);
  EXPECT_NEAR(rd.value, binned_gaussian_entropy(1.0), 0.02);
  EXPECT_EQ(rd.value, rp.value);
  EXPECT_GT(rd.se, 0.0);
  EXPECT_FALSE(rd.plugin_bias_warning);

  RateOptions opts;
  Rng c(15);
  const RateEstimate cell = rate_codeword_entropy_mc(det, kStd1, opts, c);
  EXPECT_NEAR(cell.value, binned_gaussian_entropy(1.0), 3 * cell.se + 0.005);
}

TEST(Codec, EvaluateDistortionIdentities) {
  EvalBudget budget;
  budget.n_rate = 2000;
  budget.n_dist = 100000;
  budget.n_perc = 2000;
  for (auto family : {LatticeFamily::IntegerZ, LatticeFamily::E8}) {
    const Lattice l = build_lattice(family, 8, 0.8);
    Rng rng(16);
    const Estimate sigma2 = second_moment_mc(l, 400000, rng);

    const RDPoint sd = evaluate(CodecConfig::with_identity(CodecMode::SD, l, kStd8), kStd8, budget,
                                PerceptionMetric::SlicedW2Sq, rng);
    EXPECT_NEAR(sd.distortion, sigma2.value, 3 * std::hypot(sd.distortion_se, sigma2.se));

    // PD error = second moment + deterministic quantisation error.
    const RDPoint pd = evaluate(CodecConfig::with_identity(CodecMode::PD, l, kStd8, 1.0), kStd8, budget,
                                PerceptionMetric::SlicedW2Sq, rng);
    const RDPoint det = evaluate(CodecConfig::with_identity(CodecMode::Deterministic, l, kStd8), kStd8, budget,
                                 PerceptionMetric::SlicedW2Sq, rng);
    const double se = std::sqrt(pd.distortion_se * pd.distortion_se + det.distortion_se * det.distortion_se +
                                sigma2.se * sigma2.se);
    EXPECT_NEAR(pd.distortion, sigma2.value + det.distortion, 3 * se);
  }
}

TEST(Codec, DegenerateDeterministicEndpoint) {
  const Lattice coarse = build_lattice(LatticeFamily::IntegerZ, 8, 64.0);
  CodecConfig det = CodecConfig::with_gains(CodecMode::Deterministic, coarse, kStd8, 1.0, 0.0);
  EvalBudget budget;
  budget.n_rate = 20000;
  budget.n_dist = 50000;
  budget.n_perc = 50000;
  budget.pd_rate = PdRateEstimator::PlugIn;
  Rng rng(17);
  const RDPoint p = evaluate(det, kStd8, budget, PerceptionMetric::ExactGaussianW2Sq, rng);
  EXPECT_EQ(p.rate, 0.0);
  EXPECT_NEAR(p.distortion, 1.0, 3 * p.distortion_se);
  EXPECT_NEAR(p.perception, 1.0, 1e-12);
}

TEST(Codec, EvaluateIsDeterministic) {
  const CodecConfig qsd = CodecConfig::with_identity(CodecMode::QSD, build_lattice(LatticeFamily::E8, 8, 1.0),
                                                     kStd8, 1.0, 2);
  EvalBudget budget;
  budget.n_rate = 1000;
  budget.n_dist = 4000;
  budget.n_perc = 500;
  Rng a(18);
  Rng b(18);
  const RDPoint p = evaluate(qsd, kStd8, budget, PerceptionMetric::SlicedW2Sq, a);
  const RDPoint q = evaluate(qsd, kStd8, budget, PerceptionMetric::SlicedW2Sq, b);
  EXPECT_EQ(p.rate, q.rate);
  EXPECT_EQ(p.distortion, q.distortion);
  EXPECT_EQ(p.perception, q.perception);
  EXPECT_GE(p.rate, 0.0);
}

TEST(Codec, PdSdIdentity) {
  Rng rng(19);
  const auto z = verify_pd_sd_identity(build_lattice(LatticeFamily::IntegerZ, 8, 1.0), 1.0, 100000, rng);
  EXPECT_NEAR(z.residual.value, 0.0, 3 * z.residual.se);
  const auto e = verify_pd_sd_identity(build_lattice(LatticeFamily::E8, 8, 1.0), 2.0, 100000, rng);
  EXPECT_NEAR(e.residual.value, 0.0, 3 * e.residual.se);
  const auto lp = verify_pd_sd_identity(build_lattice(LatticeFamily::E8, 8, 1.0), 1.0, 100000, rng, true);
  EXPECT_EQ(lp.quantization_error.value, 0.0);
  EXPECT_NEAR(lp.pd_error.value, lp.sd_error.value, 3 * std::hypot(lp.pd_error.se, lp.sd_error.se));
}

TEST(Codec, ContractAndConfigErrors) {
  const Lattice z8 = build_lattice(LatticeFamily::IntegerZ, 8, 1.0);
  EXPECT_THROW(Codec(CodecConfig::with_identity(CodecMode::PD, z8, kStd8, 0.5)), ConfigError);
  EXPECT_THROW(Codec(CodecConfig::with_identity(CodecMode::QSD, build_lattice(LatticeFamily::BarnesWall16, 16, 1.0),
                                                GaussianSpec::isotropic(16, 1.0), 1.0, 3)),
               ConfigError);
  Rng rng(20);
  RateOptions opts;
  const CodecConfig qsd = CodecConfig::with_identity(CodecMode::QSD, z8, kStd8, 1.0, 2);
  EXPECT_THROW(rate_noisy_proxy_mc(qsd, kStd8, opts, rng), ContractError);
  const CodecConfig pd = CodecConfig::with_identity(CodecMode::PD, z8, kStd8);
  EXPECT_THROW(rate_conditional_mc(pd, kStd8, opts, rng), ContractError);
  EXPECT_THROW(rate_plugin_entropy(CodecConfig::with_identity(CodecMode::SD, z8, kStd8), kStd8, 20000, rng),
               ContractError);
  opts.n_outer = 10;
  EXPECT_THROW(rate_conditional_mc(CodecConfig::with_identity(CodecMode::SD, z8, kStd8), kStd8, opts, rng),
               ContractError);
  RateOptions ok;
  EXPECT_THROW(rate_conditional_mc(CodecConfig::with_identity(CodecMode::SD, z8, kStd8), GaussianSpec::isotropic(8, 2.0),
                                   ok, rng),
               ContractError);
}
