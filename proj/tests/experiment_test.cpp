#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ltc/errors.hpp"
#include "ltc/experiment.hpp"

using namespace ltc;

namespace {
const char* kSmall = R"(seed: 3
source:
  dim: 8
  variance: 1.0
codecs:
  - family: Z
    mode: deterministic
  - family: E8
    mode: sd
    scales: [0.5, 1.0]
budgets:
  n_rate: 1000
  n_inner: 64
  n_dist: 2000
  n_perc: 500
  n_projections: 10
)";

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text, "cfg.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string csv_of(const RunConfig& config) {
  std::ostringstream out;
  write_csv(out, config, run_eval(config));
  return out.str();
}

RDPoint point(double D, double R, double se = 0.0, double dse = 0.0) {
  RDPoint p;
  p.distortion = D;
  p.rate = R;
  p.rate_se = se;
  p.distortion_se = dse;
  return p;
}
}  // namespace

TEST(Experiment, ParsesSchemaAndDefaults) {
  const RunConfig c = parse_run_config(kSmall);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.source.dim(), 8);
  ASSERT_EQ(c.codecs.size(), 2u);
  EXPECT_EQ(c.codecs[0].scales, std::vector<double>{1.0});
  EXPECT_EQ(c.codecs[1].family, LatticeFamily::E8);
  EXPECT_EQ(c.codecs[1].scales.size(), 2u);
  EXPECT_EQ(c.budget.n_projections, 10);
  EXPECT_EQ(c.perception_metric, PerceptionMetric::SlicedW2Sq);
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Experiment, ErrorsCarryLineNumbers) {
  std::string text = kSmall;
  text.replace(text.find("    mode: sd"), 12, "    mode: sd\n    colour: red");
  EXPECT_NE(error_of(text).find("cfg.yaml:10:"), std::string::npos) << error_of(text);
  EXPECT_NE(error_of(text).find("colour"), std::string::npos);

  text = kSmall;
  text.replace(text.find("family: E8"), 10, "family: E7");
  EXPECT_NE(error_of(text).find("cfg.yaml:8:"), std::string::npos) << error_of(text);

  text = kSmall;
  text.replace(text.find("dim: 8"), 6, "dim: 4");
  EXPECT_NE(error_of(text).find("E8 requires n = 8"), std::string::npos) << error_of(text);

  EXPECT_NE(error_of("seed: 1\nsource: {dim: 2\n").find("cfg.yaml:"), std::string::npos);
  EXPECT_NE(error_of("seed: 1\nsource: {dim: 2}\n").find("codecs"), std::string::npos);
  EXPECT_NE(error_of("seed: 1\nsource: {dim: 2}\ncodecs: [{family: Z, mode: pd, s: 0.5}]\n").find("cfg.yaml:3:"),
            std::string::npos);
  EXPECT_NE(error_of("seed: 1\nsource: {dim: 2}\ncodecs: [{family: Z, mode: sd}]\nbudgets: {n_rate: 10}\n")
                .find("n_rate must be >= 1000"),
            std::string::npos);
}

TEST(Experiment, ConstructionValidation) {
  const std::string head = "seed: 1\nsource: {dim: 8, variance: 1}\ncodecs:\n";
  EXPECT_NE(error_of(head + "  - {family: Z, mode: sd, scale: 2, construction: {D: 0.5}}\n").find("conflicts"),
            std::string::npos);
  EXPECT_NE(error_of(head + "  - {family: Z, mode: pd, construction: {D: 2.5}}\n").find("cfg.yaml:4:"),
            std::string::npos);
  EXPECT_NE(error_of(head + "  - {family: Z, mode: deterministic, construction: {D: 0.5}}\n").find("sd, qsd"),
            std::string::npos);
  EXPECT_EQ(error_of(head + "  - {family: E8, mode: qsd, gamma: 3, construction: {D: 0.5, P: 0}}\n"), "");
}

TEST(Experiment, EvalIsDeterministicAndSchemaStable) {
  const RunConfig c = parse_run_config(kSmall);
  const std::string first = csv_of(c);
  EXPECT_EQ(first, csv_of(c));
  std::istringstream in(first);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 17) << line;
    EXPECT_EQ(line.find("nan"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 3);
  std::ostringstream a, b;
  const auto result = run_eval(c);
  write_sidecar(a, c, result);
  write_sidecar(b, c, result);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Experiment, RowsReproduceInIsolation) {
  // Row i depends only on (seed, i): the second row of a two-row run equals
  // the second row of a run whose first codec differs.
  const RunConfig a = parse_run_config(kSmall);
  std::string other = kSmall;
  other.replace(other.find("mode: deterministic"), 19, "mode: pd");
  const RunConfig b = parse_run_config(other);
  const auto ra = run_eval(a);
  const auto rb = run_eval(b);
  EXPECT_EQ(ra[1].point.rate, rb[1].point.rate);
  EXPECT_EQ(ra[2].point.distortion, rb[2].point.distortion);
  EXPECT_EQ(ra[1].point.seed, derive_seed(3, "row", 1));
}

TEST(Experiment, RateFallsAsScaleGrows) {
  const RunConfig c = parse_run_config(R"(seed: 5
source: {dim: 8, variance: 1}
codecs:
  - {family: Z, mode: pd, scales: [0.5, 1, 2, 4]}
  - {family: E8, mode: sd, scales: [0.5, 1, 2, 4]}
budgets: {n_rate: 2000, n_inner: 128, n_dist: 2000, n_perc: 500}
)");
  const auto rows = run_eval(c);
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (i == 4) continue;
    EXPECT_LT(rows[i].point.rate, rows[i - 1].point.rate + 3.0 * std::hypot(rows[i].point.rate_se, rows[i - 1].point.rate_se));
  }
}

TEST(Experiment, BoundsTable) {
  const auto rows = bounds_table(1.0, {0.25, 1.0, 2.0}, {0.0, INFINITY});
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_NEAR(rows[1].rdp, 0.2075187496, 1e-9);
  EXPECT_NEAR(rows[1].no_shared_bound, 0.5, 1e-12);
  EXPECT_EQ(rows[2].rdp, 0.0);
  EXPECT_EQ(rows[2].no_shared_bound, 0.0);
  EXPECT_NEAR(rows[3].rdp, 1.0, 1e-12);
  for (std::size_t i = 3; i < 6; ++i) EXPECT_NEAR(rows[i].rdp, std::max(0.5 * std::log2(1.0 / rows[i].D), 0.0), 1e-12);
  const auto bad = bounds_table(1.0, {-1.0}, {0.0});
  EXPECT_FALSE(bad[0].error.empty());
  EXPECT_TRUE(std::isnan(bad[0].rdp));
}

TEST(Experiment, RateAtDistortion) {
  const std::vector<RDPoint> curve{point(0.4, 1.0, 0.01, 0.0), point(0.1, 2.0, 0.02, 0.0), point(0.2, 1.5, 0.01, 0.0)};
  const Estimate mid = rate_at_distortion(curve, 0.3);
  EXPECT_NEAR(mid.value, 1.25, 1e-12);
  EXPECT_NEAR(mid.se, std::sqrt(0.25 * 1e-4 + 0.25 * 1e-4), 1e-12);
  EXPECT_NEAR(rate_at_distortion(curve, 0.1).value, 2.0, 1e-12);
  EXPECT_NEAR(rate_at_distortion(curve, 0.4).value, 1.0, 1e-12);
  // Distortion uncertainty enters through the slope (-2.5 bits per unit of D here).
  const std::vector<RDPoint> noisy{point(0.2, 1.5, 0.0, 0.004), point(0.4, 1.0, 0.0, 0.0)};
  EXPECT_NEAR(rate_at_distortion(noisy, 0.2).se, 2.5 * 0.004, 1e-12);
  EXPECT_THROW(rate_at_distortion(curve, 0.05), ContractError);
  EXPECT_THROW(rate_at_distortion({point(0.1, 1.0)}, 0.1), ContractError);
}

TEST(Experiment, SelftestPassesAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& r : run_selftest(seed)) EXPECT_TRUE(r.passed) << seed << " " << r.suite << ": " << r.detail;
  }
}

TEST(Experiment, SelftestCatchesCorruptedDecoder) {
  ltc::testing::set_e8_decoder_fault(true);
  const auto results = run_selftest(1);
  ltc::testing::set_e8_decoder_fault(false);
  ASSERT_FALSE(results.empty());
  EXPECT_EQ(results[0].suite, "oracle-equivalence");
  EXPECT_FALSE(results[0].passed);
  EXPECT_NE(results[0].detail.find("E8"), std::string::npos);
}
