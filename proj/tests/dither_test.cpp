#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ltc/dither.hpp"
#include "ltc/errors.hpp"
#include "ltc/stats.hpp"

using namespace ltc;

namespace {
bool in_cell(const Lattice& l, std::span<const double> u) {
  const std::vector<double> q = l.quantize(u);
  return std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; });
}
}  // namespace

TEST(Dither, CellUniformOnZ1MatchesUniformCdf) {
  const Lattice z1 = build_lattice(LatticeFamily::IntegerZ, 1, 1.0);
  Rng rng(1);
  std::vector<double> u(100000);
  for (double& v : u) {
    v = sample_cell_uniform(z1, rng)[0];
    ASSERT_GE(v, -0.5);
    ASSERT_LT(v, 0.5);
  }
  const double d = ks_statistic_one_sample(u, [](double t) { return std::clamp(t + 0.5, 0.0, 1.0); });
  // One-sample 1% critical value ~ 1.628 / sqrt(n).
  EXPECT_LT(d, 1.628 / std::sqrt(100000.0));
}

TEST(Dither, CellUniformMembershipAndZeroMean) {
  Rng rng(2);
  for (auto [family, n] : std::vector<std::pair<LatticeFamily, int>>{{LatticeFamily::IntegerZ, 4},
                                                                      {LatticeFamily::DnChecker, 8},
                                                                      {LatticeFamily::DnDual, 8},
                                                                      {LatticeFamily::E8, 8},
                                                                      {LatticeFamily::BarnesWall16, 16}}) {
    const Lattice l = build_lattice(family, n, 0.8);
    std::vector<RunningStats> coords(static_cast<std::size_t>(n));
    for (int s = 0; s < 50000; ++s) {
      const std::vector<double> u = sample_cell_uniform(l, rng);
      ASSERT_TRUE(in_cell(l, u)) << l.name();
      for (int i = 0; i < n; ++i) coords[i].add(u[i]);
    }
    for (const auto& c : coords) EXPECT_NEAR(c.mean(), 0.0, 3.5 * c.se()) << l.name();
  }
}

TEST(Dither, CellSecondMomentAgreesWithSecondMomentMc) {
  const Lattice e8 = build_lattice(LatticeFamily::E8, 8, 1.0);
  Rng rng(3);
  RunningStats direct;
  for (int s = 0; s < 200000; ++s) {
    const std::vector<double> u = sample_cell_uniform(e8, rng);
    double norm2 = 0.0;
    for (double v : u) norm2 += v * v;
    direct.add(norm2 / 8.0);
  }
  const Estimate mc = second_moment_mc(e8, 200000, rng);
  EXPECT_NEAR(direct.mean(), mc.value, 3 * combined_se(direct.estimate(), mc));
}

TEST(Dither, ModLattice) {
  const Lattice z1 = build_lattice(LatticeFamily::IntegerZ, 1, 1.0);
  EXPECT_NEAR(mod_lattice(z1, std::vector<double>{1.7})[0], -0.3, 1e-12);
  EXPECT_EQ(mod_lattice(z1, std::vector<double>{0.2})[0], 0.2);
  const Lattice e8 = build_lattice(LatticeFamily::E8, 8, 1.0);
  Rng rng(4);
  const std::vector<double> v = sample_cell_uniform(e8, rng);
  const std::vector<std::int64_t> k{1, 0, -2, 0, 3, 0, 0, 1};
  const std::vector<double> lam = e8.embed(k);
  std::vector<double> x(8);
  for (int i = 0; i < 8; ++i) x[i] = lam[i] + v[i];
  const std::vector<double> r = mod_lattice(e8, x);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(r[i], v[i], 1e-12);
  EXPECT_THROW(mod_lattice(z1, std::vector<double>{INFINITY}), InputError);
}

TEST(Dither, CosetRepresentativesSmallCases) {
  const Lattice z1 = build_lattice(LatticeFamily::IntegerZ, 1, 1.0);
  const auto one = coset_representatives(NestedPair(build_lattice(LatticeFamily::E8, 8, 1.0), 1));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], std::vector<double>(8, 0.0));

  const NestedPair half(z1, 2);
  EXPECT_EQ(half.coset_count(), 2u);
  EXPECT_DOUBLE_EQ(half.shared_randomness_rate(), 1.0);
  const auto reps = coset_representatives(half);
  EXPECT_EQ(reps[0][0], 0.0);
  EXPECT_EQ(reps[1][0], -0.5);

  const NestedPair thirds(build_lattice(LatticeFamily::IntegerZ, 2, 1.0), 3);
  EXPECT_EQ(coset_representatives(thirds).size(), 9u);
  EXPECT_NEAR(thirds.shared_randomness_rate(), std::log2(3.0), 1e-15);
}

TEST(Dither, CosetRepresentativesMatchFinePointsInCell) {
  // Independent count: scan fine points of Z^2 / gamma in a box and keep those
  // inside the half-open coarse cell.
  for (int gamma : {2, 3, 4}) {
    const Lattice z2 = build_lattice(LatticeFamily::IntegerZ, 2, 1.0);
    std::set<std::pair<long, long>> scanned;
    for (int a = -2 * gamma; a <= 2 * gamma; ++a) {
      for (int b = -2 * gamma; b <= 2 * gamma; ++b) {
        const std::vector<double> p{static_cast<double>(a) / gamma, static_cast<double>(b) / gamma};
        if (in_cell(z2, p)) scanned.insert({a, b});
      }
    }
    std::set<std::pair<long, long>> listed;
    for (const auto& r : coset_representatives(NestedPair(z2, gamma))) {
      listed.insert({std::lround(r[0] * gamma), std::lround(r[1] * gamma)});
    }
    EXPECT_EQ(listed, scanned) << "gamma=" << gamma;
  }
}

TEST(Dither, CosetRepresentativesOnE8AreCompleteAndDistinct) {
  for (int gamma : {2, 3}) {
    const NestedPair nested(build_lattice(LatticeFamily::E8, 8, 1.0), gamma);
    const auto reps = coset_representatives(nested);
    ASSERT_EQ(reps.size(), nested.coset_count());
    std::set<std::vector<long>> seen;
    for (const auto& r : reps) {
      EXPECT_TRUE(in_cell(nested.coarse(), r));
      EXPECT_NO_THROW(nested.fine().coordinates_of(r));
      std::vector<long> key(8);
      for (int i = 0; i < 8; ++i) key[i] = std::lround(r[i] * 2 * gamma);
      seen.insert(key);
    }
    EXPECT_EQ(seen.size(), reps.size()) << "gamma=" << gamma;
  }
}

TEST(Dither, CoarseIsContainedInFine) {
  const NestedPair nested(build_lattice(LatticeFamily::BarnesWall16, 16, 1.0), 2);
  const Eigen::MatrixXd g = nested.coarse().generator();
  for (int r = 0; r < 16; ++r) {
    std::vector<double> row(16);
    for (int i = 0; i < 16; ++i) row[i] = g(r, i);
    EXPECT_NO_THROW(nested.fine().coordinates_of(row));
  }
}

TEST(Dither, CosetSamplingIsUniform) {
  Rng rng(5);
  const NestedPair z1(build_lattice(LatticeFamily::IntegerZ, 1, 1.0), 3);
  std::vector<double> counts(3, 0.0);
  const int draws = 90000;
  for (int i = 0; i < draws; ++i) counts[sample_coset_uniform(z1, rng).index] += 1.0;
  const double se = std::sqrt((1.0 / 3) * (2.0 / 3) / draws);
  for (double c : counts) EXPECT_NEAR(c / draws, 1.0 / 3, 3 * se);

  const NestedPair z8(build_lattice(LatticeFamily::IntegerZ, 8, 1.0), 2);
  std::vector<double> cells(256, 0.0);
  const int big = 1000000;
  for (int i = 0; i < big; ++i) cells[sample_coset_uniform(z8, rng).index] += 1.0;
  const double expected = big / 256.0;
  double chi2 = 0.0;
  for (double c : cells) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, chi_square_quantile_upper(255, 0.001));

  const NestedPair trivial(build_lattice(LatticeFamily::E8, 8, 1.0), 1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_coset_uniform(trivial, rng).vector, std::vector<double>(8, 0.0));
}

TEST(Dither, CosetCap) {
  EXPECT_THROW(NestedPair(build_lattice(LatticeFamily::IntegerZ, 16, 1.0), 3), ConfigError);
  EXPECT_NO_THROW(NestedPair(build_lattice(LatticeFamily::BarnesWall16, 16, 1.0), 2));
  EXPECT_THROW(NestedPair(build_lattice(LatticeFamily::IntegerZ, 2, 1.0), 0), ConfigError);
}
