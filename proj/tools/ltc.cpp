// Command-line driver. Exit codes: 0 success, 1 configuration error, 2 runtime
// numeric error, 3 selftest failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ltc/errors.hpp"
#include "ltc/experiment.hpp"
#include "ltc/lattice.hpp"
#include "ltc/metrics.hpp"
#include "ltc/rcc.hpp"
#include "ltc/theory.hpp"

using namespace ltc;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitSelftest = 3;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Comma-separated numbers; accepts inf.
std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", what, item));
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

int cmd_eval(const std::string& path, const std::string& output_override) {
  RunConfig config = load_run_config(path);
  if (!output_override.empty()) {
    config.csv_path = output_override;
    config.sidecar_path.clear();
  }
  const auto rows = run_eval(config);
  if (config.csv_path.empty() || config.csv_path == "-") {
    write_csv(std::cout, config, rows);
    if (!config.sidecar_path.empty()) {
      std::ofstream side(config.sidecar_path);
      write_sidecar(side, config, rows);
    }
    return 0;
  }
  std::ofstream csv(config.csv_path);
  if (!csv) throw ConfigError("cannot write '" + config.csv_path + "'");
  write_csv(csv, config, rows);
  const std::string sidecar = config.sidecar_path.empty() ? config.csv_path + ".json" : config.sidecar_path;
  std::ofstream side(sidecar);
  if (!side) throw ConfigError("cannot write '" + sidecar + "'");
  write_sidecar(side, config, rows);
  std::cerr << fmt::format("wrote {} rows to {} (sidecar {})\n", rows.size(), config.csv_path, sidecar);
  return 0;
}

int cmd_bounds(double sigma2, const std::string& D_text, const std::string& P_text) {
  const auto rows = bounds_table(sigma2, parse_list(D_text, "--D"), parse_list(P_text, "--P"));
  std::cout << "sigma2,D,P,rdp_bits,no_shared_bits,error\n";
  for (const auto& r : rows) {
    std::cout << num(sigma2) << ',' << num(r.D) << ',' << num(r.P) << ',' << num(r.rdp) << ','
              << num(r.no_shared_bound) << ',' << r.error << '\n';
  }
  return 0;
}

int cmd_rcc(RCCConfig config, std::size_t trials) {
  Rng rng(config.seed);
  const auto report = rcc_evaluate(config, trials, rng);
  const auto& p = report.point;
  std::cout << "sigma2,D,P,N,trials,rate_bits_per_dim,rate_se,mse_per_dim,mse_se,perception_per_dim,"
               "xhat_variance,xhat_variance_se,mutual_information_bits,mean_candidates\n";
  std::cout << num(config.sigma2) << ',' << num(config.target_D) << ',' << num(config.target_P) << ','
            << config.codebook_size << ',' << trials << ',' << num(p.rate) << ',' << num(p.rate_se) << ','
            << num(p.distortion) << ',' << num(p.distortion_se) << ',' << num(p.perception) << ','
            << num(report.xhat_variance) << ',' << num(report.xhat_variance_se) << ','
            << num(report.mutual_information_bits) << ',' << num(report.mean_candidates) << '\n';
  return 0;
}

int cmd_nsm(const std::string& family, int dim, double scale, std::size_t samples, std::uint64_t seed) {
  const Lattice lattice = build_lattice(parse_lattice_family(family), dim, scale);
  Rng rng(seed);
  const auto sm = second_moment_mc(lattice, samples, rng);
  const auto g = nsm_mc(lattice, samples, rng);
  std::cout << "lattice,dim,scale,volume,second_moment,second_moment_se,nsm,nsm_se,samples\n";
  std::cout << lattice.name() << ',' << dim << ',' << num(scale) << ',' << num(lattice.volume()) << ','
            << num(sm.value) << ',' << num(sm.se) << ',' << num(g.value) << ',' << num(g.se) << ',' << samples
            << '\n';
  return 0;
}

int cmd_construct_sd(double sigma2, double D, double P) {
  const auto c = sd_params(sigma2, D, P);
  std::cout << "sigma2,D,P,branch,lattice_second_moment,analysis_scale,synthesis_scale\n";
  std::cout << num(sigma2) << ',' << num(D) << ',' << num(P) << ','
            << (c.branch == SdBranch::PerceptionActive ? "perception_active" : "perception_inactive") << ','
            << num(c.lattice_second_moment) << ',' << num(c.analysis_scale) << ',' << num(c.synthesis_scale) << '\n';
  return 0;
}

int cmd_construct_pd(double sigma2, double D, double nu, double s) {
  const bool general = std::isfinite(nu) || std::isfinite(s);
  if (general && !(std::isfinite(nu) && std::isfinite(s))) throw ConfigError("--nu and --s must be given together");
  const auto c = general ? pd_params_general(sigma2, nu, s) : pd_params(sigma2, D);
  std::cout << "sigma2,nu,alpha,beta,s,lattice_second_moment,constraint_residual\n";
  std::cout << num(sigma2) << ',' << num(c.nu) << ',' << num(c.alpha) << ',' << num(c.beta) << ',' << num(c.s)
            << ',' << num(c.lattice_second_moment) << ',' << num(c.constraint_residual) << '\n';
  return 0;
}

int cmd_lattice_gaussian(const std::string& family, int dim, double scale, double sigma2, const std::string& center,
                         std::size_t samples, std::uint64_t seed) {
  const Lattice lattice = build_lattice(parse_lattice_family(family), dim, scale);
  std::vector<double> c = center.empty() ? std::vector<double>(dim, 0.0) : parse_list(center, "--center");
  if (c.size() == 1 && dim > 1) c.assign(dim, c.front());
  if (static_cast<int>(c.size()) != dim) throw ConfigError("--center must have one entry or dim entries");
  LatticeGaussianSampler sampler(lattice, c, sigma2);
  Rng rng(seed);
  RunningStats second;
  double mean_offset = 0.0;
  std::vector<RunningStats> mean(dim);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto p = sampler.sample(rng);
    double d2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      d2 += (p.embedding[j] - c[j]) * (p.embedding[j] - c[j]);
      mean[j].add(p.embedding[j] - c[j]);
    }
    second.add(d2 / dim);
  }
  for (const auto& m : mean) mean_offset = std::max(mean_offset, std::abs(m.mean()) / std::max(m.se(), 1e-300));
  std::cout << "lattice,dim,sigma2,samples,support_points,radius,truncation_bound,second_moment_per_dim,"
               "second_moment_se,bound_sigma2,max_mean_offset_in_se\n";
  std::cout << lattice.name() << ',' << dim << ',' << num(sigma2) << ',' << samples << ','
            << sampler.support_size() << ',' << num(sampler.radius()) << ',' << num(sampler.truncation_bound())
            << ',' << num(second.mean()) << ',' << num(second.se()) << ',' << num(sigma2) << ','
            << num(mean_offset) << '\n';
  return 0;
}

int cmd_flatness(const std::string& family, int dim, double scale, const std::string& gammas, std::size_t probes,
                 std::uint64_t seed) {
  const Lattice lattice = build_lattice(parse_lattice_family(family), dim, scale);
  std::cout << "lattice,dim,gamma,flatness_lower_bound,probes,terms,representation,truncation_bound\n";
  for (double gamma : parse_list(gammas, "--gamma")) {
    Rng rng(derive_seed(seed, "flatness", static_cast<std::uint64_t>(std::llround(gamma * 1e6))));
    const auto f = flatness_estimate(lattice, gamma, probes, rng);
    std::cout << lattice.name() << ',' << dim << ',' << num(gamma) << ',' << num(f.value) << ',' << f.probes << ','
              << f.terms << ',' << (f.dual_sum ? "dual" : "primal") << ',' << num(f.truncation_bound) << '\n';
  }
  return 0;
}

int cmd_selftest(std::uint64_t seed, bool inject_fault) {
  testing::set_e8_decoder_fault(inject_fault);
  const auto results = run_selftest(seed);
  testing::set_e8_decoder_fault(false);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice transform coding experiments"};
  app.require_subcommand(1);

  std::string config_path, output;
  auto* eval = app.add_subcommand("eval", "Evaluate every codec descriptor of a YAML config");
  eval->add_option("config", config_path, "configuration file")->required();
  eval->add_option("-o,--output", output, "CSV path override ('-' for stdout)");

  double sigma2 = 1.0;
  std::string D_text = "0.25,0.5,1,2", P_text = "0,inf";
  auto* bounds = app.add_subcommand("bounds", "Gaussian R(D,P) and R(D/2,inf) reference table");
  bounds->add_option("--sigma2", sigma2, "source variance");
  bounds->add_option("--D", D_text, "comma-separated distortions");
  bounds->add_option("--P", P_text, "comma-separated perception levels (inf allowed)");

  RCCConfig rcc_config;
  std::size_t trials = 100000;
  std::string rcc_P = "0";
  auto* rcc = app.add_subcommand("rcc", "Reverse channel coding of the optimal Gaussian channel");
  rcc->add_option("--sigma2", rcc_config.sigma2, "source variance");
  rcc->add_option("--D", rcc_config.target_D, "target distortion");
  rcc->add_option("--P", rcc_P, "target perception (inf allowed)");
  rcc->add_option("--N", rcc_config.codebook_size, "candidates per trial");
  rcc->add_option("--block-dim", rcc_config.block_dim, "dimensions coded jointly");
  rcc->add_option("--trials", trials, "number of trials");
  rcc->add_option("--seed", rcc_config.seed, "master seed");

  std::string family = "E8";
  int dim = 8;
  double scale = 1.0;
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
  auto* nsm = app.add_subcommand("nsm", "Monte-Carlo second moment and normalized second moment");
  nsm->add_option("--family", family, "Z, Dn, DnDual, E8 or BW16");
  nsm->add_option("--dim", dim, "dimension");
  nsm->add_option("--scale", scale, "lattice scale");
  nsm->add_option("--samples", samples, "Monte-Carlo samples");
  nsm->add_option("--seed", seed, "seed");

  double D = 0.5, P = 0.0;
  auto* csd = app.add_subcommand("construct-sd", "Shared-dither construction parameters");
  csd->add_option("--sigma2", sigma2, "source variance");
  csd->add_option("--D", D, "target distortion")->required();
  csd->add_option("--P", P, "target perception");

  double nu = NAN, s = NAN;
  auto* cpd = app.add_subcommand("construct-pd", "Private-dither construction parameters");
  cpd->add_option("--sigma2", sigma2, "source variance");
  cpd->add_option("--D", D, "target distortion");
  cpd->add_option("--nu", nu, "general mode: nu");
  cpd->add_option("--s", s, "general mode: dither multiplier");

  std::string center;
  double lg_sigma2 = 1.0;
  std::size_t lg_samples = 100000;
  auto* dlg = app.add_subcommand("diag-lattice-gaussian", "Lattice Gaussian sampling diagnostics");
  dlg->add_option("--family", family, "lattice family");
  dlg->add_option("--dim", dim, "dimension");
  dlg->add_option("--scale", scale, "lattice scale");
  dlg->add_option("--sigma2", lg_sigma2, "Gaussian parameter sigma^2");
  dlg->add_option("--center", center, "centre (one value or dim comma-separated values)");
  dlg->add_option("--samples", lg_samples, "draws");
  dlg->add_option("--seed", seed, "seed");

  std::string gammas = "0.2,0.4,0.8";
  std::size_t probes = 100;
  auto* dfl = app.add_subcommand("diag-flatness", "Flatness factor lower bounds by probing");
  dfl->add_option("--family", family, "lattice family");
  dfl->add_option("--dim", dim, "dimension");
  dfl->add_option("--scale", scale, "lattice scale");
  dfl->add_option("--gamma", gammas, "comma-separated gamma values");
  dfl->add_option("--probes", probes, "cell-uniform probes");
  dfl->add_option("--seed", seed, "seed");

  bool inject = false;
  auto* st = app.add_subcommand("selftest", "Reduced-budget invariant suites");
  st->add_option("--seed", seed, "seed");
  st->add_flag("--inject-e8-fault", inject, "corrupt the E8 decoder (mutation check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*eval) return cmd_eval(config_path, output);
    if (*bounds) return cmd_bounds(sigma2, D_text, P_text);
    if (*rcc) {
      rcc_config.target_P = parse_list(rcc_P, "--P").front();
      return cmd_rcc(rcc_config, trials);
    }
    if (*nsm) return cmd_nsm(family, dim, scale, samples, seed);
    if (*csd) return cmd_construct_sd(sigma2, D, P);
    if (*cpd) return cmd_construct_pd(sigma2, D, nu, s);
    if (*dlg) return cmd_lattice_gaussian(family, dim, scale, lg_sigma2, center, lg_samples, seed);
    if (*dfl) return cmd_flatness(family, dim, scale, gammas, probes, seed);
    if (*st) return cmd_selftest(seed, inject);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
