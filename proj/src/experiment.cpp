#include "ltc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "ltc/errors.hpp"
#include "ltc/parallel.hpp"
#include "ltc/stats.hpp"
#include "ltc/theory.hpp"

namespace ltc {

namespace {

// ---- YAML helpers: every error carries origin:line ----

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
    const int line = node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
    throw ConfigError(fmt::format("{}:{}: {}", origin_, line, message));
  }

  void expect_map(const YAML::Node& node, const std::string& what, const std::set<std::string>& keys) const {
    if (!node.IsMap()) fail(node, what + " must be a mapping");
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!keys.count(key)) fail(kv.first, fmt::format("unknown key '{}' in {}", key, what));
    }
  }

  template <class T>
  T scalar(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) fail(node, what + " must be a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, fmt::format("{} has an invalid value '{}'", what, node.Scalar()));
    }
  }

  double positive(const YAML::Node& node, const std::string& what) const {
    const double v = scalar<double>(node, what);
    if (!(std::isfinite(v) && v > 0.0)) fail(node, what + " must be positive and finite");
    return v;
  }

  std::size_t count(const YAML::Node& node, const std::string& what, std::size_t minimum) const {
    const auto v = scalar<long long>(node, what);
    if (v < static_cast<long long>(minimum)) fail(node, fmt::format("{} must be >= {}", what, minimum));
    return static_cast<std::size_t>(v);
  }

  // Scalar broadcast to `dim`, or a list of exactly `dim` values.
  std::vector<double> vector(const YAML::Node& node, const std::string& what, int dim) const {
    if (node.IsScalar()) return std::vector<double>(dim, scalar<double>(node, what));
    if (!node.IsSequence()) fail(node, what + " must be a number or a list");
    if (static_cast<int>(node.size()) != dim) {
      fail(node, fmt::format("{} has {} entries, expected {}", what, node.size(), dim));
    }
    std::vector<double> out;
    for (const auto& v : node) out.push_back(scalar<double>(v, what));
    return out;
  }

  template <class F>
  auto wrap(const YAML::Node& node, F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const Error& e) {
      fail(node, e.what());
    }
  }

 private:
  std::string origin_;
};

GaussianSpec parse_source(const Reader& r, const YAML::Node& node) {
  r.expect_map(node, "source", {"dim", "mean", "variance", "diag_cov"});
  int dim = 0;
  if (node["dim"]) {
    dim = static_cast<int>(r.count(node["dim"], "source.dim", 1));
  } else if (node["diag_cov"] && node["diag_cov"].IsSequence()) {
    dim = static_cast<int>(node["diag_cov"].size());
  } else if (node["mean"] && node["mean"].IsSequence()) {
    dim = static_cast<int>(node["mean"].size());
  } else {
    r.fail(node, "source needs dim (or list-valued mean/diag_cov)");
  }
  if (dim > 64) r.fail(node["dim"] ? node["dim"] : node, "source.dim above 64 is not supported");
  if (node["variance"] && node["diag_cov"]) r.fail(node, "give either source.variance or source.diag_cov");
  GaussianSpec spec;
  spec.mean = node["mean"] ? r.vector(node["mean"], "source.mean", dim) : std::vector<double>(dim, 0.0);
  if (node["diag_cov"]) {
    spec.diag_cov = r.vector(node["diag_cov"], "source.diag_cov", dim);
  } else {
    const double v = node["variance"] ? r.positive(node["variance"], "source.variance") : 1.0;
    spec.diag_cov.assign(dim, v);
  }
  r.wrap(node, [&] { spec.validate(); });
  return spec;
}

bool isotropic(const GaussianSpec& s) {
  for (double v : s.diag_cov) {
    if (v != s.diag_cov.front()) return false;
  }
  return true;
}

CodecDescriptor parse_codec(const Reader& r, const YAML::Node& node, const GaussianSpec& source) {
  r.expect_map(node, "codec",
               {"family", "mode", "scale", "scales", "s", "gamma", "analysis_gain", "synthesis_gain", "construction"});
  CodecDescriptor d;
  if (!node["family"]) r.fail(node, "codec needs a family");
  if (!node["mode"]) r.fail(node, "codec needs a mode");
  d.family = r.wrap(node["family"], [&] { return parse_lattice_family(r.scalar<std::string>(node["family"], "family")); });
  d.mode = r.wrap(node["mode"], [&] {
    try {
      return parse_codec_mode(r.scalar<std::string>(node["mode"], "mode"));
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  });
  if (node["scale"] && node["scales"]) r.fail(node, "give either scale or scales");
  if (node["scale"]) d.scales = {r.positive(node["scale"], "scale")};
  if (node["scales"]) {
    if (!node["scales"].IsSequence() || node["scales"].size() == 0) r.fail(node["scales"], "scales must be a non-empty list");
    d.scales.clear();
    for (const auto& v : node["scales"]) d.scales.push_back(r.positive(v, "scales entry"));
  }
  if (node["s"]) d.s = r.scalar<double>(node["s"], "s");
  if (node["gamma"]) d.gamma = static_cast<int>(r.count(node["gamma"], "gamma", 1));
  if (node["analysis_gain"]) d.analysis_gain = r.scalar<double>(node["analysis_gain"], "analysis_gain");
  if (node["synthesis_gain"]) d.synthesis_gain = r.scalar<double>(node["synthesis_gain"], "synthesis_gain");

  if (const auto c = node["construction"]) {
    r.expect_map(c, "construction", {"D", "P"});
    for (const char* key : {"scale", "scales", "analysis_gain", "synthesis_gain"}) {
      if (node[key]) r.fail(node[key], fmt::format("'{}' conflicts with construction (it is derived)", key));
    }
    if (d.mode == CodecMode::Deterministic) r.fail(c, "construction is defined for sd, qsd and pd only");
    if (d.mode == CodecMode::PD && node["s"]) r.fail(node["s"], "'s' conflicts with a pd construction (it is derived)");
    if (!isotropic(source)) r.fail(c, "construction needs an isotropic source");
    if (!c["D"]) r.fail(c, "construction needs D");
    ConstructionTarget t;
    t.D = r.positive(c["D"], "construction.D");
    t.P = c["P"] ? r.scalar<double>(c["P"], "construction.P") : 0.0;
    const double sigma2 = source.diag_cov.front();
    r.wrap(c, [&] {
      if (d.mode == CodecMode::PD) {
        pd_params(sigma2, t.D);
      } else {
        sd_params(sigma2, t.D, t.P);
      }
    });
    d.construction = t;
    d.scales = {1.0};
  }
  // Family/dimension and codec parameters, checked on a representative build.
  r.wrap(node, [&] {
    const Lattice lattice = build_lattice(d.family, source.dim(), d.scales.front());
    auto cfg = CodecConfig::with_gains(d.mode, lattice, source, d.analysis_gain, d.synthesis_gain, d.s, d.gamma);
    cfg.validate();
  });
  return d;
}

EvalBudget parse_budget(const Reader& r, const YAML::Node& node) {
  r.expect_map(node, "budgets",
               {"n_rate", "n_inner", "n_dist", "n_perc", "n_projections", "pd_rate", "doubling_diagnostic"});
  EvalBudget b;
  if (node["n_rate"]) b.n_rate = r.count(node["n_rate"], "n_rate", 1000);
  if (node["n_inner"]) b.n_inner = r.count(node["n_inner"], "n_inner", 64);
  if (node["n_dist"]) b.n_dist = r.count(node["n_dist"], "n_dist", 2);
  if (node["n_perc"]) b.n_perc = r.count(node["n_perc"], "n_perc", 20);
  if (node["n_projections"]) b.n_projections = static_cast<int>(r.count(node["n_projections"], "n_projections", 1));
  if (node["pd_rate"]) {
    const auto v = r.scalar<std::string>(node["pd_rate"], "pd_rate");
    if (v == "cell_mc") {
      b.pd_rate = PdRateEstimator::CellMc;
    } else if (v == "plugin") {
      b.pd_rate = PdRateEstimator::PlugIn;
      if (b.n_rate < 10000) r.fail(node["pd_rate"], "the plug-in estimator needs n_rate >= 10000");
    } else {
      r.fail(node["pd_rate"], "pd_rate must be cell_mc or plugin");
    }
  }
  if (node["doubling_diagnostic"]) b.doubling_diagnostic = r.scalar<bool>(node["doubling_diagnostic"], "doubling_diagnostic");
  return b;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  const Reader r(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}: {}", origin, e.mark.line + 1, e.msg));
  }
  if (!root.IsMap()) throw ConfigError(origin + ":1: configuration must be a mapping");
  r.expect_map(root, "configuration", {"seed", "perception_metric", "source", "codecs", "budgets", "output"});

  RunConfig config;
  config.text = text;
  if (!root["source"]) r.fail(root, "missing 'source' section");
  if (!root["codecs"]) r.fail(root, "missing 'codecs' section");
  if (!root["seed"]) r.fail(root, "missing 'seed'");
  config.seed = r.scalar<std::uint64_t>(root["seed"], "seed");
  if (root["perception_metric"]) {
    config.perception_metric = r.wrap(root["perception_metric"], [&] {
      try {
        return parse_perception_metric(r.scalar<std::string>(root["perception_metric"], "perception_metric"));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    });
  }
  config.source = parse_source(r, root["source"]);
  const auto codecs = root["codecs"];
  if (!codecs.IsSequence() || codecs.size() == 0) r.fail(codecs, "codecs must be a non-empty list");
  for (const auto& c : codecs) config.codecs.push_back(parse_codec(r, c, config.source));
  if (root["budgets"]) config.budget = parse_budget(r, root["budgets"]);
  if (const auto out = root["output"]) {
    r.expect_map(out, "output", {"csv", "sidecar"});
    if (out["csv"]) config.csv_path = r.scalar<std::string>(out["csv"], "output.csv");
    if (out["sidecar"]) config.sidecar_path = r.scalar<std::string>(out["sidecar"], "output.sidecar");
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string config_hash(const RunConfig& config) { return fmt::format("{:016x}", fnv1a64(config.text)); }

CodecConfig build_codec(const CodecDescriptor& d, double scale, const GaussianSpec& source, Rng& calibration) {
  const int n = source.dim();
  if (!d.construction) {
    const Lattice lattice = build_lattice(d.family, n, scale);
    return CodecConfig::with_gains(d.mode, lattice, source, d.analysis_gain, d.synthesis_gain, d.s, d.gamma);
  }
  constexpr std::size_t kCalibrationSamples = 100000;
  const double sigma2 = source.diag_cov.front();
  const auto& t = *d.construction;
  switch (d.mode) {
    case CodecMode::SD:
      return build_sd_codec(d.family, n, sigma2, sd_params(sigma2, t.D, t.P), kCalibrationSamples, calibration).config;
    case CodecMode::PD:
      return build_pd_codec(d.family, n, sigma2, pd_params(sigma2, t.D), kCalibrationSamples, calibration).config;
    case CodecMode::QSD: {
      const double target = std::pow(std::sqrt(sigma2) - std::sqrt(t.P), 2);
      return build_qsd_codec(d.family, n, sigma2, sd_params(sigma2, t.D, t.P), d.gamma, d.s, target,
                             kCalibrationSamples, calibration)
          .config;
    }
    case CodecMode::Deterministic:
      break;
  }
  throw ConfigError("construction is defined for sd, qsd and pd only");
}

std::vector<ResultRow> run_eval(const RunConfig& config) {
  struct Job {
    const CodecDescriptor* descriptor;
    double scale;
  };
  std::vector<Job> jobs;
  for (const auto& d : config.codecs) {
    for (double scale : d.scales) jobs.push_back({&d, scale});
  }
  // Rows run one after another; each evaluation parallelises internally.
  std::vector<ResultRow> rows(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::uint64_t row_seed = derive_seed(config.seed, "row", i);
    Rng calibration(derive_seed(row_seed, "calibration"));
    const CodecConfig codec = build_codec(*jobs[i].descriptor, jobs[i].scale, config.source, calibration);
    Rng rng(row_seed);
    ResultRow& row = rows[i];
    row.run_id = i;
    row.mode = codec.mode;
    row.family = codec.lattice.family();
    row.lattice_scale = codec.lattice.scale();
    row.gamma = codec.gamma;
    row.s = codec.s;
    row.point = evaluate(codec, config.source, config.budget, config.perception_metric, rng);
    row.point.seed = row_seed;
  }
  return rows;
}

const char* const kCsvHeader =
    "run_id,seed,mode,lattice_family,lattice_scale,gamma,s,rate_bits_per_dim,rate_se,mse_per_dim,mse_se,"
    "perception_per_dim,perception_se,perception_metric,n_rate,n_dist,n_perc,config_hash";

void write_csv(std::ostream& out, const RunConfig& config, const std::vector<ResultRow>& rows) {
  const std::string hash = config_hash(config);
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& p = r.point;
    out << r.run_id << ',' << p.seed << ',' << to_string(r.mode) << ',' << to_string(r.family) << ','
        << num(r.lattice_scale) << ',' << r.gamma << ',' << num(r.s) << ',' << num(p.rate) << ',' << num(p.rate_se)
        << ',' << num(p.distortion) << ',' << num(p.distortion_se) << ',' << num(p.perception) << ','
        << num(p.perception_se) << ',' << to_string(p.perception_metric) << ',' << p.n_rate << ',' << p.n_dist
        << ',' << p.n_perc << ',' << hash << '\n';
  }
}

void write_sidecar(std::ostream& out, const RunConfig& config, const std::vector<ResultRow>& rows) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["config"] = config.text;
  ordered_json source;
  source["mean"] = config.source.mean;
  source["diag_cov"] = config.source.diag_cov;
  j["source"] = source;
  ordered_json budget;
  budget["n_rate"] = config.budget.n_rate;
  budget["n_inner"] = config.budget.n_inner;
  budget["n_dist"] = config.budget.n_dist;
  budget["n_perc"] = config.budget.n_perc;
  budget["n_projections"] = config.budget.n_projections;
  budget["pd_rate"] = config.budget.pd_rate == PdRateEstimator::PlugIn ? "plugin" : "cell_mc";
  budget["doubling_diagnostic"] = config.budget.doubling_diagnostic;
  j["budgets"] = budget;
  j["perception_metric"] = std::string(to_string(config.perception_metric));
  ordered_json diag = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json d;
    d["run_id"] = r.run_id;
    d["rate_estimator"] = r.point.rate_estimator;
    d["clamp_events"] = r.point.clamp_events;
    if (std::isfinite(r.point.inner_doubling_shift)) d["inner_doubling_shift"] = r.point.inner_doubling_shift;
    // Perception is a sliced (or Gaussian-fit) proxy for the W2^2 between the
    // laws of X and Xhat; converse checks inherit that caveat.
    d["perception_caveat"] = r.point.perception_metric == PerceptionMetric::SlicedW2Sq
                                 ? "sliced W2^2 proxy; validated only on Gaussian pairs"
                                 : "W2^2 to the Gaussian fitted to per-coordinate moments";
    diag.push_back(d);
  }
  j["rows"] = diag;
  ordered_json env;
  env["library"] = "ltc 1.0.0";
  env["compiler"] = __VERSION__;
  env["cxx_standard"] = static_cast<long>(__cplusplus);
#ifdef NDEBUG
  env["build"] = "release";
#else
  env["build"] = "debug";
#endif
  env["threads"] = thread_count();
  j["environment"] = env;
  out << j.dump(2) << '\n';
}

std::vector<BoundsRow> bounds_table(double sigma2, const std::vector<double>& D_grid,
                                    const std::vector<double>& P_list) {
  std::vector<BoundsRow> rows;
  for (double P : P_list) {
    for (double D : D_grid) {
      BoundsRow row;
      row.D = D;
      row.P = P;
      try {
        row.rdp = gaussian_rdp(sigma2, D, P);
        row.no_shared_bound = gaussian_rdp(sigma2, D / 2.0, INFINITY);
      } catch (const Error& e) {
        row.rdp = row.no_shared_bound = std::nan("");
        row.error = e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

Estimate rate_at_distortion(std::vector<RDPoint> curve, double D) {
  if (curve.size() < 2) throw ContractError("rate_at_distortion needs at least two points");
  std::sort(curve.begin(), curve.end(), [](const RDPoint& a, const RDPoint& b) { return a.distortion < b.distortion; });
  if (!(D >= curve.front().distortion && D <= curve.back().distortion)) {
    throw ContractError(fmt::format("distortion {} outside the measured range [{}, {}]", D, curve.front().distortion,
                                    curve.back().distortion));
  }
  std::size_t i = 1;
  while (i + 1 < curve.size() && curve[i].distortion < D) ++i;
  const RDPoint& lo = curve[i - 1];
  const RDPoint& hi = curve[i];
  const double span = hi.distortion - lo.distortion;
  const double w = span > 0.0 ? (D - lo.distortion) / span : 0.0;
  const double slope = span > 0.0 ? (hi.rate - lo.rate) / span : 0.0;
  const double a = 1.0 - w;
  const double var = a * a * (lo.rate_se * lo.rate_se + slope * slope * lo.distortion_se * lo.distortion_se) +
                     w * w * (hi.rate_se * hi.rate_se + slope * slope * hi.distortion_se * hi.distortion_se);
  return {a * lo.rate + w * hi.rate, std::sqrt(var)};
}

namespace {

// Selftest margins use 4 standard errors so a passing implementation fails a
// suite with probability well under 1e-4 per check.
constexpr double kSelftestSigmas = 4.0;

SelftestResult oracle_suite(std::uint64_t seed) {
  SelftestResult res{"oracle-equivalence", true, ""};
  struct Case {
    LatticeFamily family;
    int n;
  };
  int mismatches = 0;
  double worst = 0.0;
  std::string first;
  for (const Case c : {Case{LatticeFamily::IntegerZ, 8}, Case{LatticeFamily::DnChecker, 8},
                       Case{LatticeFamily::DnDual, 8}, Case{LatticeFamily::E8, 8},
                       Case{LatticeFamily::BarnesWall16, 16}}) {
    const Lattice lattice = build_lattice(c.family, c.n, 1.0);
    Rng rng(derive_seed(seed, "selftest_oracle", static_cast<std::uint64_t>(c.family)));
    std::vector<double> x(c.n);
    for (int t = 0; t < 500; ++t) {
      rng.fill_normal(x);
      const double fast = squared_distance(x, nearest_point(lattice, x).embedding);
      const auto oracle = nearest_point_oracle(lattice, x, std::sqrt(fast) * (1.0 + 1e-9) + 1e-12);
      const double best = squared_distance(x, oracle.embedding);
      if (fast != best) {
        if (mismatches++ == 0) first = lattice.name();
        worst = std::max(worst, fast - best);
      }
    }
  }
  res.passed = mismatches == 0;
  res.detail = res.passed ? "fast decoder distance equals enumeration on 2500 inputs"
                          : fmt::format("closest-point distance mismatch on {} inputs (first on {}); worst excess {:.3g}",
                                        mismatches, first, worst);
  return res;
}

SelftestResult crypto_suite(std::uint64_t seed) {
  SelftestResult res{"crypto-lemma", true, ""};
  const int n = 8;
  const std::size_t N = 20000;
  const Lattice lattice = build_lattice(LatticeFamily::E8, n, 1.0);
  const auto source = GaussianSpec::isotropic(n, 1.0);
  const auto cfg = CodecConfig::with_identity(CodecMode::SD, lattice, source);
  const auto batch = roundtrip_batch(cfg, source, N, derive_seed(seed, "selftest_crypto"));
  Rng ref_rng(derive_seed(seed, "selftest_crypto_ref"));
  std::vector<std::vector<double>> res_coord(n), ref_coord(n);
  RunningStats res_m, ref_m;
  std::vector<double> u(n);
  for (std::size_t i = 0; i < N; ++i) {
    double a = 0.0, b = 0.0;
    lattice.sample_cell_uniform(ref_rng, u);
    for (int j = 0; j < n; ++j) {
      const double r = batch.reconstruction.row(i)[j] - batch.source.row(i)[j];
      res_coord[j].push_back(r);
      ref_coord[j].push_back(u[j]);
      a += r * r;
      b += u[j] * u[j];
    }
    res_m.add(a / n);
    ref_m.add(b / n);
  }
  // Bonferroni over coordinates at 1% overall.
  const double crit = ks_critical_value(N, N, 0.01 / n);
  double worst_ks = 0.0;
  for (int j = 0; j < n; ++j) worst_ks = std::max(worst_ks, ks_statistic(res_coord[j], ref_coord[j]));
  const double gap = std::abs(res_m.mean() - ref_m.mean());
  const double allowed = kSelftestSigmas * std::hypot(res_m.se(), ref_m.se());
  res.passed = worst_ks < crit && gap <= allowed;
  res.detail = fmt::format("max KS {:.4f} (critical {:.4f}); second-moment gap {:.3g} (allowed {:.3g})", worst_ks,
                           crit, gap, allowed);
  return res;
}

SelftestResult identity_suite(std::uint64_t seed) {
  SelftestResult res{"pd-sd-identity", true, ""};
  double worst = 0.0;
  for (double s : {1.0, 2.0}) {
    Rng rng(derive_seed(seed, "selftest_identity", static_cast<std::uint64_t>(s * 10)));
    const auto rep = verify_pd_sd_identity(build_lattice(LatticeFamily::E8, 8, 1.0), s, 20000, rng);
    const double z = std::abs(rep.residual.value) / rep.residual.se;
    worst = std::max(worst, z);
  }
  res.passed = worst <= kSelftestSigmas;
  res.detail = fmt::format("largest |residual| / SE = {:.2f} (allowed {})", worst, kSelftestSigmas);
  return res;
}

SelftestResult rate_suite(std::uint64_t seed) {
  SelftestResult res{"rate-equivalence", true, ""};
  const auto source = GaussianSpec::isotropic(8, 1.0);
  const auto cfg = CodecConfig::with_identity(CodecMode::SD, build_lattice(LatticeFamily::E8, 8, 1.0), source);
  RateOptions opts;
  opts.n_outer = 2000;
  opts.n_inner = 256;
  Rng a(derive_seed(seed, "selftest_rate", 0));
  Rng b(derive_seed(seed, "selftest_rate", 1));
  const auto conditional = rate_conditional_mc(cfg, source, opts, a);
  const auto proxy = rate_noisy_proxy_mc(cfg, source, opts, b);
  const double gap = std::abs(conditional.value - proxy.value);
  const double allowed = kSelftestSigmas * std::hypot(conditional.se, proxy.se);
  res.passed = gap <= allowed;
  res.detail = fmt::format("conditional {:.4f} vs additive-noise {:.4f} bits/dim; gap {:.3g} (allowed {:.3g})",
                           conditional.value, proxy.value, gap, allowed);
  return res;
}

SelftestResult qsd_suite(std::uint64_t seed) {
  SelftestResult res{"qsd-gamma1", true, ""};
  const auto source = GaussianSpec::isotropic(8, 1.0);
  const Lattice lattice = build_lattice(LatticeFamily::E8, 8, 0.8);
  const auto pd = CodecConfig::with_gains(CodecMode::PD, lattice, source, 0.9, 1.1, 1.3, 1);
  const auto qsd = CodecConfig::with_gains(CodecMode::QSD, lattice, source, 0.9, 1.1, 1.3, 1);
  const std::uint64_t s = derive_seed(seed, "selftest_qsd");
  const auto a = roundtrip_batch(pd, source, 5000, s);
  const auto b = roundtrip_batch(qsd, source, 5000, s);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.reconstruction.data.size(); ++i) {
    if (a.reconstruction.data[i] != b.reconstruction.data[i]) ++differing;
  }
  res.passed = differing == 0;
  res.detail = fmt::format("{} of {} reconstruction values differ bitwise", differing, a.reconstruction.data.size());
  return res;
}

}  // namespace

std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
  using Suite = SelftestResult (*)(std::uint64_t);
  const std::pair<const char*, Suite> suites[] = {{"oracle-equivalence", oracle_suite},
                                                  {"crypto-lemma", crypto_suite},
                                                  {"pd-sd-identity", identity_suite},
                                                  {"rate-equivalence", rate_suite},
                                                  {"qsd-gamma1", qsd_suite}};
  std::vector<SelftestResult> out;
  for (const auto& [name, suite] : suites) {
    try {
      out.push_back(suite(seed));
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("raised: ") + e.what()});
    }
  }
  return out;
}

}  // namespace ltc
