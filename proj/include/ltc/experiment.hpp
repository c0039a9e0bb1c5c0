#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ltc/codec.hpp"
#include "ltc/lattice.hpp"
#include "ltc/metrics.hpp"

namespace ltc {

// Theory-driven descriptor: gains, dither multiplier and lattice scale come
// from sd_params / pd_params at the target (D, P) instead of the config.
struct ConstructionTarget {
  double D = 0.0;
  double P = 0.0;
};

struct CodecDescriptor {
  LatticeFamily family = LatticeFamily::IntegerZ;
  CodecMode mode = CodecMode::SD;
  std::vector<double> scales{1.0};
  double s = 1.0;
  int gamma = 1;
  double analysis_gain = 1.0;
  double synthesis_gain = 1.0;
  std::optional<ConstructionTarget> construction;
};

struct RunConfig {
  GaussianSpec source;
  std::vector<CodecDescriptor> codecs;
  EvalBudget budget;
  PerceptionMetric perception_metric = PerceptionMetric::SlicedW2Sq;
  std::uint64_t seed = 0;
  std::string csv_path;      // empty: stdout
  std::string sidecar_path;  // empty: csv_path + ".json", or none when writing to stdout
  std::string text;          // the raw configuration, hashed into every row
};

/// Parses the YAML schema documented in README.md. Errors are ConfigError
/// with "<origin>:<line>:" prefixes. Validates everything before returning.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);

/// 16 hex digits of FNV-1a over the raw configuration text.
std::string config_hash(const RunConfig& config);

struct ResultRow {
  std::size_t run_id = 0;
  CodecMode mode = CodecMode::SD;
  LatticeFamily family = LatticeFamily::IntegerZ;
  double lattice_scale = 0.0;
  int gamma = 1;
  double s = 1.0;
  RDPoint point;
};

/// Builds the codec for one (descriptor, scale) pair. Construction-driven
/// descriptors calibrate their lattice with `calibration`.
CodecConfig build_codec(const CodecDescriptor& descriptor, double scale, const GaussianSpec& source,
                        Rng& calibration);

/// One row per descriptor and scale, in config order. Row i uses the seed
/// derive_seed(config.seed, "row", i), so any row can be reproduced alone.
std::vector<ResultRow> run_eval(const RunConfig& config);

extern const char* const kCsvHeader;
void write_csv(std::ostream& out, const RunConfig& config, const std::vector<ResultRow>& rows);
/// Config echo and environment stamp; no timestamps, so reruns are byte-identical.
void write_sidecar(std::ostream& out, const RunConfig& config, const std::vector<ResultRow>& rows);

struct BoundsRow {
  double D = 0.0;
  double P = 0.0;
  double rdp = 0.0;             // R(D, P)
  double no_shared_bound = 0.0; // R(D/2, inf)
  std::string error;            // non-empty when the cell is outside the domain
};

std::vector<BoundsRow> bounds_table(double sigma2, const std::vector<double>& D_grid,
                                    const std::vector<double>& P_list);

/// Rate of an operational curve at distortion D by piecewise-linear
/// interpolation in (distortion, rate). The SE combines both endpoint rate SEs
/// and their distortion SEs through the local slope. D must lie inside the
/// measured distortion range (ContractError otherwise).
Estimate rate_at_distortion(std::vector<RDPoint> curve, double D);

struct SelftestResult {
  std::string suite;
  bool passed = false;
  std::string detail;  // violated invariant and measured margin
};

/// Oracle equivalence, crypto lemma, PD/SD identity, rate-estimator
/// equivalence and QSD(gamma=1) == PD at reduced budgets.
std::vector<SelftestResult> run_selftest(std::uint64_t seed);

}  // namespace ltc
