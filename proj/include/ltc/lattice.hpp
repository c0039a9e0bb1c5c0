#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ltc/rng.hpp"
#include "ltc/stats.hpp"

namespace ltc {

enum class LatticeFamily {
  IntegerZ,      // Z^n
  DnChecker,     // D_n: integer vectors with even coordinate sum
  DnDual,        // D_n^*: Z^n union (Z^n + 1/2)
  E8,            // D_8 union (D_8 + 1/2), unit volume
  BarnesWall16,  // union over RM(1,4) codewords c of c + 2 D_16 (integer form, volume 2^12)
};

std::string_view to_string(LatticeFamily family);
LatticeFamily parse_lattice_family(std::string_view name);

/// A lattice point: integer basis coordinates k and the embedding G^T k.
struct LatticePoint {
  std::vector<std::int64_t> coords;
  std::vector<double> embedding;
};

struct CanonicalLattice;

// Immutable lattice value: a named family, dimension, and positive scale.
// Copies share the canonical data, so passing by value is cheap and safe
// across threads.
//
// Closest-point tie rule: among equidistant lattice points the decoder returns
// the one whose residual x - lambda is lexicographically smallest. On Z this
// is round-half-up, so the Voronoi cell is the half-open box [-1/2, 1/2)^n.
class Lattice {
 public:
  Lattice(LatticeFamily family, int dim, double scale);

  LatticeFamily family() const;
  int dim() const { return dim_; }
  double scale() const { return scale_; }
  std::string name() const;

  /// Generator matrix G (rows are basis vectors), scale included.
  const Eigen::MatrixXd& generator() const { return generator_; }

  double volume() const { return volume_; }

  /// Closest lattice point written into `out`. No validation; hot path.
  void quantize(std::span<const double> x, std::span<double> out) const;
  std::vector<double> quantize(std::span<const double> x) const;

  /// Integer coordinates k with G^T k == point; throws NumericError if the
  /// point is not a lattice point to within 1e-9.
  std::vector<std::int64_t> coordinates_of(std::span<const double> point) const;
  std::vector<double> embed(std::span<const std::int64_t> coords) const;

  /// u uniform on the Voronoi cell: reduce G^T w (w uniform on [0,1)^n) mod the lattice.
  void sample_cell_uniform(Rng& rng, std::span<double> out) const;

  /// The same family at scale * factor.
  Lattice scaled(double factor) const { return Lattice(family(), dim_, scale_ * factor); }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.family() == b.family() && a.dim_ == b.dim_ && a.scale_ == b.scale_;
  }

 private:
  std::shared_ptr<const CanonicalLattice> canon_;
  int dim_;
  double scale_;
  Eigen::MatrixXd generator_;
  double volume_;
};

Lattice build_lattice(LatticeFamily family, int n, double scale);

/// Closest lattice point with validation (finite input of the right length).
LatticePoint nearest_point(const Lattice& lattice, std::span<const double> x);

/// Exhaustive enumeration of every lattice point within `radius` of x; returns
/// the minimiser under the same tie rule as nearest_point. Throws OracleError
/// when the ball contains no lattice point.
LatticePoint nearest_point_oracle(const Lattice& lattice, std::span<const double> x, double radius);

double volume(const Lattice& lattice);

/// (1/n) E||u||^2 for u uniform on the Voronoi cell; num_samples >= 1000.
Estimate second_moment_mc(const Lattice& lattice, std::size_t num_samples, Rng& rng);

/// Normalized second moment sigma^2 / V^(2/n); standard error propagated from the second moment.
Estimate nsm_mc(const Lattice& lattice, std::size_t num_samples, Rng& rng);

double squared_distance(std::span<const double> a, std::span<const double> b);

namespace testing {
// Fault injection for the self-test: while enabled the E8 decoder ignores the
// D8 + 1/2 coset.
void set_e8_decoder_fault(bool enabled);
bool e8_decoder_fault();
}  // namespace testing

}  // namespace ltc
