#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/lattice.hpp"
#include "ltc/rng.hpp"

namespace ltc {

/// u uniform on the Voronoi cell of `lattice` (mod-lattice reduction of a
/// uniform point in the fundamental parallelepiped).
void sample_cell_uniform(const Lattice& lattice, Rng& rng, std::span<double> out);
std::vector<double> sample_cell_uniform(const Lattice& lattice, Rng& rng);

/// x - Q(x): the representative of x in the Voronoi cell.
void mod_lattice(const Lattice& lattice, std::span<const double> x, std::span<double> out);
std::vector<double> mod_lattice(const Lattice& lattice, std::span<const double> x);

inline constexpr std::uint64_t kDefaultCosetCap = 10'000'000;

// Self-similar nested pair coarse = gamma * fine. Coset representatives are
// the fine points inside the coarse Voronoi cell; representative i is
// G_c^T k / gamma reduced mod the coarse lattice, where k holds the base-gamma
// digits of i (least significant first). They are computed on demand, so
// large coset counts cost no memory unless materialised.
class NestedPair {
 public:
  NestedPair(const Lattice& coarse, int gamma, std::uint64_t cap = kDefaultCosetCap);

  const Lattice& coarse() const { return coarse_; }
  const Lattice& fine() const { return fine_; }
  int gamma() const { return gamma_; }
  std::uint64_t coset_count() const { return count_; }
  /// R_c = log2(gamma) bits per dimension.
  double shared_randomness_rate() const;

  void representative(std::uint64_t index, std::span<double> out) const;

 private:
  Lattice coarse_;
  Lattice fine_;
  int gamma_;
  std::uint64_t count_;
};

/// All gamma^n representatives in index order.
std::vector<std::vector<double>> coset_representatives(const NestedPair& nested);

struct CosetDraw {
  std::uint64_t index = 0;
  std::vector<double> vector;
};

CosetDraw sample_coset_uniform(const NestedPair& nested, Rng& rng);

}  // namespace ltc
