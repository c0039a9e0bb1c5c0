#include "ltc/dither.hpp"

#include <cmath>
#include <string>

#include "ltc/errors.hpp"

namespace ltc {

void sample_cell_uniform(const Lattice& lattice, Rng& rng, std::span<double> out) {
  lattice.sample_cell_uniform(rng, out);
}

std::vector<double> sample_cell_uniform(const Lattice& lattice, Rng& rng) {
  std::vector<double> u(static_cast<std::size_t>(lattice.dim()));
  lattice.sample_cell_uniform(rng, u);
  return u;
}

void mod_lattice(const Lattice& lattice, std::span<const double> x, std::span<double> out) {
  lattice.quantize(x, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - out[i];
}

std::vector<double> mod_lattice(const Lattice& lattice, std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("mod_lattice: non-finite input");
  }
  std::vector<double> out(x.size());
  mod_lattice(lattice, x, out);
  return out;
}

NestedPair::NestedPair(const Lattice& coarse, int gamma, std::uint64_t cap)
    : coarse_(coarse),
      fine_(coarse.scaled(1.0 / (gamma >= 1 ? gamma : 1))),
      gamma_(gamma),
      count_(1) {
  if (gamma < 1) throw ConfigError("nesting ratio gamma must be >= 1");
  for (int i = 0; i < coarse.dim(); ++i) {
    count_ *= static_cast<std::uint64_t>(gamma);
    if (count_ > cap) {
      throw ConfigError("gamma^n = " + std::to_string(gamma) + "^" + std::to_string(coarse.dim()) +
                        " exceeds the coset enumeration cap of " + std::to_string(cap));
    }
  }
}

double NestedPair::shared_randomness_rate() const { return std::log2(static_cast<double>(gamma_)); }

void NestedPair::representative(std::uint64_t index, std::span<double> out) const {
  const int n = coarse_.dim();
  const Eigen::MatrixXd& g = coarse_.generator();
  std::vector<double> z(static_cast<std::size_t>(n), 0.0);
  std::uint64_t rest = index;
  for (int j = 0; j < n; ++j) {
    const double digit = static_cast<double>(rest % static_cast<std::uint64_t>(gamma_));
    rest /= static_cast<std::uint64_t>(gamma_);
    if (digit == 0.0) continue;
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] += digit * g(j, i);
  }
  for (double& v : z) v /= gamma_;
  mod_lattice(coarse_, z, out);
}

std::vector<std::vector<double>> coset_representatives(const NestedPair& nested) {
  std::vector<std::vector<double>> reps(nested.coset_count(),
                                        std::vector<double>(static_cast<std::size_t>(nested.coarse().dim())));
  for (std::uint64_t i = 0; i < nested.coset_count(); ++i) nested.representative(i, reps[i]);
  return reps;
}

CosetDraw sample_coset_uniform(const NestedPair& nested, Rng& rng) {
  CosetDraw draw;
  draw.index = rng.uniform_index(nested.coset_count());
  draw.vector.resize(static_cast<std::size_t>(nested.coarse().dim()));
  nested.representative(draw.index, draw.vector);
  return draw;
}

}  // namespace ltc
