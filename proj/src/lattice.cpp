#include "ltc/lattice.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>

#include "ltc/enumeration.hpp"
#include "ltc/errors.hpp"
#include "ltc/parallel.hpp"

namespace ltc {

namespace {
constexpr int kMaxDim = 64;
std::atomic<bool> g_e8_fault{false};
}  // namespace

namespace testing {
void set_e8_decoder_fault(bool enabled) { g_e8_fault = enabled; }
bool e8_decoder_fault() { return g_e8_fault; }
}  // namespace testing

struct CanonicalLattice {
  LatticeFamily family;
  int n;
  Eigen::MatrixXd generator;    // rows are basis vectors, unscaled
  Eigen::MatrixXd inverse_gt;   // (generator^T)^{-1}
  double volume;
  std::vector<std::array<double, 16>> codewords;  // Barnes-Wall coset leaders
  std::unique_ptr<BallEnumerator> enumerator;
};

std::string_view to_string(LatticeFamily family) {
  switch (family) {
    case LatticeFamily::IntegerZ: return "Z";
    case LatticeFamily::DnChecker: return "Dn";
    case LatticeFamily::DnDual: return "DnDual";
    case LatticeFamily::E8: return "E8";
    case LatticeFamily::BarnesWall16: return "BW16";
  }
  return "?";
}

LatticeFamily parse_lattice_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "z" || s == "integerz" || s == "zn") return LatticeFamily::IntegerZ;
  if (s == "dn" || s == "dnchecker" || s == "d") return LatticeFamily::DnChecker;
  if (s == "dndual" || s == "dn*" || s == "dnstar" || s == "dn_dual") return LatticeFamily::DnDual;
  if (s == "e8") return LatticeFamily::E8;
  if (s == "bw16" || s == "barneswall16" || s == "lambda16") return LatticeFamily::BarnesWall16;
  throw ConfigError("unknown lattice family '" + std::string(name) + "'");
}

namespace {

// ---- canonical generators ----

Eigen::MatrixXd dn_generator(int n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  g(0, 0) = -1;
  g(0, 1) = -1;
  for (int i = 1; i < n; ++i) {
    g(i, i - 1) = 1;
    g(i, i) = -1;
  }
  return g;
}

Eigen::MatrixXd dn_dual_generator(int n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  g.row(n - 1).setConstant(0.5);
  return g;
}

Eigen::MatrixXd e8_generator() {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(8, 8);
  g(0, 0) = 2;
  for (int i = 1; i < 7; ++i) {
    g(i, i - 1) = -1;
    g(i, i) = 1;
  }
  g.row(7).setConstant(0.5);
  return g;
}

std::vector<std::array<double, 16>> reed_muller_1_4() {
  std::vector<std::array<double, 16>> words;
  for (int m = 0; m < 32; ++m) {
    std::array<double, 16> w{};
    for (int j = 0; j < 16; ++j) {
      int bit = m & 1;
      for (int i = 0; i < 4; ++i) bit ^= ((m >> (i + 1)) & 1) & ((j >> i) & 1);
      w[static_cast<std::size_t>(j)] = bit;
    }
    words.push_back(w);
  }
  return words;
}

// Integer row echelon form of a generating set; the nonzero rows are a basis.
Eigen::MatrixXd integer_basis(std::vector<std::vector<std::int64_t>> rows, int n) {
  std::size_t r = 0;
  for (int c = 0; c < n && r < rows.size(); ++c) {
    for (;;) {
      std::size_t pivot = rows.size();
      for (std::size_t i = r; i < rows.size(); ++i) {
        if (rows[i][c] != 0 && (pivot == rows.size() || std::abs(rows[i][c]) < std::abs(rows[pivot][c]))) {
          pivot = i;
        }
      }
      if (pivot == rows.size()) break;
      std::swap(rows[r], rows[pivot]);
      bool cleared = true;
      for (std::size_t i = r + 1; i < rows.size(); ++i) {
        const std::int64_t q = rows[i][c] / rows[r][c];
        for (int j = 0; j < n; ++j) rows[i][j] -= q * rows[r][j];
        if (rows[i][c] != 0) cleared = false;
      }
      if (cleared) {
        ++r;
        break;
      }
    }
  }
  if (r != static_cast<std::size_t>(n)) throw NumericError("generating set is not full rank");
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = static_cast<double>(rows[static_cast<std::size_t>(i)][j]);
  return g;
}

Eigen::MatrixXd barnes_wall_generator(const std::vector<std::array<double, 16>>& words) {
  std::vector<std::vector<std::int64_t>> rows;
  const Eigen::MatrixXd d16 = dn_generator(16);
  for (int i = 0; i < 16; ++i) {
    std::vector<std::int64_t> row(16);
    for (int j = 0; j < 16; ++j) row[j] = static_cast<std::int64_t>(2 * d16(i, j));
    rows.push_back(row);
  }
  // Codeword m = 1 and m = 2, 4, 8, 16 generate RM(1,4).
  for (int m : {1, 2, 4, 8, 16}) {
    std::vector<std::int64_t> row(16);
    for (int j = 0; j < 16; ++j) row[j] = static_cast<std::int64_t>(words[static_cast<std::size_t>(m)][j]);
    rows.push_back(row);
  }
  return integer_basis(std::move(rows), 16);
}

std::shared_ptr<const CanonicalLattice> make_canonical(LatticeFamily family, int n) {
  auto c = std::make_shared<CanonicalLattice>();
  c->family = family;
  c->n = n;
  switch (family) {
    case LatticeFamily::IntegerZ: c->generator = Eigen::MatrixXd::Identity(n, n); break;
    case LatticeFamily::DnChecker: c->generator = dn_generator(n); break;
    case LatticeFamily::DnDual: c->generator = dn_dual_generator(n); break;
    case LatticeFamily::E8: c->generator = e8_generator(); break;
    case LatticeFamily::BarnesWall16:
      c->codewords = reed_muller_1_4();
      c->generator = barnes_wall_generator(c->codewords);
      break;
  }
  c->volume = std::abs(c->generator.determinant());
  c->inverse_gt = c->generator.transpose().inverse();
  c->enumerator = std::make_unique<BallEnumerator>(c->generator);
  return c;
}

std::shared_ptr<const CanonicalLattice> canonical(LatticeFamily family, int n) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const CanonicalLattice>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{static_cast<int>(family), n}];
  if (!slot) slot = make_canonical(family, n);
  return slot;
}

// ---- decoders (canonical scale) ----
// Each writes the closest point to x into out. Among equidistant points the
// one with lexicographically smallest residual x - out wins; for two candidates
// a != b this is the one that is larger at the first differing coordinate.

double dist2(const double* x, const double* p, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = x[i] - p[i];
    s += d * d;
  }
  return s;
}

// Points within kTieTol of a Voronoi boundary (canonical units) are treated as
// lying on it. Representatives such as k/3 of a fine lattice are not exactly
// representable, and without the slack rounding would push them to either
// side of the boundary at random.
constexpr double kTieTol = 1e-11;

// True if candidate a beats candidate b (da, db are their squared distances).
bool better(const double* a, double da, const double* b, double db, int n) {
  if (std::abs(da - db) > 1e-10 * (1.0 + std::max(da, db))) return da < db;
  for (int i = 0; i < n; ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return false;
}

inline double round_half_up(double v) {
  double f = std::floor(v);
  if (v - f >= 0.5 - kTieTol) f += 1.0;
  return f;
}

void decode_z(const double* x, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = round_half_up(x[i]);
}

void decode_dn(const double* x, double* out, int n) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = round_half_up(x[i]);
    sum += out[i];
  }
  if (std::fmod(std::abs(sum), 2.0) == 0.0) return;
  // Parity fix: move the coordinate whose residual is largest in magnitude one
  // step towards x. Among ties, a step down (residual >= 0) at the first such
  // index gives the smallest residual; otherwise step up at the last index.
  double worst = -1.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(x[i] - out[i]));
  for (int i = 0; i < n; ++i) {
    const double r = x[i] - out[i];
    if (std::abs(r) >= worst - kTieTol && r >= -kTieTol) {
      out[i] += 1.0;
      return;
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    if (std::abs(x[i] - out[i]) >= worst - kTieTol) {
      out[i] -= 1.0;
      return;
    }
  }
}

void decode_dn_dual(const double* x, double* out, int n) {
  std::array<double, kMaxDim> shifted{};
  std::array<double, kMaxDim> alt{};
  decode_z(x, out, n);
  for (int i = 0; i < n; ++i) shifted[i] = x[i] - 0.5;
  decode_z(shifted.data(), alt.data(), n);
  for (int i = 0; i < n; ++i) alt[i] += 0.5;
  if (better(alt.data(), dist2(x, alt.data(), n), out, dist2(x, out, n), n)) {
    std::copy_n(alt.data(), n, out);
  }
}

void decode_e8(const double* x, double* out) {
  std::array<double, 8> shifted{};
  std::array<double, 8> alt{};
  decode_dn(x, out, 8);
  if (g_e8_fault.load(std::memory_order_relaxed)) return;
  for (int i = 0; i < 8; ++i) shifted[i] = x[i] - 0.5;
  decode_dn(shifted.data(), alt.data(), 8);
  for (int i = 0; i < 8; ++i) alt[i] += 0.5;
  if (better(alt.data(), dist2(x, alt.data(), 8), out, dist2(x, out, 8), 8)) {
    std::copy_n(alt.data(), 8, out);
  }
}

// Lambda16 = union over RM(1,4) codewords c of c + 2 D16: decode each coset
// as c + 2 Q_D16((x - c) / 2) and keep the best.
void decode_bw16(const CanonicalLattice& canon, const double* x, double* out) {
  std::array<double, 16> half{};
  std::array<double, 16> cand{};
  double best = INFINITY;
  for (const auto& c : canon.codewords) {
    for (int i = 0; i < 16; ++i) half[i] = 0.5 * (x[i] - c[i]);
    decode_dn(half.data(), cand.data(), 16);
    for (int i = 0; i < 16; ++i) cand[i] = c[i] + 2.0 * cand[i];
    const double d = dist2(x, cand.data(), 16);
    if (best == INFINITY || better(cand.data(), d, out, best, 16)) {
      std::copy_n(cand.data(), 16, out);
      best = d;
    }
  }
}

void decode_canonical(const CanonicalLattice& canon, const double* x, double* out) {
  switch (canon.family) {
    case LatticeFamily::IntegerZ: decode_z(x, out, canon.n); return;
    case LatticeFamily::DnChecker: decode_dn(x, out, canon.n); return;
    case LatticeFamily::DnDual: decode_dn_dual(x, out, canon.n); return;
    case LatticeFamily::E8: decode_e8(x, out); return;
    case LatticeFamily::BarnesWall16: decode_bw16(canon, x, out); return;
  }
}

void check_finite(std::span<const double> x, int n) {
  if (static_cast<int>(x.size()) != n) {
    throw InputError("expected a vector of length " + std::to_string(n) + ", got " +
                     std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("non-finite coordinate in lattice input");
  }
}

}  // namespace

Lattice::Lattice(LatticeFamily family, int dim, double scale) : dim_(dim), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("lattice scale must be positive and finite");
  switch (family) {
    case LatticeFamily::IntegerZ:
      if (dim < 1) throw ConfigError("Z^n requires n >= 1");
      break;
    case LatticeFamily::DnChecker:
    case LatticeFamily::DnDual:
      if (dim < 2) throw ConfigError(std::string(to_string(family)) + " requires n >= 2");
      break;
    case LatticeFamily::E8:
      if (dim != 8) throw ConfigError("E8 requires n = 8, got " + std::to_string(dim));
      break;
    case LatticeFamily::BarnesWall16:
      if (dim != 16) throw ConfigError("BW16 requires n = 16, got " + std::to_string(dim));
      break;
  }
  if (dim > kMaxDim) throw ConfigError("dimension above " + std::to_string(kMaxDim) + " is not supported");
  canon_ = canonical(family, dim);
  generator_ = canon_->generator * scale;
  volume_ = canon_->volume * std::pow(scale, dim);
}

LatticeFamily Lattice::family() const { return canon_->family; }

std::string Lattice::name() const {
  std::string s(to_string(family()));
  if (family() != LatticeFamily::E8 && family() != LatticeFamily::BarnesWall16) s += std::to_string(dim_);
  return s;
}

void Lattice::quantize(std::span<const double> x, std::span<double> out) const {
  std::array<double, kMaxDim> canon_x{};
  for (int i = 0; i < dim_; ++i) canon_x[i] = x[static_cast<std::size_t>(i)] / scale_;
  decode_canonical(*canon_, canon_x.data(), out.data());
  for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] *= scale_;
}

std::vector<double> Lattice::quantize(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(dim_));
  quantize(x, out);
  return out;
}

std::vector<std::int64_t> Lattice::coordinates_of(std::span<const double> point) const {
  check_finite(point, dim_);
  Eigen::VectorXd p(dim_);
  for (int i = 0; i < dim_; ++i) p(i) = point[static_cast<std::size_t>(i)] / scale_;
  const Eigen::VectorXd k = canon_->inverse_gt * p;
  std::vector<std::int64_t> coords(static_cast<std::size_t>(dim_));
  for (int i = 0; i < dim_; ++i) {
    const double r = std::round(k(i));
    if (std::abs(k(i) - r) > 1e-9) throw NumericError("vector is not a lattice point");
    coords[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(r);
  }
  return coords;
}

std::vector<double> Lattice::embed(std::span<const std::int64_t> coords) const {
  std::vector<double> out(static_cast<std::size_t>(dim_), 0.0);
  for (int j = 0; j < dim_; ++j) {
    const double kj = static_cast<double>(coords[static_cast<std::size_t>(j)]);
    if (kj == 0.0) continue;
    for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] += kj * canon_->generator(j, i);
  }
  for (double& v : out) v *= scale_;
  return out;
}

void Lattice::sample_cell_uniform(Rng& rng, std::span<double> out) const {
  std::array<double, kMaxDim> w{};
  std::array<double, kMaxDim> z{};
  std::array<double, kMaxDim> q{};
  for (int i = 0; i < dim_; ++i) w[i] = rng.uniform();
  for (int i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < dim_; ++j) acc += generator_(j, i) * w[j];
    z[i] = acc;
  }
  quantize(std::span<const double>(z.data(), static_cast<std::size_t>(dim_)),
           std::span<double>(q.data(), static_cast<std::size_t>(dim_)));
  for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] = z[i] - q[i];
}

Lattice build_lattice(LatticeFamily family, int n, double scale) { return Lattice(family, n, scale); }

LatticePoint nearest_point(const Lattice& lattice, std::span<const double> x) {
  check_finite(x, lattice.dim());
  LatticePoint p;
  p.embedding = lattice.quantize(x);
  p.coords = lattice.coordinates_of(p.embedding);
  return p;
}

LatticePoint nearest_point_oracle(const Lattice& lattice, std::span<const double> x, double radius) {
  check_finite(x, lattice.dim());
  if (!(radius >= 0.0)) throw OracleError("oracle radius must be non-negative");
  const int n = lattice.dim();
  std::vector<double> canon_x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) canon_x[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] / lattice.scale();

  const auto canon = canonical(lattice.family(), n);
  LatticePoint best;
  std::vector<double> best_canon;
  double best_d = INFINITY;
  std::vector<double> p(static_cast<std::size_t>(n));
  canon->enumerator->for_each_point(
      canon_x, radius / lattice.scale(), [&](std::span<const std::int64_t> k, double) {
        std::fill(p.begin(), p.end(), 0.0);
        for (int j = 0; j < n; ++j) {
          for (int i = 0; i < n; ++i) p[i] += static_cast<double>(k[j]) * canon->generator(j, i);
        }
        const double d = dist2(canon_x.data(), p.data(), n);
        if (best_canon.empty() || better(p.data(), d, best_canon.data(), best_d, n)) {
          best.coords.assign(k.begin(), k.end());
          best_canon = p;
          best_d = d;
        }
      });
  if (!best_canon.empty()) best.embedding = lattice.embed(best.coords);
  if (best.embedding.empty()) throw OracleError("no lattice point within the oracle radius");
  return best;
}

double volume(const Lattice& lattice) { return lattice.volume(); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Estimate second_moment_mc(const Lattice& lattice, std::size_t num_samples, Rng& rng) {
  if (num_samples < 1000) throw ContractError("second_moment_mc needs at least 1000 samples");
  constexpr std::size_t chunk = 1 << 15;
  const std::uint64_t base = rng.next_u64();
  const std::size_t chunks = chunk_count(num_samples, chunk);
  const int n = lattice.dim();
  std::vector<RunningStats> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Rng local(derive_seed(base, "second_moment", c));
    std::vector<double> u(static_cast<std::size_t>(n));
    RunningStats stats;
    const std::size_t end = std::min(num_samples, (c + 1) * chunk);
    for (std::size_t s = c * chunk; s < end; ++s) {
      lattice.sample_cell_uniform(local, u);
      double norm2 = 0.0;
      for (double v : u) norm2 += v * v;
      stats.add(norm2 / n);
    }
    partial[c] = stats;
  });
  RunningStats total;
  for (const auto& p : partial) total.merge(p);
  return total.estimate();
}

Estimate nsm_mc(const Lattice& lattice, std::size_t num_samples, Rng& rng) {
  const Estimate m = second_moment_mc(lattice, num_samples, rng);
  const double norm = std::pow(lattice.volume(), 2.0 / lattice.dim());
  return {m.value / norm, m.se / norm};
}

}  // namespace ltc
