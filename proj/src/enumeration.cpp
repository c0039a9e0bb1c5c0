#include "ltc/enumeration.hpp"

#include <cmath>
#include <string>

#include "ltc/errors.hpp"

namespace ltc {
namespace {

void gram_schmidt(const Eigen::MatrixXd& b, Eigen::MatrixXd& mu, Eigen::VectorXd& norms) {
  const Eigen::Index n = b.rows();
  Eigen::MatrixXd star = b;
  mu.setZero(n, n);
  norms.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      mu(i, j) = b.row(i).dot(star.row(j)) / norms(j);
      star.row(i) -= mu(i, j) * star.row(j);
    }
    norms(i) = star.row(i).squaredNorm();
  }
}

}  // namespace

Eigen::MatrixXd lll_reduce(const Eigen::MatrixXd& basis, Eigen::MatrixXd& transform) {
  constexpr double delta = 0.99;
  const Eigen::Index n = basis.rows();
  Eigen::MatrixXd b = basis;
  transform = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd mu;
  Eigen::VectorXd norms;
  gram_schmidt(b, mu, norms);
  Eigen::Index k = 1;
  while (k < n) {
    for (Eigen::Index j = k - 1; j >= 0; --j) {
      const double q = std::round(mu(k, j));
      if (q != 0.0) {
        b.row(k) -= q * b.row(j);
        transform.row(k) -= q * transform.row(j);
        gram_schmidt(b, mu, norms);
      }
    }
    if (norms(k) >= (delta - mu(k, k - 1) * mu(k, k - 1)) * norms(k - 1)) {
      ++k;
    } else {
      b.row(k).swap(b.row(k - 1));
      transform.row(k).swap(transform.row(k - 1));
      gram_schmidt(b, mu, norms);
      k = std::max<Eigen::Index>(k - 1, 1);
    }
  }
  return b;
}

BallEnumerator::BallEnumerator(const Eigen::MatrixXd& basis) {
  reduced_ = lll_reduce(basis, unimodular_);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(reduced_.transpose());
  q_ = qr.householderQ();
  r_ = qr.matrixQR().triangularView<Eigen::Upper>();
}

std::size_t BallEnumerator::for_each_point(std::span<const double> center, double radius,
                                           const Visitor& visit, std::size_t cap) const {
  const int n = dim();
  if (static_cast<int>(center.size()) != n) throw InputError("enumeration: center has wrong length");
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = center[static_cast<std::size_t>(i)];
  const Eigen::VectorXd y = q_.transpose() * x;
  // Small relative slack so points exactly on the sphere are not lost to rounding.
  const double r2 = radius * radius * (1.0 + 1e-9) + 1e-12;

  std::vector<double> k(static_cast<std::size_t>(n), 0.0);
  std::vector<std::int64_t> original(static_cast<std::size_t>(n));
  std::size_t count = 0;

  auto emit = [&](double dist2) {
    if (++count > cap) {
      throw ConfigError("enumeration cap of " + std::to_string(cap) + " points exceeded");
    }
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += unimodular_(j, i) * k[static_cast<std::size_t>(j)];
      original[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::llround(acc));
    }
    visit(original, dist2);
  };

  auto recurse = [&](auto&& self, int level, double used) -> void {
    double partial = y(level);
    for (int j = level + 1; j < n; ++j) partial -= r_(level, j) * k[static_cast<std::size_t>(j)];
    const double diag = r_(level, level);
    const double c = partial / diag;
    const double half_width = std::sqrt(std::max(r2 - used, 0.0)) / std::abs(diag);
    const double lo = std::ceil(c - half_width);
    const double hi = std::floor(c + half_width);
    for (double v = lo; v <= hi; v += 1.0) {
      const double d = diag * (c - v);
      const double next = used + d * d;
      if (next > r2) continue;
      k[static_cast<std::size_t>(level)] = v;
      if (level == 0) {
        emit(next);
      } else {
        self(self, level - 1, next);
      }
    }
  };
  if (n > 0) recurse(recurse, n - 1, 0.0);
  return count;
}

}  // namespace ltc
