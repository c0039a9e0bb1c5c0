#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ltc {

// Fincke-Pohst enumeration of all lattice points inside a ball. The basis is
// LLL-reduced once at construction; visited points are reported in the
// coordinates of the basis that was passed in.
class BallEnumerator {
 public:
  /// Rows of `basis` are the lattice basis vectors.
  explicit BallEnumerator(const Eigen::MatrixXd& basis);

  using Visitor = std::function<void(std::span<const std::int64_t> coords, double squared_distance)>;

  /// Calls visit(k, ||center - B^T k||^2) for every point with squared distance
  /// <= radius^2. Returns the number of points visited; throws ConfigError if
  /// more than `cap` points fall inside the ball.
  std::size_t for_each_point(std::span<const double> center, double radius, const Visitor& visit,
                             std::size_t cap = SIZE_MAX) const;

  int dim() const { return static_cast<int>(reduced_.rows()); }
  const Eigen::MatrixXd& reduced_basis() const { return reduced_; }

 private:
  Eigen::MatrixXd reduced_;     // rows: reduced basis
  Eigen::MatrixXd unimodular_;  // reduced = unimodular * original
  Eigen::MatrixXd q_;           // reduced^T = q_ * r_
  Eigen::MatrixXd r_;
};

/// LLL reduction (delta = 0.99) of the rows of `basis`; returns the reduced
/// basis and writes the integer transform into `transform` (reduced = transform * basis).
Eigen::MatrixXd lll_reduce(const Eigen::MatrixXd& basis, Eigen::MatrixXd& transform);

}  // namespace ltc
