#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ltc {

/// A Monte-Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// sqrt(a.se^2 + b.se^2), the usual yardstick for "within k combined SEs".
inline double combined_se(const Estimate& a, const Estimate& b) {
  return std::hypot(a.se, b.se);
}

// Sum/sum-of-squares accumulator. Merging partial accumulators in a fixed
// order gives bit-reproducible totals regardless of how work was scheduled.
// Values are shifted by a reference to keep the variance numerically sane.
class RunningStats {
 public:
  RunningStats() = default;
  explicit RunningStats(double shift) : shift_(shift) {}

  void add(double x) {
    const double d = x - shift_;
    ++count_;
    sum_ += d;
    sum_sq_ += d * d;
  }

  void merge(const RunningStats& other);

  std::size_t count() const { return count_; }
  double mean() const { return count_ ? shift_ + sum_ / static_cast<double>(count_) : 0.0; }
  /// Unbiased sample variance.
  double variance() const;
  double se() const {
    return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }
  Estimate estimate() const { return {mean(), se()}; }

 private:
  double shift_ = 0.0;
  std::size_t count_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

Estimate mean_and_se(std::span<const double> values);

double normal_cdf(double x);

/// Two-sample Kolmogorov-Smirnov statistic sup|F_a - F_b|. Inputs are copied and sorted.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// One-sample KS statistic against a continuous CDF.
template <class Cdf>
double ks_statistic_one_sample(std::span<const double> sample, Cdf&& cdf);

/// Asymptotic two-sample KS critical value c(alpha) * sqrt((n + m) / (n m)).
double ks_critical_value(std::size_t n, std::size_t m, double alpha);

/// Upper-tail chi-square quantile via the Wilson-Hilferty approximation.
double chi_square_quantile_upper(double dof, double alpha);

/// Quantile of the standard normal (Acklam's rational approximation, |err| < 1.2e-9).
double normal_quantile(double p);

/// Delete-one-block jackknife: `stat(excluded_block)` evaluates the statistic with
/// block `excluded_block` left out, and `stat(-1)` with everything included.
template <class Stat>
Estimate jackknife(int blocks, Stat&& stat) {
  const double full = stat(-1);
  std::vector<double> partial(static_cast<std::size_t>(blocks));
  double mean = 0.0;
  for (int b = 0; b < blocks; ++b) {
    partial[static_cast<std::size_t>(b)] = stat(b);
    mean += partial[static_cast<std::size_t>(b)];
  }
  mean /= blocks;
  double ss = 0.0;
  for (double p : partial) ss += (p - mean) * (p - mean);
  return {full, std::sqrt(ss * (blocks - 1) / blocks)};
}

// --- template definitions ---

template <class Cdf>
double ks_statistic_one_sample(std::span<const double> sample, Cdf&& cdf) {
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace ltc
