#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <Eigen/Core>

#include "enkpf/types.hpp"

namespace enkpf {

/// min(|i-j|, n-|i-j|) on a ring of n sites.
inline Index periodic_distance(Index i, Index j, Index n) {
  if (n < 1 || i < 0 || j < 0 || i >= n || j >= n) {
    throw ArgumentError("periodic_distance: site index out of range");
  }
  const Index diff = i > j ? i - j : j - i;
  return std::min(diff, n - diff);
}

/// Gaspari-Cohn fifth-order compactly supported correlation function with
/// half-support c: equals 1 at d = 0 and vanishes for d >= 2c. An infinite
/// c gives the constant 1 (no tapering).
template <typename Scalar>
Scalar gc_taper(Scalar d, Scalar c) {
  if (!(c > Scalar(0))) {
    throw ArgumentError("gc_taper: half-support must be positive");
  }
  if (d < Scalar(0)) {
    throw ArgumentError("gc_taper: distance must be nonnegative");
  }
  const Scalar z = d / c;
  if (z >= Scalar(2)) {
    return Scalar(0);
  }
  const Scalar z2 = z * z;
  const Scalar z3 = z2 * z;
  const Scalar z4 = z3 * z;
  const Scalar z5 = z4 * z;
  if (z <= Scalar(1)) {
    return Scalar(1) - Scalar(5) / Scalar(3) * z2 + Scalar(5) / Scalar(8) * z3 +
           Scalar(1) / Scalar(2) * z4 - Scalar(1) / Scalar(4) * z5;
  }
  const Scalar value = Scalar(4) - Scalar(5) * z + Scalar(5) / Scalar(3) * z2 +
                       Scalar(5) / Scalar(8) * z3 - Scalar(1) / Scalar(2) * z4 +
                       Scalar(1) / Scalar(12) * z5 - Scalar(2) / (Scalar(3) * z);
  // The outer branch touches zero at z = 2; keep round-off out of [0, 1].
  return std::clamp(value, Scalar(0), Scalar(1));
}

/// Equivalent sample size 1 / sum(w_i^2) of normalized weights.
template <typename Derived>
typename Derived::Scalar ess(const Eigen::MatrixBase<Derived>& w) {
  return typename Derived::Scalar(1) / w.squaredNorm();
}

/// Scale nonnegative weights to sum to one. Throws DegenerateWeightsError
/// when the total mass is zero or not finite.
Eigen::VectorXd normalize_weights(const Eigen::VectorXd& w);

/// Weights proportional to exp(log_w), computed with max-log subtraction.
Eigen::VectorXd weights_from_log(const Eigen::VectorXd& log_w);

template <typename Derived>
VectorX<typename Derived::Scalar> ensemble_mean(
    const Eigen::MatrixBase<Derived>& e) {
  if (e.cols() < 1) {
    throw ArgumentError("ensemble_mean: ensemble has no particles");
  }
  return e.rowwise().mean();
}

/// Deviations of each particle from the ensemble mean.
template <typename Derived>
MatrixX<typename Derived::Scalar> ensemble_anomalies(
    const Eigen::MatrixBase<Derived>& e) {
  return e.colwise() - ensemble_mean(e);
}

/// Unbiased sample covariance (divisor k - 1).
template <typename Derived>
MatrixX<typename Derived::Scalar> ensemble_covariance(
    const Eigen::MatrixBase<Derived>& e) {
  using Scalar = typename Derived::Scalar;
  if (e.cols() < 2) {
    throw ArgumentError("ensemble_covariance: need at least two particles");
  }
  const MatrixX<Scalar> a = ensemble_anomalies(e);
  MatrixX<Scalar> cov = (a * a.transpose()) / Scalar(e.cols() - 1);
  return Scalar(0.5) * (cov + cov.transpose());
}

/// Matrix of gc_taper(d(sites[a], sites[b]), c) over a list of grid sites.
Eigen::MatrixXd taper_matrix(const IndexVector& sites, const RingGrid& grid,
                             double halfwidth);

}  // namespace enkpf
