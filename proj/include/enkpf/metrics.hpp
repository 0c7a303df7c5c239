#pragma once

#include <Eigen/Core>

#include "enkpf/core.hpp"
#include "enkpf/types.hpp"

namespace enkpf {

namespace detail {

template <typename Derived>
VectorX<typename Derived::Scalar> cyclic_increments(const Eigen::MatrixBase<Derived>& v) {
  const Index n = v.size();
  VectorX<typename Derived::Scalar> d(n);
  for (Index s = 0; s < n; ++s) {
    d(s) = v((s + 1) % n) - v(s);
  }
  return d;
}

template <typename A, typename B>
void check_shapes(const Eigen::MatrixBase<A>& e, const Eigen::MatrixBase<B>& truth) {
  if (e.rows() != truth.size() || e.cols() < 1) {
    throw ArgumentError("ensemble and truth have mismatched shapes");
  }
}

}  // namespace detail

/// (1/N) sum_s (mean_s - truth_s)^2 for the ensemble mean.
template <typename A, typename B>
typename A::Scalar mse_x(const Eigen::MatrixBase<A>& e, const Eigen::MatrixBase<B>& truth) {
  detail::check_shapes(e, truth);
  return (ensemble_mean(e) - truth).squaredNorm() / typename A::Scalar(truth.size());
}

/// Per-particle squared error of cyclic increments x_{s+1} - x_s, averaged
/// over sites and particles.
template <typename A, typename B>
typename A::Scalar mse_dx(const Eigen::MatrixBase<A>& e, const Eigen::MatrixBase<B>& truth) {
  using Scalar = typename A::Scalar;
  detail::check_shapes(e, truth);
  const VectorX<Scalar> dt = detail::cyclic_increments(truth);
  Scalar total(0);
  for (Index i = 0; i < e.cols(); ++i) {
    total += (detail::cyclic_increments(e.col(i)) - dt).squaredNorm();
  }
  return total / Scalar(truth.size()) / Scalar(e.cols());
}

template <typename Scalar>
Scalar relative_mse(Scalar value, Scalar reference) {
  if (!(reference > Scalar(0))) {
    throw ArgumentError("relative_mse: reference must be positive");
  }
  return value / reference;
}

}  // namespace enkpf
