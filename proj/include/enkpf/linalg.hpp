#pragma once

#include <Eigen/Core>

#include "enkpf/types.hpp"

namespace enkpf {

/// Lower factor L of a covariance C = L L', with a diagonal fast path.
///
/// Dense matrices go through Cholesky; on failure a jitter of
/// 1e-10 * mean(diag) is added once before giving up. Semidefinite diagonal
/// matrices (zeros allowed) can color noise but cannot whiten residuals.
class CovarianceFactor {
 public:
  explicit CovarianceFactor(const Eigen::MatrixXd& cov);

  Index dim() const { return dim_; }
  bool is_diagonal() const { return diagonal_; }

  /// L z, column by column.
  Eigen::MatrixXd color(const Eigen::MatrixXd& z) const;
  /// L^{-1} r, column by column.
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& r) const;
  /// Squared Mahalanobis norm of every column of r.
  Eigen::VectorXd mahalanobis_sq(const Eigen::MatrixXd& r) const;

  const Eigen::MatrixXd& lower() const { return lower_; }
  const Eigen::VectorXd& sqrt_diagonal() const { return sqrt_diag_; }

 private:
  Index dim_ = 0;
  bool diagonal_ = false;
  Eigen::VectorXd sqrt_diag_;
  Eigen::MatrixXd lower_;
};

/// Solves S X = B for symmetric positive-definite S without forming S^{-1}.
/// A failed factorization is retried once after symmetrizing and adding
/// 1e-10 * trace(S)/d to the diagonal; a second failure throws
/// SingularityError.
Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& b);

bool is_diagonal(const Eigen::MatrixXd& m);

}  // namespace enkpf
