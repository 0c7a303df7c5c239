#pragma once

#include <functional>

#include <Eigen/Core>

#include "enkpf/types.hpp"

namespace enkpf {

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Exact posterior of a zero-mean Gaussian prior N(0, sigma_p) under
/// y ~ N(Hx, R).
GaussianPosterior conjugate_posterior(const Eigen::MatrixXd& sigma_p,
                                      const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                                      const Eigen::VectorXd& y);

/// Expected per-site squared error of the posterior mean: trace / N.
double optimal_mse_x(const Eigen::MatrixXd& sigma_f);

/// Expected per-site squared error of the cyclic lag-one increments of a
/// single posterior draw against the truth. Truth and draw are independent
/// given y, hence twice the posterior increment variance.
double optimal_mse_dx(const Eigen::MatrixXd& sigma_f);

/// Posterior of a scalar state on a uniform grid.
struct GridPosterior {
  Eigen::VectorXd points;
  Eigen::VectorXd density;  // integrates to one under the trapezoid rule
  double spacing = 0.0;

  double mean() const;
  double integral() const;
  /// Trapezoid-rule CDF at the grid points.
  Eigen::VectorXd cdf() const;
};

/// prior_density * phi(y; h x, r) renormalized on [lo, hi] with n_points.
/// Throws ResolutionError when more than 1e-6 of the posterior mass sits in
/// the outer 1% of the grid on either side, i.e. the grid is too narrow.
GridPosterior grid_posterior_1d(const std::function<double(double)>& prior_density,
                                double y, double h, double r, double lo, double hi,
                                Index n_points);

/// Discrete posterior over prior particles: weights proportional to
/// phi(y; h x_i, r).
Eigen::VectorXd grid_posterior_1d(const Eigen::VectorXd& prior_particles, double y,
                                  double h, double r);

}  // namespace enkpf
