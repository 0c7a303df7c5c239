#include "enkpf/oracle.hpp"

#include <cmath>

#include "enkpf/core.hpp"
#include "enkpf/linalg.hpp"

namespace enkpf {

GaussianPosterior conjugate_posterior(const Eigen::MatrixXd& sigma_p,
                                      const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                                      const Eigen::VectorXd& y) {
  if (sigma_p.rows() != sigma_p.cols() || H.cols() != sigma_p.rows() ||
      R.rows() != H.rows() || R.cols() != H.rows() || y.size() != H.rows()) {
    throw ArgumentError("conjugate_posterior: inconsistent dimensions");
  }
  const Eigen::MatrixXd hs = H * sigma_p;
  const Eigen::MatrixXd s = hs * H.transpose() + R;
  // G' = S^{-1} H Sigma, so the gain is G = Sigma H' S^{-1}.
  const Eigen::MatrixXd gain_t = spd_solve(s, hs);
  GaussianPosterior post;
  post.mean = gain_t.transpose() * y;
  post.covariance = sigma_p - hs.transpose() * gain_t;
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
  return post;
}

double optimal_mse_x(const Eigen::MatrixXd& sigma_f) {
  return sigma_f.trace() / static_cast<double>(sigma_f.rows());
}

double optimal_mse_dx(const Eigen::MatrixXd& sigma_f) {
  const Index n = sigma_f.rows();
  double total = 0.0;
  for (Index j = 0; j < n; ++j) {
    const Index next = (j + 1) % n;
    total += 2.0 * (sigma_f(next, next) + sigma_f(j, j) - 2.0 * sigma_f(next, j));
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

double GridPosterior::integral() const {
  if (density.size() < 2) return 0.0;
  return spacing * (density.sum() - 0.5 * (density(0) + density(density.size() - 1)));
}

double GridPosterior::mean() const {
  const Eigen::VectorXd f = points.cwiseProduct(density);
  return spacing * (f.sum() - 0.5 * (f(0) + f(f.size() - 1)));
}

Eigen::VectorXd GridPosterior::cdf() const {
  Eigen::VectorXd c(density.size());
  c(0) = 0.0;
  for (Index i = 1; i < density.size(); ++i) {
    c(i) = c(i - 1) + 0.5 * spacing * (density(i - 1) + density(i));
  }
  return c;
}

GridPosterior grid_posterior_1d(const std::function<double(double)>& prior_density,
                                double y, double h, double r, double lo, double hi,
                                Index n_points) {
  if (!(hi > lo) || n_points < 3 || !(r > 0.0)) {
    throw ArgumentError("grid_posterior_1d: need lo < hi, n_points >= 3, r > 0");
  }
  GridPosterior post;
  post.points = Eigen::VectorXd::LinSpaced(n_points, lo, hi);
  post.spacing = (hi - lo) / static_cast<double>(n_points - 1);
  post.density.resize(n_points);
  for (Index i = 0; i < n_points; ++i) {
    const double x = post.points(i);
    const double resid = y - h * x;
    post.density(i) = prior_density(x) * std::exp(-0.5 * resid * resid / r);
  }
  const double mass = post.integral();
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw ResolutionError("grid_posterior_1d: posterior has no mass on the grid");
  }
  post.density /= mass;

  const Index edge = std::max<Index>(1, n_points / 100);
  const double left = post.spacing * post.density.head(edge).sum();
  const double right = post.spacing * post.density.tail(edge).sum();
  if (left > 1e-6 || right > 1e-6) {
    throw ResolutionError("grid_posterior_1d: grid truncates the posterior");
  }
  return post;
}

Eigen::VectorXd grid_posterior_1d(const Eigen::VectorXd& prior_particles, double y,
                                  double h, double r) {
  if (!(r > 0.0)) {
    throw ArgumentError("grid_posterior_1d: r must be positive");
  }
  Eigen::VectorXd log_w(prior_particles.size());
  for (Index i = 0; i < prior_particles.size(); ++i) {
    const double resid = y - h * prior_particles(i);
    log_w(i) = -0.5 * resid * resid / r;
  }
  return weights_from_log(log_w);
}

}  // namespace enkpf
