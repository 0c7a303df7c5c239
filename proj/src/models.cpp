#include "enkpf/models.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "enkpf/core.hpp"

namespace enkpf {

ObsSpec ObsSpec::strided(Index n_sites, Index stride, double noise_var) {
  if (n_sites < 1 || stride < 1) {
    throw ArgumentError("ObsSpec::strided: need n_sites >= 1 and stride >= 1");
  }
  if (!(noise_var >= 0.0)) {
    throw ArgumentError("ObsSpec::strided: noise variance must be nonnegative");
  }
  const Index d = (n_sites + stride - 1) / stride;
  ObsSpec spec;
  spec.H = Eigen::MatrixXd::Zero(d, n_sites);
  spec.R = noise_var * Eigen::MatrixXd::Identity(d, d);
  spec.obs_sites.resize(static_cast<std::size_t>(d));
  for (Index r = 0; r < d; ++r) {
    spec.H(r, r * stride) = 1.0;
    spec.obs_sites[static_cast<std::size_t>(r)] = r * stride;
  }
  return spec;
}

LinearGaussianObs observe(const Eigen::VectorXd& x, const ObsSpec& spec, Rng& rng) {
  if (spec.H.cols() != x.size() || spec.R.rows() != spec.H.rows()) {
    throw ArgumentError("observe: spec does not match the state");
  }
  LinearGaussianObs obs;
  obs.H = spec.H;
  obs.R = spec.R;
  obs.obs_sites = spec.obs_sites;
  const Eigen::MatrixXd eps =
      CovarianceFactor(spec.R).color(standard_normal(spec.R.rows(), 1, rng));
  obs.y = spec.H * x + eps.col(0);
  return obs;
}

Eigen::MatrixXd build_gc_covariance(Index n, Index support_points) {
  if (n < 1) {
    throw ArgumentError("build_gc_covariance: grid must be nonempty");
  }
  if (support_points < 2 || support_points % 2 != 0 || support_points > n) {
    throw ArgumentError(
        "build_gc_covariance: support must be even, positive and at most n");
  }
  const RingGrid grid(n);
  const double c = 0.5 * static_cast<double>(support_points);
  Eigen::MatrixXd sigma(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      sigma(i, j) = gc_taper(static_cast<double>(grid.distance(i, j)), c);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  const double smallest = eig.eigenvalues().minCoeff();
  if (smallest < -1e-8) {
    throw ArgumentError("build_gc_covariance: taper is not positive semidefinite "
                        "on this grid (smallest eigenvalue " +
                        std::to_string(smallest) + ")");
  }
  if (smallest < 0.0) {
    const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
    sigma = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    sigma = 0.5 * (sigma + sigma.transpose());
  }
  return sigma;
}

ConjugateSetup ConjugateSetup::make(Index n_sites, Index support_points) {
  ConjugateSetup setup;
  setup.n_sites = n_sites;
  setup.support_points = support_points;
  setup.sigma_p = build_gc_covariance(n_sites, support_points);
  return setup;
}

Ensemble GaussianSampler::sample(const Eigen::VectorXd& mean, Index k, Rng& rng) const {
  if (mean.size() != factor_.dim()) {
    throw ArgumentError("GaussianSampler: mean has the wrong length");
  }
  Ensemble e = factor_.color(standard_normal(factor_.dim(), k, rng));
  e.colwise() += mean;
  return e;
}

Ensemble sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         Index k, Rng& rng) {
  return GaussianSampler(cov).sample(mean, k, rng);
}

// ---------------------------------------------------------------------------
// Lorenz96

Index Lorenz96Config::steps_per_cycle() const {
  return static_cast<Index>(std::llround(assim_interval / dt));
}

ObsSpec Lorenz96Config::obs_spec() const {
  return ObsSpec::strided(dim, obs_stride, obs_noise_var);
}

void Lorenz96Config::validate() const {
  if (dim < 4) {
    throw ArgumentError("Lorenz96Config: dimension must be at least 4");
  }
  if (!(dt > 0.0) || !(assim_interval > 0.0)) {
    throw ArgumentError("Lorenz96Config: time steps must be positive");
  }
  const double ratio = assim_interval / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw ArgumentError("Lorenz96Config: assimilation interval must be a multiple of dt");
  }
  if (obs_stride < 1 || !(obs_noise_var > 0.0)) {
    throw ArgumentError("Lorenz96Config: invalid observation settings");
  }
}

Eigen::VectorXd lorenz96_drift(const Eigen::VectorXd& x, double forcing) {
  const Index n = x.size();
  if (n < 4) {
    throw ArgumentError("lorenz96_drift: dimension must be at least 4");
  }
  Eigen::VectorXd dx(n);
  for (Index j = 0; j < n; ++j) {
    const double xp1 = x((j + 1) % n);
    const double xm1 = x((j + n - 1) % n);
    const double xm2 = x((j + n - 2) % n);
    dx(j) = (xp1 - xm2) * xm1 - x(j) + forcing;
  }
  return dx;
}

Eigen::VectorXd rk4_step(const Eigen::VectorXd& x, double dt, double forcing) {
  const Eigen::VectorXd k1 = lorenz96_drift(x, forcing);
  const Eigen::VectorXd k2 = lorenz96_drift(x + 0.5 * dt * k1, forcing);
  const Eigen::VectorXd k3 = lorenz96_drift(x + 0.5 * dt * k2, forcing);
  const Eigen::VectorXd k4 = lorenz96_drift(x + dt * k3, forcing);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Ensemble propagate(const Ensemble& e, double duration, double dt, double forcing) {
  if (!(dt > 0.0) || duration < 0.0) {
    throw ArgumentError("propagate: need dt > 0 and duration >= 0");
  }
  const double ratio = duration / dt;
  const long long steps = std::llround(ratio);
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
    throw ArgumentError("propagate: duration must be a multiple of dt");
  }
  Ensemble out = e;
  for (Index i = 0; i < out.cols(); ++i) {
    Eigen::VectorXd x = out.col(i);
    for (long long step = 0; step < steps; ++step) {
      x = rk4_step(x, dt, forcing);
      if (!x.allFinite()) {
        throw DivergenceError("Lorenz96 state became non-finite",
                              static_cast<std::size_t>(step));
      }
    }
    out.col(i) = x;
  }
  return out;
}

Eigen::VectorXd lorenz96_spinup(const Lorenz96Config& cfg, Rng& rng, double spin_up) {
  cfg.validate();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(cfg.dim, cfg.forcing) +
                      0.01 * standard_normal(cfg.dim, 1, rng).col(0);
  const Index steps = static_cast<Index>(std::llround(spin_up / cfg.dt));
  for (Index s = 0; s < steps; ++s) {
    x = rk4_step(x, cfg.dt, cfg.forcing);
  }
  return x;
}

Eigen::MatrixXd lorenz96_climatology(const Lorenz96Config& cfg, Index n_states,
                                     Rng& rng, double spacing) {
  Eigen::VectorXd x = lorenz96_spinup(cfg, rng);
  const Index steps = static_cast<Index>(std::llround(spacing / cfg.dt));
  Eigen::MatrixXd pool(cfg.dim, n_states);
  for (Index j = 0; j < n_states; ++j) {
    for (Index s = 0; s < steps; ++s) {
      x = rk4_step(x, cfg.dt, cfg.forcing);
    }
    pool.col(j) = x;
  }
  return pool;
}

Ensemble draw_from_pool(const Eigen::MatrixXd& pool, Index k, Rng& rng) {
  if (pool.cols() < 1) {
    throw ArgumentError("draw_from_pool: empty pool");
  }
  std::uniform_int_distribution<Index> pick(0, pool.cols() - 1);
  Ensemble e(pool.rows(), k);
  for (Index i = 0; i < k; ++i) {
    e.col(i) = pool.col(pick(rng));
  }
  return e;
}

}  // namespace enkpf
