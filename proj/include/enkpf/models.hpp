#pragma once

#include <Eigen/Core>

#include "enkpf/linalg.hpp"
#include "enkpf/rng.hpp"
#include "enkpf/types.hpp"

namespace enkpf {

// ---------------------------------------------------------------------------
// Observation specification
// ---------------------------------------------------------------------------

/// Linear Gaussian observation model without the data.
struct ObsSpec {
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;
  IndexVector obs_sites;

  /// Every stride-th site observed with noise variance noise_var.
  static ObsSpec strided(Index n_sites, Index stride = 1, double noise_var = 1.0);
};

/// y = H x + eps with eps ~ N(0, R).
LinearGaussianObs observe(const Eigen::VectorXd& x, const ObsSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Conjugate Gaussian prior
// ---------------------------------------------------------------------------

/// Sigma_ij = gc_taper(d(i, j), support_points / 2) on a ring of n sites, so
/// correlations vanish from distance support_points on.
Eigen::MatrixXd build_gc_covariance(Index n, Index support_points);

struct ConjugateSetup {
  Index n_sites = 0;
  Index support_points = 20;
  Eigen::MatrixXd sigma_p;

  static ConjugateSetup make(Index n_sites, Index support_points = 20);
};

/// Draws from N(mean, cov) with a cached covariance factor.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Eigen::MatrixXd& cov) : factor_(cov) {}

  Index dim() const { return factor_.dim(); }
  Ensemble sample(const Eigen::VectorXd& mean, Index k, Rng& rng) const;

 private:
  CovarianceFactor factor_;
};

/// k i.i.d. columns from N(mean, cov).
Ensemble sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         Index k, Rng& rng);

// ---------------------------------------------------------------------------
// Lorenz96
// ---------------------------------------------------------------------------

struct Lorenz96Config {
  Index dim = 40;
  double forcing = 8.0;
  double dt = 0.05;
  double assim_interval = 0.4;
  Index obs_stride = 1;
  double obs_noise_var = 1.0;

  Index steps_per_cycle() const;
  ObsSpec obs_spec() const;
  void validate() const;
};

/// dx_j/dt = (x_{j+1} - x_{j-2}) x_{j-1} - x_j + F, cyclic indices.
Eigen::VectorXd lorenz96_drift(const Eigen::VectorXd& x, double forcing);

/// One classical fourth-order Runge-Kutta step.
Eigen::VectorXd rk4_step(const Eigen::VectorXd& x, double dt, double forcing);

/// Integrates every particle for `duration` in steps of dt. A non-finite
/// state throws DivergenceError carrying the failing step index.
Ensemble propagate(const Ensemble& e, double duration, double dt, double forcing);

/// State after spinning up from F + small perturbation for spin_up time units.
Eigen::VectorXd lorenz96_spinup(const Lorenz96Config& cfg, Rng& rng,
                                double spin_up = 100.0);

/// n_states snapshots of a long free run, spaced `spacing` time units apart.
Eigen::MatrixXd lorenz96_climatology(const Lorenz96Config& cfg, Index n_states,
                                     Rng& rng, double spacing = 2.0);

/// k columns drawn at random from a climatology pool.
Ensemble draw_from_pool(const Eigen::MatrixXd& pool, Index k, Rng& rng);

}  // namespace enkpf
