#pragma once

#include <Eigen/Core>

#include "enkpf/rng.hpp"
#include "enkpf/types.hpp"

namespace enkpf {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct EnkpfDiagnostics {
  double gamma = 1.0;
  WeightVector weights;  // mixture weights alpha
  double ess_fraction = 1.0;
};

/// How the EnKPF interpolation parameter gamma is chosen.
///
/// Adaptive mode picks the smallest gamma (the most particle-filter-like
/// value) whose mixture weights have ESS/k inside [ess_lo, ess_hi].
struct GammaPolicy {
  enum class Mode { fixed, adaptive };

  Mode mode = Mode::fixed;
  double fixed_value = 1.0;
  double ess_lo = 0.25;
  double ess_hi = 0.5;

  static GammaPolicy fixed(double gamma);
  static GammaPolicy adaptive(double ess_lo = 0.25, double ess_hi = 0.5);

  void validate() const;
};

struct PfResult {
  Ensemble ensemble;
  WeightVector weights;
  IndexVector ancestors;
};

struct EnkpfResult {
  Ensemble ensemble;
  EnkpfDiagnostics diagnostics;
  IndexVector ancestors;
};

/// Independent N(0, R) draws used by the two EnKPF stages. Stage noise is
/// rescaled to R/gamma and R/(1-gamma) at use, so one draw serves every
/// gamma.
struct EnkpfNoise {
  Eigen::MatrixXd stage1;  // d x k
  Eigen::MatrixXd stage2;  // d x k
};

/// Parameters of the EnKPF filtering mixture sum_i alpha_i N(means_i, cov).
struct EnkpfMixture {
  WeightVector alpha;
  Eigen::MatrixXd means;
  Eigen::MatrixXd covariance;
};

// ---------------------------------------------------------------------------
// Particle filter
// ---------------------------------------------------------------------------

/// log phi(y; H x_i, R) up to a constant shared by all particles.
Eigen::VectorXd log_likelihoods(const Ensemble& e, const LinearGaussianObs& obs);

/// Normalized likelihood weights of every particle.
WeightVector pf_weights(const Ensemble& e, const LinearGaussianObs& obs);

/// Importance weighting followed by systematic resampling with offset u.
PfResult pf_update(const Ensemble& e, const LinearGaussianObs& obs, double u);

// ---------------------------------------------------------------------------
// Ensemble Kalman filter
// ---------------------------------------------------------------------------

/// K = sigma_p H' (H sigma_p H' + R)^{-1}, via an SPD solve.
Eigen::MatrixXd enkf_gain(const Eigen::MatrixXd& sigma_p, const Eigen::MatrixXd& H,
                          const Eigen::MatrixXd& R);

/// d x k matrix of N(0, R) columns.
Eigen::MatrixXd draw_obs_perturbations(const Eigen::MatrixXd& R, Index k, Rng& rng);

EnkpfNoise draw_enkpf_noise(const Eigen::MatrixXd& R, Index k, Rng& rng);

/// Stochastic EnKF: x_i + K (y + eps_i - H x_i) with K from the sample
/// covariance. The Rng overload draws eps with draw_obs_perturbations.
Ensemble enkf_update(const Ensemble& e, const LinearGaussianObs& obs, Rng& rng);
Ensemble enkf_update(const Ensemble& e, const LinearGaussianObs& obs,
                     const Eigen::MatrixXd& perturbations);

// ---------------------------------------------------------------------------
// Ensemble Kalman particle filter
// ---------------------------------------------------------------------------

/// Two-stage EnKPF update: an EnKF stage with covariance R/gamma, then a
/// particle-filter stage with covariance R/(1-gamma) that reweights and
/// resamples the stage-one components before a second Kalman correction.
/// gamma = 0 reduces to pf_update and gamma = 1 to enkf_update.
EnkpfResult enkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                         double gamma, double u, Rng& rng);
EnkpfResult enkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                         double gamma, double u, const EnkpfNoise& noise);

/// Weights alone, without running the update.
WeightVector enkpf_weights(const Ensemble& e, const LinearGaussianObs& obs,
                           double gamma);

EnkpfMixture enkpf_mixture(const Ensemble& e, const LinearGaussianObs& obs,
                           double gamma);

double select_gamma(const Ensemble& e, const LinearGaussianObs& obs,
                    const GammaPolicy& policy);

}  // namespace enkpf
