#include "enkpf/global_filters.hpp"

#include <cmath>

#include "enkpf/core.hpp"
#include "enkpf/detail/enkpf_stages.hpp"
#include "enkpf/linalg.hpp"
#include "enkpf/resampling.hpp"

namespace enkpf {

GammaPolicy GammaPolicy::fixed(double gamma) {
  GammaPolicy p;
  p.mode = Mode::fixed;
  p.fixed_value = gamma;
  p.validate();
  return p;
}

GammaPolicy GammaPolicy::adaptive(double ess_lo, double ess_hi) {
  GammaPolicy p;
  p.mode = Mode::adaptive;
  p.ess_lo = ess_lo;
  p.ess_hi = ess_hi;
  p.validate();
  return p;
}

void GammaPolicy::validate() const {
  if (mode == Mode::fixed) {
    if (!(fixed_value >= 0.0 && fixed_value <= 1.0)) {
      throw ArgumentError("GammaPolicy: fixed gamma must lie in [0, 1]");
    }
  } else if (!(ess_lo > 0.0 && ess_lo < ess_hi && ess_hi <= 1.0)) {
    throw ArgumentError("GammaPolicy: need 0 < ess_lo < ess_hi <= 1");
  }
}

namespace {

void check_shapes(const Ensemble& e, const LinearGaussianObs& obs) {
  if (!e.allFinite()) {
    throw ArgumentError("ensemble contains non-finite values");
  }
  validate(obs, e.rows());
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ArgumentError("gamma must lie in [0, 1]");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// PF

Eigen::VectorXd log_likelihoods(const Ensemble& e, const LinearGaussianObs& obs) {
  check_shapes(e, obs);
  if (obs.dim() == 0) {
    return Eigen::VectorXd::Zero(e.cols());
  }
  const Eigen::MatrixXd residual = (-(obs.H * e)).colwise() + obs.y;
  return -0.5 * CovarianceFactor(obs.R).mahalanobis_sq(residual);
}

WeightVector pf_weights(const Ensemble& e, const LinearGaussianObs& obs) {
  return weights_from_log(log_likelihoods(e, obs));
}

PfResult pf_update(const Ensemble& e, const LinearGaussianObs& obs, double u) {
  PfResult out;
  out.weights = pf_weights(e, obs);
  out.ancestors = systematic_resample(out.weights, e.cols(), u);
  out.ensemble = select_columns(e, out.ancestors);
  return out;
}

// ---------------------------------------------------------------------------
// EnKF

Eigen::MatrixXd enkf_gain(const Eigen::MatrixXd& sigma_p, const Eigen::MatrixXd& H,
                          const Eigen::MatrixXd& R) {
  if (sigma_p.rows() != sigma_p.cols() || H.cols() != sigma_p.rows() ||
      R.rows() != H.rows() || R.cols() != H.rows()) {
    throw ArgumentError("enkf_gain: inconsistent dimensions");
  }
  const Eigen::MatrixXd hs = H * sigma_p;                   // d x n
  const Eigen::MatrixXd s = hs * H.transpose() + R;         // d x d
  return spd_solve(s, hs).transpose();                      // n x d
}

Eigen::MatrixXd draw_obs_perturbations(const Eigen::MatrixXd& R, Index k, Rng& rng) {
  const Eigen::MatrixXd z = standard_normal(R.rows(), k, rng);
  return CovarianceFactor(R).color(z);
}

EnkpfNoise draw_enkpf_noise(const Eigen::MatrixXd& R, Index k, Rng& rng) {
  const CovarianceFactor factor(R);
  EnkpfNoise noise;
  noise.stage1 = factor.color(standard_normal(R.rows(), k, rng));
  noise.stage2 = factor.color(standard_normal(R.rows(), k, rng));
  return noise;
}

Ensemble enkf_update(const Ensemble& e, const LinearGaussianObs& obs, Rng& rng) {
  check_shapes(e, obs);
  return enkf_update(e, obs, draw_obs_perturbations(obs.R, e.cols(), rng));
}

Ensemble enkf_update(const Ensemble& e, const LinearGaussianObs& obs,
                     const Eigen::MatrixXd& perturbations) {
  check_shapes(e, obs);
  if (e.cols() < 2) {
    throw ArgumentError("enkf_update: need at least two particles");
  }
  if (perturbations.rows() != obs.dim() || perturbations.cols() != e.cols()) {
    throw ArgumentError("enkf_update: perturbations must be d x k");
  }
  if (obs.dim() == 0) {
    return e;
  }
  const Eigen::MatrixXd gain = enkf_gain(ensemble_covariance(e), obs.H, obs.R);
  const Eigen::MatrixXd innovation =
      (perturbations - obs.H * e).colwise() + obs.y;
  return e + gain * innovation;
}

// ---------------------------------------------------------------------------
// EnKPF

namespace detail {

EnkpfStages enkpf_stages(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                         const LinearGaussianObs& obs, double gamma) {
  check_gamma(gamma);
  EnkpfStages st;
  st.gamma = gamma;
  const Index k = x.cols();
  if (obs.dim() == 0) {
    st.nu = x;
    st.alpha = WeightVector::Constant(k, 1.0 / static_cast<double>(k));
    return st;
  }

  const Eigen::MatrixXd hx = obs.H * x;
  if (gamma > 0.0) {
    const Eigen::MatrixXd hs = obs.H * sigma;
    const Eigen::MatrixXd s1 = hs * obs.H.transpose() + obs.R / gamma;
    st.k1 = spd_solve(s1, hs).transpose();
    st.nu = x + st.k1 * ((-hx).colwise() + obs.y);
    st.q = (st.k1 * obs.R * st.k1.transpose()) / gamma;
    st.q = 0.5 * (st.q + st.q.transpose());
  } else {
    st.nu = x;
  }

  if (gamma >= 1.0) {
    st.alpha = WeightVector::Constant(k, 1.0 / static_cast<double>(k));
    return st;
  }

  Eigen::MatrixXd s2 = obs.R / (1.0 - gamma);
  Eigen::MatrixXd residual;
  if (gamma > 0.0) {
    const Eigen::MatrixXd hq = obs.H * st.q;
    s2 += hq * obs.H.transpose();
    s2 = 0.5 * (s2 + s2.transpose());
    residual = (-(obs.H * st.nu)).colwise() + obs.y;
  } else {
    residual = (-hx).colwise() + obs.y;
  }
  st.alpha = weights_from_log(-0.5 * CovarianceFactor(s2).mahalanobis_sq(residual));
  return st;
}

WeightVector enkpf_alpha(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                         const LinearGaussianObs& obs, double gamma) {
  return enkpf_stages(x, sigma, obs, gamma).alpha;
}

Eigen::MatrixXd enkpf_finish(const EnkpfStages& st, const LinearGaussianObs& obs,
                             const IndexVector& ancestors,
                             const Eigen::MatrixXd& noise1,
                             const Eigen::MatrixXd& noise2) {
  const Index k = st.nu.cols();
  Eigen::MatrixXd xu(st.nu.rows(), k);
  for (Index i = 0; i < k; ++i) {
    xu.col(i) = st.nu.col(ancestors[static_cast<std::size_t>(i)]);
  }
  if (obs.dim() == 0) {
    return xu;
  }
  const double gamma = st.gamma;
  if (gamma > 0.0) {
    xu += st.k1 * (noise1 / std::sqrt(gamma));
  }
  if (gamma > 0.0 && gamma < 1.0) {
    const Eigen::MatrixXd hq = obs.H * st.q;
    Eigen::MatrixXd s2 = hq * obs.H.transpose() + obs.R / (1.0 - gamma);
    s2 = 0.5 * (s2 + s2.transpose());
    const Eigen::MatrixXd k2 = spd_solve(s2, hq).transpose();
    const Eigen::MatrixXd innovation =
        ((noise2 / std::sqrt(1.0 - gamma)) - obs.H * xu).colwise() + obs.y;
    xu += k2 * innovation;
  }
  return xu;
}

double select_gamma(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                    const LinearGaussianObs& obs, const GammaPolicy& policy) {
  policy.validate();
  if (policy.mode == GammaPolicy::Mode::fixed) {
    return policy.fixed_value;
  }
  const double k = static_cast<double>(x.cols());
  auto ess_fraction = [&](double gamma) {
    return ess(enkpf_alpha(x, sigma, obs, gamma)) / k;
  };
  // Everything admissible from gamma = 0 upwards, or already too diverse:
  // the most particle-filter-like choice wins either way.
  if (ess_fraction(0.0) >= policy.ess_lo) {
    return 0.0;
  }
  if (ess_fraction(1.0) < policy.ess_lo) {
    return 1.0;
  }
  // Invariant: fraction(lo) < ess_lo <= fraction(hi).
  double lo = 0.0;
  double hi = 1.0;
  constexpr int kBisectionSteps = 8;
  for (int step = 0; step < kBisectionSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (ess_fraction(mid) >= policy.ess_lo) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace detail

EnkpfResult enkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                         double gamma, double u, Rng& rng) {
  check_shapes(e, obs);
  return enkpf_update(e, obs, gamma, u, draw_enkpf_noise(obs.R, e.cols(), rng));
}

EnkpfResult enkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                         double gamma, double u, const EnkpfNoise& noise) {
  check_shapes(e, obs);
  check_gamma(gamma);
  if (e.cols() < 2) {
    throw ArgumentError("enkpf_update: need at least two particles");
  }
  if (noise.stage1.rows() != obs.dim() || noise.stage1.cols() != e.cols() ||
      noise.stage2.rows() != obs.dim() || noise.stage2.cols() != e.cols()) {
    throw ArgumentError("enkpf_update: noise must be d x k");
  }
  const detail::EnkpfStages st =
      detail::enkpf_stages(e, ensemble_covariance(e), obs, gamma);
  EnkpfResult out;
  out.ancestors = systematic_resample(st.alpha, e.cols(), u);
  out.ensemble = detail::enkpf_finish(st, obs, out.ancestors, noise.stage1, noise.stage2);
  out.diagnostics.gamma = gamma;
  out.diagnostics.weights = st.alpha;
  out.diagnostics.ess_fraction = ess(st.alpha) / static_cast<double>(e.cols());
  return out;
}

WeightVector enkpf_weights(const Ensemble& e, const LinearGaussianObs& obs,
                           double gamma) {
  check_shapes(e, obs);
  return detail::enkpf_alpha(e, ensemble_covariance(e), obs, gamma);
}

EnkpfMixture enkpf_mixture(const Ensemble& e, const LinearGaussianObs& obs,
                           double gamma) {
  check_shapes(e, obs);
  const detail::EnkpfStages st =
      detail::enkpf_stages(e, ensemble_covariance(e), obs, gamma);
  EnkpfMixture mix;
  mix.alpha = st.alpha;
  const Index n = e.rows();
  if (gamma <= 0.0 || gamma >= 1.0 || obs.dim() == 0) {
    mix.means = st.nu;
    mix.covariance = st.q.size() > 0 ? st.q : Eigen::MatrixXd::Zero(n, n);
    return mix;
  }
  const Eigen::MatrixXd hq = obs.H * st.q;
  const Eigen::MatrixXd s2 = hq * obs.H.transpose() + obs.R / (1.0 - gamma);
  const Eigen::MatrixXd k2 = spd_solve(s2, hq).transpose();
  mix.means = st.nu + k2 * ((-(obs.H * st.nu)).colwise() + obs.y);
  mix.covariance = (Eigen::MatrixXd::Identity(n, n) - k2 * obs.H) * st.q;
  mix.covariance = 0.5 * (mix.covariance + mix.covariance.transpose());
  return mix;
}

double select_gamma(const Ensemble& e, const LinearGaussianObs& obs,
                    const GammaPolicy& policy) {
  check_shapes(e, obs);
  if (policy.mode == GammaPolicy::Mode::fixed) {
    policy.validate();
    return policy.fixed_value;
  }
  return detail::select_gamma(e, ensemble_covariance(e), obs, policy);
}

}  // namespace enkpf
