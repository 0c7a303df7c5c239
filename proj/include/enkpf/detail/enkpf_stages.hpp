#pragma once

// Shared EnKPF machinery. The global filter calls it with the sample
// covariance of the full state; the local filters call it on a window of
// sites with a tapered covariance and a window-restricted H.

#include <optional>

#include <Eigen/Core>

#include "enkpf/global_filters.hpp"
#include "enkpf/types.hpp"

namespace enkpf::detail {

struct EnkpfStages {
  double gamma = 1.0;
  Eigen::MatrixXd k1;  // stage-one gain, empty when gamma == 0
  Eigen::MatrixXd nu;  // stage-one component centres
  Eigen::MatrixXd q;   // stage-one spread covariance, empty when gamma == 0
  WeightVector alpha;
};

/// Stage one plus the mixture weights. x is n x k, sigma n x n, obs.H d x n.
EnkpfStages enkpf_stages(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                         const LinearGaussianObs& obs, double gamma);

WeightVector enkpf_alpha(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                         const LinearGaussianObs& obs, double gamma);

/// Resampled, perturbed and stage-two-corrected particles. noise1/noise2
/// are N(0, R) draws (d x k) for this observation set.
Eigen::MatrixXd enkpf_finish(const EnkpfStages& st, const LinearGaussianObs& obs,
                             const IndexVector& ancestors,
                             const Eigen::MatrixXd& noise1,
                             const Eigen::MatrixXd& noise2);

double select_gamma(const Eigen::MatrixXd& x, const Eigen::MatrixXd& sigma,
                    const LinearGaussianObs& obs, const GammaPolicy& policy);

}  // namespace enkpf::detail
