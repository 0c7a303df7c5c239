#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "enkpf/global_filters.hpp"
#include "enkpf/rng.hpp"
#include "enkpf/types.hpp"

namespace enkpf {

/// How the block scheme treats sites just outside an assimilation window.
enum class TransitionMode {
  conditional,  // regression on the window's change, anchored outside
  blend,        // taper-weighted copy of the nearest window site's change
  hard,         // sites outside the window are left alone
};

struct LocalizationConfig {
  Index radius_l = 5;
  // Half-support c of the covariance taper; infinity disables tapering.
  double taper_halfwidth = 5.0;
  Index transition_width = 10;
  TransitionMode transition = TransitionMode::conditional;

  /// Defaults tied to the radius: c = taper_factor * l and transition
  /// width 2l (l taken as at least one site). An infinite factor disables
  /// tapering.
  static LocalizationConfig with_radius(Index l, double taper_factor = 1.0);
  /// Radius covering the whole ring, no tapering.
  static LocalizationConfig global(const RingGrid& grid);

  void validate(const RingGrid& grid) const;
};

/// Rows whose observation site is within distance l of site, in row order.
IndexVector local_obs_rows(Index site, const LinearGaussianObs& obs,
                           const RingGrid& grid, Index l);

LinearGaussianObs local_obs_selection(Index site, const LinearGaussianObs& obs,
                                      const RingGrid& grid, Index l);

// ---------------------------------------------------------------------------

/// Localized EnKF. Each site is updated with the gain row computed from the
/// observations within radius l and the tapered sample covariance; the
/// observation perturbations are drawn once and shared by all sites.
Ensemble lenkf_update(const Ensemble& e, const LinearGaussianObs& obs,
                      const RingGrid& grid, const LocalizationConfig& cfg, Rng& rng);
Ensemble lenkf_update(const Ensemble& e, const LinearGaussianObs& obs,
                      const RingGrid& grid, const LocalizationConfig& cfg,
                      const Eigen::MatrixXd& perturbations);

struct LpfResult {
  Ensemble ensemble;
  std::vector<IndexVector> ancestors;  // per site
  Index degenerate_sites = 0;          // sites that fell back to uniform weights
};

/// Localized particle filter: per-site weights from the local observations
/// and systematic resampling with the same offset u at every site.
LpfResult lpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                     const RingGrid& grid, const LocalizationConfig& cfg, double u);

struct LocalEnkpfResult {
  Ensemble ensemble;
  Eigen::VectorXd gamma;               // per site (naive) or per block
  std::vector<IndexVector> ancestors;  // per site (naive) or per block
};

/// EnKPF localized like the LEnKF: an independent EnKPF on each site's
/// local problem, keeping only that site's component.
LocalEnkpfResult naive_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u, Rng& rng);
LocalEnkpfResult naive_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u,
                                     const EnkpfNoise& noise);

/// One block of observations and the sites its update touches.
struct ObservationBlock {
  IndexVector rows;        // observation rows, ordered by site
  IndexVector window;      // sites within l of the block's observations
  IndexVector transition;  // sites 1..transition_width outside the window
  IndexVector anchors;     // the next transition_width sites, held fixed
  IndexVector domain;      // window and transition, ascending
  // Blend weight at each domain site: 1 inside the window, tapering to 0
  // across the transition (0 throughout in hard mode).
  Eigen::VectorXd resample_weight;
};

/// Observation sites split into contiguous runs of 2l+1 grid sites.
std::vector<ObservationBlock> partition_blocks(const LinearGaussianObs& obs,
                                               const RingGrid& grid,
                                               const LocalizationConfig& cfg);

/// Block EnKPF: blocks are assimilated one after another on the running
/// ensemble, each by a full EnKPF on its window followed by a continuous
/// adjustment of the transition sites towards the untouched particles
/// outside.
LocalEnkpfResult block_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u, Rng& rng);
LocalEnkpfResult block_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u,
                                     const EnkpfNoise& noise);

}  // namespace enkpf
