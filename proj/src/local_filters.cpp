#include "enkpf/local_filters.hpp"

#include <algorithm>
#include <cmath>

#include "enkpf/core.hpp"
#include "enkpf/detail/enkpf_stages.hpp"
#include "enkpf/linalg.hpp"
#include "enkpf/resampling.hpp"

namespace enkpf {

LocalizationConfig LocalizationConfig::with_radius(Index l, double taper_factor) {
  if (!(taper_factor > 0.0)) {
    throw ArgumentError("LocalizationConfig: taper factor must be positive");
  }
  LocalizationConfig cfg;
  cfg.radius_l = l;
  cfg.taper_halfwidth = taper_factor * static_cast<double>(std::max<Index>(l, 1));
  cfg.transition_width = 2 * std::max<Index>(l, 1);
  return cfg;
}

LocalizationConfig LocalizationConfig::global(const RingGrid& grid) {
  LocalizationConfig cfg = with_radius(grid.size() / 2);
  cfg.taper_halfwidth = std::numeric_limits<double>::infinity();
  return cfg;
}

void LocalizationConfig::validate(const RingGrid& grid) const {
  if (radius_l < 0 || radius_l > grid.size() / 2) {
    throw ArgumentError("LocalizationConfig: radius must lie in [0, n/2]");
  }
  if (!(taper_halfwidth > 0.0)) {
    throw ArgumentError("LocalizationConfig: taper half-width must be positive");
  }
  if (transition_width < 1) {
    throw ArgumentError("LocalizationConfig: transition width must be >= 1");
  }
}

IndexVector local_obs_rows(Index site, const LinearGaussianObs& obs,
                           const RingGrid& grid, Index l) {
  IndexVector rows;
  for (std::size_t r = 0; r < obs.obs_sites.size(); ++r) {
    if (grid.distance(site, obs.obs_sites[r]) <= l) {
      rows.push_back(static_cast<Index>(r));
    }
  }
  return rows;
}

LinearGaussianObs local_obs_selection(Index site, const LinearGaussianObs& obs,
                                      const RingGrid& grid, Index l) {
  return restrict_rows(obs, local_obs_rows(site, obs, grid, l));
}

namespace {

// Precomputed pieces shared by every site or block of one update.
class LocalProblem {
 public:
  LocalProblem(const Ensemble& e, const LinearGaussianObs& obs, const RingGrid& grid,
               const LocalizationConfig& cfg)
      : obs_(obs), grid_(grid), cfg_(cfg) {
    if (e.rows() != grid.size()) {
      throw ArgumentError("ensemble does not match the grid");
    }
    if (!e.allFinite()) {
      throw ArgumentError("ensemble contains non-finite values");
    }
    validate(obs, grid.size());
    cfg.validate(grid);
    taper_.resize(static_cast<std::size_t>(grid.size() / 2 + 1));
    for (std::size_t d = 0; d < taper_.size(); ++d) {
      taper_[d] = gc_taper(static_cast<double>(d), cfg.taper_halfwidth);
    }
    row_support_.resize(static_cast<std::size_t>(obs.dim()));
    for (Index r = 0; r < obs.dim(); ++r) {
      for (Index c = 0; c < obs.H.cols(); ++c) {
        if (obs.H(r, c) != 0.0) {
          row_support_[static_cast<std::size_t>(r)].push_back(c);
        }
      }
    }
  }

  const LinearGaussianObs& obs() const { return obs_; }
  const RingGrid& grid() const { return grid_; }
  const LocalizationConfig& cfg() const { return cfg_; }

  /// site, plus every state component the given rows read, ascending.
  IndexVector window_for(Index site, const IndexVector& rows) const {
    IndexVector w{site};
    for (Index r : rows) {
      const auto& sup = row_support_[static_cast<std::size_t>(r)];
      w.insert(w.end(), sup.begin(), sup.end());
    }
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
  }

  void add_row_support(IndexVector& sites, const IndexVector& rows) const {
    for (Index r : rows) {
      const auto& sup = row_support_[static_cast<std::size_t>(r)];
      sites.insert(sites.end(), sup.begin(), sup.end());
    }
  }

  /// Tapered sample covariance of the ensemble rows in `sites`.
  Eigen::MatrixXd tapered_covariance(const Eigen::MatrixXd& x_sites,
                                     const IndexVector& sites) const {
    Eigen::MatrixXd cov = ensemble_covariance(x_sites);
    const Index m = static_cast<Index>(sites.size());
    for (Index a = 0; a < m; ++a) {
      for (Index b = a + 1; b < m; ++b) {
        const double t = taper_[static_cast<std::size_t>(grid_.distance(
            sites[static_cast<std::size_t>(a)], sites[static_cast<std::size_t>(b)]))];
        cov(a, b) *= t;
        cov(b, a) *= t;
      }
    }
    return cov;
  }

  /// Observation rows restricted to the window's columns.
  LinearGaussianObs window_obs(const IndexVector& rows, const IndexVector& sites) const {
    const LinearGaussianObs sub = restrict_rows(obs_, rows);
    LinearGaussianObs out;
    out.y = sub.y;
    out.R = sub.R;
    out.obs_sites = sub.obs_sites;
    out.H.resize(sub.H.rows(), static_cast<Index>(sites.size()));
    for (std::size_t c = 0; c < sites.size(); ++c) {
      out.H.col(static_cast<Index>(c)) = sub.H.col(sites[c]);
    }
    return out;
  }

 private:
  const LinearGaussianObs& obs_;
  const RingGrid& grid_;
  const LocalizationConfig& cfg_;
  std::vector<double> taper_;
  std::vector<IndexVector> row_support_;
};

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const IndexVector& rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    out.row(static_cast<Index>(a)) = m.row(rows[a]);
  }
  return out;
}

Index position_of(const IndexVector& sorted, Index value) {
  return static_cast<Index>(std::lower_bound(sorted.begin(), sorted.end(), value) -
                            sorted.begin());
}

void check_noise(const EnkpfNoise& noise, const LinearGaussianObs& obs, Index k) {
  if (noise.stage1.rows() != obs.dim() || noise.stage1.cols() != k ||
      noise.stage2.rows() != obs.dim() || noise.stage2.cols() != k) {
    throw ArgumentError("EnKPF noise must be d x k");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// LEnKF

Ensemble lenkf_update(const Ensemble& e, const LinearGaussianObs& obs,
                      const RingGrid& grid, const LocalizationConfig& cfg, Rng& rng) {
  validate(obs, e.rows());
  return lenkf_update(e, obs, grid, cfg, draw_obs_perturbations(obs.R, e.cols(), rng));
}

Ensemble lenkf_update(const Ensemble& e, const LinearGaussianObs& obs,
                      const RingGrid& grid, const LocalizationConfig& cfg,
                      const Eigen::MatrixXd& perturbations) {
  const LocalProblem problem(e, obs, grid, cfg);
  if (e.cols() < 2) {
    throw ArgumentError("lenkf_update: need at least two particles");
  }
  if (perturbations.rows() != obs.dim() || perturbations.cols() != e.cols()) {
    throw ArgumentError("lenkf_update: perturbations must be d x k");
  }
  Ensemble out = e;
  for (Index s = 0; s < grid.size(); ++s) {
    const IndexVector rows = local_obs_rows(s, obs, grid, cfg.radius_l);
    if (rows.empty()) {
      continue;
    }
    const IndexVector window = problem.window_for(s, rows);
    const Eigen::MatrixXd xw = gather_rows(e, window);
    const Eigen::MatrixXd sigma = problem.tapered_covariance(xw, window);
    const LinearGaussianObs local = problem.window_obs(rows, window);
    const Index at = position_of(window, s);

    const Eigen::MatrixXd hs = local.H * sigma;
    const Eigen::MatrixXd innov_cov = hs * local.H.transpose() + local.R;
    const Eigen::VectorXd gain_row = spd_solve(innov_cov, hs.col(at));
    const Eigen::MatrixXd innovation =
        (gather_rows(perturbations, rows) - local.H * xw).colwise() + local.y;
    out.row(s) += gain_row.transpose() * innovation;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LPF

LpfResult lpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                     const RingGrid& grid, const LocalizationConfig& cfg, double u) {
  const LocalProblem problem(e, obs, grid, cfg);
  const Index k = e.cols();
  if (k < 1) {
    throw ArgumentError("lpf_update: empty ensemble");
  }
  LpfResult out;
  out.ensemble = e;
  out.ancestors.resize(static_cast<std::size_t>(grid.size()));
  const WeightVector uniform = WeightVector::Constant(k, 1.0 / static_cast<double>(k));
  for (Index s = 0; s < grid.size(); ++s) {
    const IndexVector rows = local_obs_rows(s, obs, grid, cfg.radius_l);
    WeightVector w = uniform;
    if (!rows.empty()) {
      const LinearGaussianObs local = restrict_rows(obs, rows);
      try {
        w = weights_from_log(log_likelihoods(e, local));
      } catch (const DegenerateWeightsError&) {
        ++out.degenerate_sites;
      }
    }
    IndexVector idx = systematic_resample(w, k, u);
    for (Index i = 0; i < k; ++i) {
      out.ensemble(s, i) = e(s, idx[static_cast<std::size_t>(i)]);
    }
    out.ancestors[static_cast<std::size_t>(s)] = std::move(idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// naive LEnKPF

LocalEnkpfResult naive_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u, Rng& rng) {
  validate(obs, e.rows());
  return naive_lenkpf_update(e, obs, grid, cfg, policy, u,
                             draw_enkpf_noise(obs.R, e.cols(), rng));
}

LocalEnkpfResult naive_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u,
                                     const EnkpfNoise& noise) {
  const LocalProblem problem(e, obs, grid, cfg);
  policy.validate();
  const Index k = e.cols();
  if (k < 2) {
    throw ArgumentError("naive_lenkpf_update: need at least two particles");
  }
  check_noise(noise, obs, k);

  LocalEnkpfResult out;
  out.ensemble = e;
  out.gamma = Eigen::VectorXd::Ones(grid.size());
  out.ancestors.resize(static_cast<std::size_t>(grid.size()));
  for (Index s = 0; s < grid.size(); ++s) {
    const IndexVector rows = local_obs_rows(s, obs, grid, cfg.radius_l);
    if (rows.empty()) {
      IndexVector identity(static_cast<std::size_t>(k));
      for (Index i = 0; i < k; ++i) identity[static_cast<std::size_t>(i)] = i;
      out.ancestors[static_cast<std::size_t>(s)] = std::move(identity);
      continue;
    }
    const IndexVector window = problem.window_for(s, rows);
    const Eigen::MatrixXd xw = gather_rows(e, window);
    const Eigen::MatrixXd sigma = problem.tapered_covariance(xw, window);
    const LinearGaussianObs local = problem.window_obs(rows, window);

    const double gamma = detail::select_gamma(xw, sigma, local, policy);
    const detail::EnkpfStages st = detail::enkpf_stages(xw, sigma, local, gamma);
    IndexVector idx = systematic_resample(st.alpha, k, u);
    const Eigen::MatrixXd xf =
        detail::enkpf_finish(st, local, idx, gather_rows(noise.stage1, rows),
                             gather_rows(noise.stage2, rows));
    out.ensemble.row(s) = xf.row(position_of(window, s));
    out.gamma(s) = gamma;
    out.ancestors[static_cast<std::size_t>(s)] = std::move(idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// block LEnKPF

namespace {

// Sites of a sorted set split into runs of ring neighbours.
std::vector<IndexVector> contiguous_runs(const IndexVector& sites, const RingGrid& grid) {
  std::vector<IndexVector> runs;
  for (Index s : sites) {
    if (runs.empty() || grid.distance(runs.back().back(), s) != 1) {
      runs.emplace_back();
    }
    runs.back().push_back(s);
  }
  if (runs.size() > 1 && grid.distance(runs.back().back(), runs.front().front()) == 1) {
    runs.back().insert(runs.back().end(), runs.front().begin(), runs.front().end());
    runs.erase(runs.begin());
  }
  return runs;
}

}  // namespace

std::vector<ObservationBlock> partition_blocks(const LinearGaussianObs& obs,
                                               const RingGrid& grid,
                                               const LocalizationConfig& cfg) {
  cfg.validate(grid);
  validate(obs, grid.size());
  const Index n = grid.size();
  const Index l = cfg.radius_l;
  const Index tw = cfg.transition_width;
  const Index span = 2 * l + 1;
  const Index n_blocks = (n + span - 1) / span;

  std::vector<IndexVector> block_rows(static_cast<std::size_t>(n_blocks));
  IndexVector order(obs.obs_sites.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = static_cast<Index>(r);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return obs.obs_sites[static_cast<std::size_t>(a)] <
           obs.obs_sites[static_cast<std::size_t>(b)];
  });
  for (Index r : order) {
    const Index site = obs.obs_sites[static_cast<std::size_t>(r)];
    block_rows[static_cast<std::size_t>(site / span)].push_back(r);
  }

  std::vector<ObservationBlock> blocks;
  for (auto& rows : block_rows) {
    if (rows.empty()) {
      continue;
    }
    ObservationBlock block;
    block.rows = rows;

    std::vector<bool> in_window(static_cast<std::size_t>(n), false);
    for (Index r : rows) {
      const Index centre = obs.obs_sites[static_cast<std::size_t>(r)];
      for (Index off = -l; off <= l; ++off) {
        in_window[static_cast<std::size_t>(((centre + off) % n + n) % n)] = true;
      }
      for (Index c = 0; c < obs.H.cols(); ++c) {
        if (obs.H(r, c) != 0.0) in_window[static_cast<std::size_t>(c)] = true;
      }
    }
    std::vector<Index> dist(static_cast<std::size_t>(n), n);
    for (Index s = 0; s < n; ++s) {
      if (in_window[static_cast<std::size_t>(s)]) block.window.push_back(s);
    }
    for (Index s = 0; s < n; ++s) {
      for (Index w : block.window) {
        dist[static_cast<std::size_t>(s)] =
            std::min(dist[static_cast<std::size_t>(s)], grid.distance(s, w));
      }
    }
    for (Index s = 0; s < n; ++s) {
      const Index d = dist[static_cast<std::size_t>(s)];
      if (d > 0 && d <= tw) {
        block.transition.push_back(s);
      } else if (d > tw && d <= 2 * tw) {
        block.anchors.push_back(s);
      }
      if (d <= tw) {
        block.domain.push_back(s);
      }
    }
    block.resample_weight.resize(static_cast<Index>(block.domain.size()));
    for (std::size_t a = 0; a < block.domain.size(); ++a) {
      const Index d = dist[static_cast<std::size_t>(block.domain[a])];
      double lambda = 1.0;
      if (d > 0) {
        lambda = cfg.transition == TransitionMode::hard
                     ? 0.0
                     : gc_taper(static_cast<double>(d),
                                0.5 * static_cast<double>(tw + 1));
      }
      block.resample_weight(static_cast<Index>(a)) = lambda;
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

LocalEnkpfResult block_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u, Rng& rng) {
  validate(obs, e.rows());
  return block_lenkpf_update(e, obs, grid, cfg, policy, u,
                             draw_enkpf_noise(obs.R, e.cols(), rng));
}

namespace {

// Moves the transition sites of one block after its window changed by
// delta (window rows x k). Conditional mode shifts each run of transition
// sites by its regression on the nearby window sites (which moved) and the
// anchors beyond it (which did not); blend mode carries the change of the
// nearest window site over with the taper-shaped weight.
void update_transition(Ensemble& x, const Ensemble& before, const ObservationBlock& block,
                       const Eigen::MatrixXd& delta, const LocalProblem& problem) {
  const LocalizationConfig& cfg = problem.cfg();
  const RingGrid& grid = problem.grid();
  if (cfg.transition == TransitionMode::hard || block.transition.empty()) {
    return;
  }
  if (cfg.transition == TransitionMode::blend) {
    for (std::size_t a = 0; a < block.domain.size(); ++a) {
      const Index s = block.domain[a];
      const double lambda = block.resample_weight(static_cast<Index>(a));
      if (lambda >= 1.0) continue;
      Index nearest = 0;
      for (std::size_t w = 0; w < block.window.size(); ++w) {
        if (grid.distance(s, block.window[w]) <
            grid.distance(s, block.window[static_cast<std::size_t>(nearest)])) {
          nearest = static_cast<Index>(w);
        }
      }
      x.row(s) += lambda * delta.row(nearest);
    }
    return;
  }
  const Index tw = cfg.transition_width;
  for (const IndexVector& run : contiguous_runs(block.transition, grid)) {
    auto near_run = [&](Index s) {
      for (Index t : run) {
        if (grid.distance(s, t) <= tw) return true;
      }
      return false;
    };
    IndexVector moved;  // positions in the window
    IndexVector sites = run;
    for (std::size_t w = 0; w < block.window.size(); ++w) {
      if (near_run(block.window[w])) {
        moved.push_back(static_cast<Index>(w));
        sites.push_back(block.window[w]);
      }
    }
    for (Index s : block.anchors) {
      if (near_run(s)) sites.push_back(s);
    }
    const Index nt = static_cast<Index>(run.size());
    const Index np = static_cast<Index>(sites.size()) - nt;
    if (moved.empty()) continue;
    const Eigen::MatrixXd cov = problem.tapered_covariance(gather_rows(before, sites), sites);
    Eigen::MatrixXd cpp = cov.bottomRightCorner(np, np);
    const double scale = cpp.diagonal().mean();
    if (!(scale > 0.0)) continue;
    cpp.diagonal().array() += 1e-6 * scale;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(np, x.cols());
    for (std::size_t m = 0; m < moved.size(); ++m) {
      d.row(static_cast<Index>(m)) = delta.row(moved[m]);
    }
    const Eigen::MatrixXd shift = cov.topRightCorner(nt, np) * spd_solve(cpp, d);
    for (Index a = 0; a < nt; ++a) {
      x.row(run[static_cast<std::size_t>(a)]) += shift.row(a);
    }
  }
}

}  // namespace

LocalEnkpfResult block_lenkpf_update(const Ensemble& e, const LinearGaussianObs& obs,
                                     const RingGrid& grid, const LocalizationConfig& cfg,
                                     const GammaPolicy& policy, double u,
                                     const EnkpfNoise& noise) {
  const LocalProblem problem(e, obs, grid, cfg);
  policy.validate();
  const Index k = e.cols();
  if (k < 2) {
    throw ArgumentError("block_lenkpf_update: need at least two particles");
  }
  check_noise(noise, obs, k);

  const std::vector<ObservationBlock> blocks = partition_blocks(obs, grid, cfg);
  LocalEnkpfResult out;
  out.ensemble = e;
  out.gamma.resize(static_cast<Index>(blocks.size()));
  out.ancestors.reserve(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ObservationBlock& block = blocks[b];
    const Ensemble before = out.ensemble;
    const Eigen::MatrixXd xw = gather_rows(before, block.window);
    const Eigen::MatrixXd sigma = problem.tapered_covariance(xw, block.window);
    const LinearGaussianObs local = problem.window_obs(block.rows, block.window);

    const double gamma = detail::select_gamma(xw, sigma, local, policy);
    const detail::EnkpfStages st = detail::enkpf_stages(xw, sigma, local, gamma);
    IndexVector idx = systematic_resample(st.alpha, k, u);
    const Eigen::MatrixXd xf =
        detail::enkpf_finish(st, local, idx, gather_rows(noise.stage1, block.rows),
                             gather_rows(noise.stage2, block.rows));
    for (std::size_t a = 0; a < block.window.size(); ++a) {
      out.ensemble.row(block.window[a]) = xf.row(static_cast<Index>(a));
    }
    update_transition(out.ensemble, before, block, xf - xw, problem);
    out.gamma(static_cast<Index>(b)) = gamma;
    out.ancestors.push_back(std::move(idx));
  }
  return out;
}

}  // namespace enkpf
