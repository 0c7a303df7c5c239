#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "enkpf/core.hpp"
#include "enkpf/global_filters.hpp"
#include "enkpf/local_filters.hpp"
#include "enkpf/models.hpp"
#include "enkpf/rng.hpp"

using namespace enkpf;

namespace {

struct Problem {
  RingGrid grid;
  Ensemble e;
  LinearGaussianObs obs;
};

Problem conjugate_problem(Index n, Index k, Rng& rng) {
  const ConjugateSetup setup = ConjugateSetup::make(n, std::min<Index>(20, n / 4 * 2));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd x = sample_gaussian(zero, setup.sigma_p, 1, rng).col(0);
  return {RingGrid(n), sample_gaussian(zero, setup.sigma_p, k, rng),
          identity_observation(x + standard_normal(n, 1, rng).col(0))};
}

LinearGaussianObs observe_sites(const Eigen::VectorXd& y, Index n, const IndexVector& sites) {
  LinearGaussianObs obs;
  const Index d = static_cast<Index>(sites.size());
  obs.y = y;
  obs.H = Eigen::MatrixXd::Zero(d, n);
  for (Index r = 0; r < d; ++r) obs.H(r, sites[static_cast<std::size_t>(r)]) = 1.0;
  obs.R = Eigen::MatrixXd::Identity(d, d);
  obs.obs_sites = sites;
  return obs;
}

double max_jump(const Ensemble& e) {
  double jump = 0.0;
  const Index n = e.rows();
  for (Index s = 0; s < n; ++s) {
    jump = std::max(jump, (e.row((s + 1) % n) - e.row(s)).cwiseAbs().maxCoeff());
  }
  return jump;
}

// Sites whose output differs between two ensembles.
std::set<Index> changed_sites(const Ensemble& a, const Ensemble& b) {
  std::set<Index> out;
  for (Index s = 0; s < a.rows(); ++s) {
    if ((a.row(s) - b.row(s)).cwiseAbs().maxCoeff() > 1e-12) out.insert(s);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and observation selection

TEST(LocalizationConfig, RadiusDefaults) {
  const LocalizationConfig cfg = LocalizationConfig::with_radius(5);
  EXPECT_EQ(cfg.radius_l, 5);
  EXPECT_DOUBLE_EQ(cfg.taper_halfwidth, 5.0);
  EXPECT_EQ(cfg.transition_width, 10);
  EXPECT_TRUE(std::isinf(LocalizationConfig::with_radius(3, INFINITY).taper_halfwidth));
  EXPECT_THROW(LocalizationConfig::with_radius(3, 0.0), ArgumentError);
  const LocalizationConfig zero = LocalizationConfig::with_radius(0);
  EXPECT_DOUBLE_EQ(zero.taper_halfwidth, 1.0);
  EXPECT_EQ(zero.transition_width, 2);
}

TEST(LocalizationConfig, ValidateRejectsOversizedRadius) {
  LocalizationConfig cfg = LocalizationConfig::with_radius(25);
  EXPECT_THROW(cfg.validate(RingGrid(40)), ArgumentError);
  EXPECT_NO_THROW(LocalizationConfig::global(RingGrid(40)).validate(RingGrid(40)));
}

TEST(LocalObsSelection, Examples) {
  const RingGrid grid(40);
  const LinearGaussianObs obs = identity_observation(Eigen::VectorXd::LinSpaced(40, 0, 39));
  EXPECT_EQ(local_obs_selection(7, obs, grid, 20).dim(), 40);
  const LinearGaussianObs own = local_obs_selection(7, obs, grid, 0);
  ASSERT_EQ(own.dim(), 1);
  EXPECT_DOUBLE_EQ(own.y(0), 7.0);
  const IndexVector rows = local_obs_rows(0, obs, grid, 5);
  EXPECT_EQ(rows, (IndexVector{0, 1, 2, 3, 4, 5, 35, 36, 37, 38, 39}));
}

// ---------------------------------------------------------------------------
// LEnKF

TEST(Lenkf, GlobalRadiusMatchesEnkf) {
  Rng rng = make_stream(41, {1});
  const Problem p = conjugate_problem(30, 15, rng);
  const Eigen::MatrixXd pert = draw_obs_perturbations(p.obs.R, 15, rng);
  const Ensemble local =
      lenkf_update(p.e, p.obs, p.grid, LocalizationConfig::global(p.grid), pert);
  EXPECT_LE((local - enkf_update(p.e, p.obs, pert)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Lenkf, SitesWithoutObservationsUnchanged) {
  Rng rng = make_stream(41, {2});
  const Ensemble e = standard_normal(20, 8, rng);
  const LinearGaussianObs obs = observe_sites(Eigen::VectorXd::Constant(1, 2.0), 20, {0});
  const Ensemble out = lenkf_update(e, obs, RingGrid(20), LocalizationConfig::with_radius(2), rng);
  for (Index s = 3; s <= 17; ++s) EXPECT_TRUE(out.row(s).isApprox(e.row(s))) << s;
  EXPECT_FALSE(out.row(0).isApprox(e.row(0)));
}

TEST(Lenkf, ZeroRadiusIsSitewiseKalman) {
  Rng rng = make_stream(41, {3});
  const Index n = 6, k = 10;
  const Ensemble e = standard_normal(n, k, rng);
  const LinearGaussianObs obs = identity_observation(standard_normal(n, 1, rng).col(0));
  const Eigen::MatrixXd pert = draw_obs_perturbations(obs.R, k, rng);
  const Ensemble out =
      lenkf_update(e, obs, RingGrid(n), LocalizationConfig::with_radius(0), pert);
  const Eigen::MatrixXd cov = ensemble_covariance(e);
  for (Index s = 0; s < n; ++s) {
    const double gain = cov(s, s) / (cov(s, s) + 1.0);
    for (Index i = 0; i < k; ++i) {
      EXPECT_NEAR(out(s, i), e(s, i) + gain * (obs.y(s) + pert(s, i) - e(s, i)), 1e-10);
    }
  }
}

// ---------------------------------------------------------------------------
// LPF

TEST(Lpf, GlobalRadiusMatchesPf) {
  Rng rng = make_stream(41, {4});
  const Problem p = conjugate_problem(30, 15, rng);
  const LpfResult r = lpf_update(p.e, p.obs, p.grid, LocalizationConfig::global(p.grid), 0.61);
  EXPECT_TRUE(r.ensemble.isApprox(pf_update(p.e, p.obs, 0.61).ensemble));
  EXPECT_EQ(r.degenerate_sites, 0);
}

TEST(Lpf, SitesWithoutObservationsKeepIdentity) {
  Rng rng = make_stream(41, {5});
  const Ensemble e = standard_normal(20, 8, rng);
  const LinearGaussianObs obs = observe_sites(Eigen::VectorXd::Constant(1, 2.0), 20, {0});
  const LpfResult r = lpf_update(e, obs, RingGrid(20), LocalizationConfig::with_radius(2), 0.3);
  for (Index s = 3; s <= 17; ++s) EXPECT_TRUE(r.ensemble.row(s).isApprox(e.row(s))) << s;
}

TEST(Lpf, EqualLocalWeightsGiveEqualAncestors) {
  // Sites 5 and 6 see exactly the same observation set when only site 20 is
  // observed and the radius covers both.
  Rng rng = make_stream(41, {6});
  const Ensemble e = standard_normal(40, 12, rng);
  const LinearGaussianObs obs = observe_sites(Eigen::VectorXd::Constant(1, 0.5), 40, {20});
  const LpfResult r = lpf_update(e, obs, RingGrid(40), LocalizationConfig::with_radius(15), 0.4);
  EXPECT_EQ(r.ancestors[5], r.ancestors[6]);
  EXPECT_EQ(r.ancestors[10], r.ancestors[30]);
}

// ---------------------------------------------------------------------------
// Naive LEnKPF

TEST(NaiveLenkpf, GlobalRadiusMatchesEnkpf) {
  Rng rng = make_stream(41, {7});
  const Problem p = conjugate_problem(30, 15, rng);
  const EnkpfNoise noise = draw_enkpf_noise(p.obs.R, 15, rng);
  const LocalizationConfig global = LocalizationConfig::global(p.grid);
  for (double gamma : {0.0, 0.3, 1.0}) {
    const LocalEnkpfResult r =
        naive_lenkpf_update(p.e, p.obs, p.grid, global, GammaPolicy::fixed(gamma), 0.2, noise);
    const Ensemble g = enkpf_update(p.e, p.obs, gamma, 0.2, noise).ensemble;
    EXPECT_LE((r.ensemble - g).cwiseAbs().maxCoeff(), 1e-8) << gamma;
  }
}

TEST(NaiveLenkpf, GammaOneMatchesLenkf) {
  Rng rng = make_stream(41, {8});
  const Problem p = conjugate_problem(30, 15, rng);
  const EnkpfNoise noise = draw_enkpf_noise(p.obs.R, 15, rng);
  const LocalizationConfig cfg = LocalizationConfig::with_radius(3);
  const LocalEnkpfResult r =
      naive_lenkpf_update(p.e, p.obs, p.grid, cfg, GammaPolicy::fixed(1.0), 0.2, noise);
  const Ensemble l = lenkf_update(p.e, p.obs, p.grid, cfg, noise.stage1);
  EXPECT_LE((r.ensemble - l).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(NaiveLenkpf, KeepsMoreDistinctAncestorsThanLpf) {
  Rng rng = make_stream(41, {9});
  const LocalizationConfig cfg = LocalizationConfig::with_radius(3);
  double naive_distinct = 0.0, lpf_distinct = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Problem p = conjugate_problem(40, 10, rng);
    const double u = uniform01(rng);
    const LocalEnkpfResult nr =
        naive_lenkpf_update(p.e, p.obs, p.grid, cfg, GammaPolicy::fixed(0.25), u, rng);
    const LpfResult lr = lpf_update(p.e, p.obs, p.grid, cfg, u);
    for (Index s = 0; s < 40; ++s) {
      const auto& a = nr.ancestors[static_cast<std::size_t>(s)];
      const auto& b = lr.ancestors[static_cast<std::size_t>(s)];
      naive_distinct += static_cast<double>(std::set<Index>(a.begin(), a.end()).size());
      lpf_distinct += static_cast<double>(std::set<Index>(b.begin(), b.end()).size());
    }
  }
  EXPECT_GE(naive_distinct, lpf_distinct);
}

// ---------------------------------------------------------------------------
// Block LEnKPF

TEST(PartitionBlocks, StructureOfWindowsAndTransitions) {
  const RingGrid grid(40);
  const LinearGaussianObs obs = identity_observation(Eigen::VectorXd::Zero(40));
  const LocalizationConfig cfg = LocalizationConfig::with_radius(2);
  const std::vector<ObservationBlock> blocks = partition_blocks(obs, grid, cfg);
  ASSERT_EQ(blocks.size(), 8u);
  std::set<Index> rows;
  for (const ObservationBlock& b : blocks) {
    EXPECT_EQ(b.rows.size(), 5u);
    rows.insert(b.rows.begin(), b.rows.end());
    EXPECT_EQ(b.window.size(), 9u);
    EXPECT_EQ(b.transition.size(), 8u);
    EXPECT_EQ(b.anchors.size(), 8u);
    EXPECT_EQ(b.domain.size(), b.window.size() + b.transition.size());
    EXPECT_TRUE(std::is_sorted(b.domain.begin(), b.domain.end()));
    for (std::size_t a = 0; a < b.domain.size(); ++a) {
      const bool in_window =
          std::find(b.window.begin(), b.window.end(), b.domain[a]) != b.window.end();
      const double w = b.resample_weight(static_cast<Index>(a));
      if (in_window) {
        EXPECT_DOUBLE_EQ(w, 1.0);
      } else {
        EXPECT_GT(w, 0.0);
        EXPECT_LT(w, 1.0);
      }
    }
  }
  EXPECT_EQ(rows.size(), 40u);
}

TEST(PartitionBlocks, LastBlockShorter) {
  const RingGrid grid(12);
  const std::vector<ObservationBlock> blocks = partition_blocks(
      identity_observation(Eigen::VectorXd::Zero(12)), grid, LocalizationConfig::with_radius(2));
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks.back().rows.size(), 2u);
}

TEST(PartitionBlocks, HardModeHasZeroTransitionWeight) {
  LocalizationConfig cfg = LocalizationConfig::with_radius(2);
  cfg.transition = TransitionMode::hard;
  const auto blocks =
      partition_blocks(identity_observation(Eigen::VectorXd::Zero(40)), RingGrid(40), cfg);
  EXPECT_DOUBLE_EQ(blocks[0].resample_weight.minCoeff(), 0.0);
}

TEST(BlockLenkpf, SingleBlockMatchesEnkpf) {
  Rng rng = make_stream(41, {10});
  const Problem p = conjugate_problem(30, 15, rng);
  const EnkpfNoise noise = draw_enkpf_noise(p.obs.R, 15, rng);
  const LocalizationConfig global = LocalizationConfig::global(p.grid);
  for (double gamma : {0.0, 0.5, 1.0}) {
    const LocalEnkpfResult r =
        block_lenkpf_update(p.e, p.obs, p.grid, global, GammaPolicy::fixed(gamma), 0.7, noise);
    const Ensemble g = enkpf_update(p.e, p.obs, gamma, 0.7, noise).ensemble;
    EXPECT_LE((r.ensemble - g).cwiseAbs().maxCoeff(), 1e-8) << gamma;
  }
}

TEST(BlockLenkpf, ChangingAnObservationStaysInsideItsBlockDomain) {
  // Only sites 0..4 are observed, so there is a single block.
  Rng rng = make_stream(41, {11});
  const Index n = 40;
  const Problem p = conjugate_problem(n, 20, rng);
  const IndexVector sites{0, 1, 2, 3, 4};
  LinearGaussianObs obs = observe_sites(p.obs.y.head(5), n, sites);
  const EnkpfNoise noise = draw_enkpf_noise(obs.R, 20, rng);
  for (TransitionMode mode :
       {TransitionMode::conditional, TransitionMode::blend, TransitionMode::hard}) {
    LocalizationConfig cfg = LocalizationConfig::with_radius(2, INFINITY);
    cfg.transition = mode;
    const auto blocks = partition_blocks(obs, p.grid, cfg);
    ASSERT_EQ(blocks.size(), 1u);
    const std::set<Index> domain(blocks[0].domain.begin(), blocks[0].domain.end());
    LinearGaussianObs moved = obs;
    moved.y(2) += 1.5;
    const GammaPolicy policy = GammaPolicy::fixed(0.5);
    const Ensemble a = block_lenkpf_update(p.e, obs, p.grid, cfg, policy, 0.3, noise).ensemble;
    const Ensemble b = block_lenkpf_update(p.e, moved, p.grid, cfg, policy, 0.3, noise).ensemble;
    const std::set<Index> changed = changed_sites(a, b);
    EXPECT_FALSE(changed.empty());
    for (Index s : changed) EXPECT_TRUE(domain.count(s)) << "site " << s;
    for (Index s : changed_sites(a, p.e)) EXPECT_TRUE(domain.count(s)) << "site " << s;
  }
}

TEST(BlockLenkpf, TransitionReducesJumpsAgainstHardCutoff) {
  Rng rng = make_stream(41, {12});
  double hard = 0.0, blend = 0.0, conditional = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Problem p = conjugate_problem(60, 40, rng);
    const EnkpfNoise noise = draw_enkpf_noise(p.obs.R, 40, rng);
    const double u = uniform01(rng);
    auto run = [&](TransitionMode mode) {
      LocalizationConfig cfg = LocalizationConfig::with_radius(3, INFINITY);
      cfg.transition = mode;
      return max_jump(block_lenkpf_update(p.e, p.obs, p.grid, cfg, GammaPolicy::fixed(0.25),
                                          u, noise).ensemble);
    };
    hard += run(TransitionMode::hard);
    blend += run(TransitionMode::blend);
    conditional += run(TransitionMode::conditional);
  }
  EXPECT_LE(blend, hard);
  EXPECT_LE(conditional, hard);
}

// ---------------------------------------------------------------------------
// Locality of the sitewise filters

TEST(Locality, ObservationInfluenceStaysWithinRadius) {
  Rng rng = make_stream(41, {13});
  const Index n = 40, l = 3;
  const Problem p = conjugate_problem(n, 20, rng);
  const LocalizationConfig cfg = LocalizationConfig::with_radius(l);
  const Eigen::MatrixXd pert = draw_obs_perturbations(p.obs.R, 20, rng);
  const EnkpfNoise noise = draw_enkpf_noise(p.obs.R, 20, rng);
  LinearGaussianObs moved = p.obs;
  const Index r = 17;
  moved.y(r) += 2.0;
  auto check = [&](const Ensemble& a, const Ensemble& b, const char* name) {
    const std::set<Index> changed = changed_sites(a, b);
    EXPECT_FALSE(changed.empty()) << name;
    for (Index s : changed) EXPECT_LE(p.grid.distance(s, r), l) << name << " site " << s;
  };
  check(lenkf_update(p.e, p.obs, p.grid, cfg, pert), lenkf_update(p.e, moved, p.grid, cfg, pert),
        "LEnKF");
  check(lpf_update(p.e, p.obs, p.grid, cfg, 0.5).ensemble,
        lpf_update(p.e, moved, p.grid, cfg, 0.5).ensemble, "LPF");
  const GammaPolicy policy = GammaPolicy::fixed(0.5);
  check(naive_lenkpf_update(p.e, p.obs, p.grid, cfg, policy, 0.5, noise).ensemble,
        naive_lenkpf_update(p.e, moved, p.grid, cfg, policy, 0.5, noise).ensemble, "naive");
}

TEST(Locality, AdaptiveGammaPerSite) {
  Rng rng = make_stream(41, {14});
  const Problem p = conjugate_problem(30, 20, rng);
  const LocalEnkpfResult r = naive_lenkpf_update(p.e, p.obs, p.grid,
                                                 LocalizationConfig::with_radius(3),
                                                 GammaPolicy::adaptive(), 0.5, rng);
  ASSERT_EQ(r.gamma.size(), 30);
  EXPECT_GE(r.gamma.minCoeff(), 0.0);
  EXPECT_LE(r.gamma.maxCoeff(), 1.0);
}
