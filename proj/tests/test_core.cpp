#include <cmath>
#include <limits>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "enkpf/core.hpp"
#include "enkpf/linalg.hpp"
#include "enkpf/rng.hpp"

using namespace enkpf;

TEST(PeriodicDistance, Examples) {
  EXPECT_EQ(periodic_distance(3, 3, 40), 0);
  EXPECT_EQ(periodic_distance(0, 39, 40), 1);
  EXPECT_EQ(periodic_distance(3, 10, 40), 7);
}

TEST(PeriodicDistance, OutOfRangeThrows) {
  EXPECT_THROW(periodic_distance(40, 0, 40), ArgumentError);
  EXPECT_THROW(periodic_distance(-1, 0, 40), ArgumentError);
}

TEST(PeriodicDistance, SymmetricAndBounded) {
  for (Index n : {1, 2, 7, 40}) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        EXPECT_EQ(periodic_distance(i, j, n), periodic_distance(j, i, n));
        EXPECT_LE(periodic_distance(i, j, n), n / 2);
      }
    }
  }
}

TEST(RingGrid, MatchesPeriodicDistance) {
  const RingGrid grid(10);
  EXPECT_EQ(grid.size(), 10);
  EXPECT_EQ(grid.distance(1, 9), 2);
  EXPECT_THROW(RingGrid(0), ArgumentError);
}

TEST(GcTaper, Examples) {
  EXPECT_DOUBLE_EQ(gc_taper(0.0, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(gc_taper(10.0, 5.0), 0.0);
  EXPECT_NEAR(gc_taper(5.0, 5.0), 5.0 / 24.0, 1e-14);
}

TEST(GcTaper, InvalidArgumentsThrow) {
  EXPECT_THROW(gc_taper(1.0, 0.0), ArgumentError);
  EXPECT_THROW(gc_taper(1.0, -2.0), ArgumentError);
  EXPECT_THROW(gc_taper(-1.0, 2.0), ArgumentError);
}

TEST(GcTaper, InfiniteHalfwidthIsOne) {
  EXPECT_DOUBLE_EQ(gc_taper(100.0, std::numeric_limits<double>::infinity()), 1.0);
}

TEST(GcTaper, BoundedAndNonincreasing) {
  double prev = 1.0;
  for (double d = 0.0; d <= 12.0; d += 0.001) {
    const double v = gc_taper(d, 5.0);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LE(v, prev + 1e-15) << "d=" << d;
    prev = v;
  }
}

TEST(GcTaper, ContinuousAtBranchJoin) {
  EXPECT_NEAR(gc_taper(5.0 - 1e-9, 5.0), gc_taper(5.0 + 1e-9, 5.0), 1e-8);
  EXPECT_NEAR(gc_taper(10.0 - 1e-9, 5.0), 0.0, 1e-8);
}

TEST(Ess, Examples) {
  EXPECT_DOUBLE_EQ(ess(Eigen::Vector4d(0.25, 0.25, 0.25, 0.25)), 4.0);
  EXPECT_DOUBLE_EQ(ess(Eigen::Vector4d(1, 0, 0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(ess(Eigen::Vector4d(0.5, 0.5, 0, 0)), 2.0);
}

TEST(Ess, WithinOneAndKOnRandomSimplices) {
  Rng rng = make_stream(11, {1});
  std::exponential_distribution<double> expo(1.0);
  for (int t = 0; t < 200; ++t) {
    const Index k = 1 + t % 30;
    Eigen::VectorXd w(k);
    for (Index i = 0; i < k; ++i) w(i) = expo(rng);
    w = normalize_weights(w);
    const double e = ess(w);
    EXPECT_GE(e, 1.0 - 1e-12);
    EXPECT_LE(e, static_cast<double>(k) + 1e-12);
  }
}

TEST(Weights, NormalizeRejectsZeroMass) {
  EXPECT_THROW(normalize_weights(Eigen::VectorXd::Zero(3)), DegenerateWeightsError);
  EXPECT_THROW(normalize_weights(Eigen::VectorXd::Constant(2, INFINITY)),
               DegenerateWeightsError);
}

TEST(Weights, FromLogSurvivesUnderflow) {
  const Eigen::VectorXd w = weights_from_log(Eigen::Vector3d(-2000.0, -2000.0, -5000.0));
  EXPECT_NEAR(w(0), 0.5, 1e-15);
  EXPECT_NEAR(w(1), 0.5, 1e-15);
  EXPECT_EQ(w(2), 0.0);
}

TEST(EnsembleMean, Examples) {
  Eigen::MatrixXd same(2, 3);
  same << 1, 1, 1, 4, 4, 4;
  EXPECT_TRUE(ensemble_mean(same).isApprox(Eigen::Vector2d(1, 4)));
  EXPECT_DOUBLE_EQ(ensemble_mean(Eigen::RowVector2d(0, 2))(0), 1.0);
  EXPECT_DOUBLE_EQ(ensemble_mean(Eigen::RowVector3d(1, 2, 6))(0), 3.0);
}

TEST(EnsembleCovariance, Examples) {
  Eigen::MatrixXd same(2, 3);
  same << 1, 1, 1, 4, 4, 4;
  EXPECT_TRUE(ensemble_covariance(same).isZero());
  EXPECT_DOUBLE_EQ(ensemble_covariance(Eigen::RowVector2d(-1, 1))(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(ensemble_covariance(Eigen::RowVector3d(0, 0, 3))(0, 0), 3.0);
  EXPECT_THROW(ensemble_covariance(Eigen::MatrixXd::Ones(2, 1)), ArgumentError);
}

TEST(EnsembleCovariance, PermutationAndShiftInvariant) {
  Rng rng = make_stream(11, {2});
  const Eigen::MatrixXd e = standard_normal(4, 9, rng);
  Eigen::MatrixXd perm(4, 9);
  for (Index i = 0; i < 9; ++i) perm.col(i) = e.col((i * 4) % 9);
  const Eigen::MatrixXd shifted = e.array() + 3.5;
  const Eigen::MatrixXd c = ensemble_covariance(e);
  EXPECT_TRUE(ensemble_covariance(perm).isApprox(c, 1e-12));
  EXPECT_TRUE(ensemble_covariance(shifted).isApprox(c, 1e-12));
  EXPECT_TRUE(c.isApprox(c.transpose()));
}

TEST(TaperMatrix, EntriesFollowRingDistance) {
  const RingGrid grid(20);
  const IndexVector sites{0, 3, 19};
  const Eigen::MatrixXd t = taper_matrix(sites, grid, 2.0);
  EXPECT_DOUBLE_EQ(t(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t(0, 1), gc_taper(3.0, 2.0));
  EXPECT_DOUBLE_EQ(t(0, 2), gc_taper(1.0, 2.0));
  EXPECT_DOUBLE_EQ(t(1, 2), 0.0);
}

TEST(Observation, IdentityAndRestriction) {
  const LinearGaussianObs obs = identity_observation(Eigen::Vector3d(1, 2, 3), 2.0);
  EXPECT_TRUE(obs.H.isIdentity());
  EXPECT_TRUE(obs.R.isApprox(2.0 * Eigen::Matrix3d::Identity()));
  EXPECT_EQ(obs.obs_sites, (IndexVector{0, 1, 2}));
  const LinearGaussianObs sub = restrict_rows(obs, {2, 0});
  EXPECT_EQ(sub.dim(), 2);
  EXPECT_DOUBLE_EQ(sub.y(0), 3.0);
  EXPECT_EQ(sub.obs_sites, (IndexVector{2, 0}));
  EXPECT_NO_THROW(validate(obs, 3));
}

TEST(Observation, ValidateRejectsBadInput) {
  LinearGaussianObs obs = identity_observation(Eigen::Vector3d(1, 2, 3));
  EXPECT_THROW(validate(obs, 4), ArgumentError);
  obs.R(1, 1) = -1.0;
  EXPECT_THROW(validate(obs, 3), SingularityError);
}

TEST(Rng, StreamsDependOnlyOnKeys) {
  EXPECT_EQ(derive_seed(5, {1, 2, 3}), derive_seed(5, {1, 2, 3}));
  EXPECT_NE(derive_seed(5, {1, 2, 3}), derive_seed(5, {1, 3, 2}));
  EXPECT_NE(derive_seed(5, {1}), derive_seed(6, {1}));
  Rng a = make_stream(9, {4});
  Rng b = make_stream(9, {4});
  EXPECT_TRUE(standard_normal(3, 3, a).isApprox(standard_normal(3, 3, b)));
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng = make_stream(1, {});
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Linalg, CovarianceFactorColorsAndWhitens) {
  Eigen::Matrix2d c;
  c << 2.0, 0.5, 0.5, 1.0;
  const CovarianceFactor f(c);
  EXPECT_FALSE(f.is_diagonal());
  EXPECT_TRUE((f.lower() * f.lower().transpose()).isApprox(c));
  const Eigen::Vector2d r(0.3, -1.2);
  EXPECT_TRUE(f.color(f.whiten(r)).isApprox(r));
  EXPECT_NEAR(f.mahalanobis_sq(r)(0), r.dot(c.inverse() * r), 1e-12);
}

TEST(Linalg, DiagonalFastPathAllowsZeros) {
  const CovarianceFactor f(Eigen::Vector3d(4.0, 0.0, 1.0).asDiagonal().toDenseMatrix());
  EXPECT_TRUE(f.is_diagonal());
  EXPECT_TRUE(f.color(Eigen::Vector3d::Ones()).isApprox(Eigen::Vector3d(2, 0, 1)));
}

TEST(Linalg, SpdSolve) {
  Eigen::Matrix2d s;
  s << 4.0, 1.0, 1.0, 3.0;
  const Eigen::Vector2d b(1.0, 2.0);
  EXPECT_TRUE((s * spd_solve(s, b)).isApprox(b));
  EXPECT_THROW(spd_solve(-Eigen::Matrix2d::Identity(), b), SingularityError);
}
