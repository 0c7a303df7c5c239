#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "enkpf/core.hpp"
#include "enkpf/resampling.hpp"
#include "enkpf/rng.hpp"

using namespace enkpf;

namespace {

Eigen::VectorXd counts(const IndexVector& idx, Index n) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (Index i : idx) c(i) += 1.0;
  return c;
}

Eigen::VectorXd random_simplex(Index k, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd w(k);
  for (Index i = 0; i < k; ++i) w(i) = expo(rng);
  return w / w.sum();
}

}  // namespace

TEST(SystematicResample, UniformKeepsEachOnce) {
  for (double u : {0.0, 0.3, 0.999}) {
    EXPECT_EQ(systematic_resample(Eigen::VectorXd::Constant(5, 0.2), 5, u),
              (IndexVector{0, 1, 2, 3, 4}));
  }
}

TEST(SystematicResample, DegenerateWeights) {
  EXPECT_EQ(systematic_resample(Eigen::Vector3d(1, 0, 0), 3, 0.7), (IndexVector{0, 0, 0}));
}

TEST(SystematicResample, EnumeratedCounts) {
  const IndexVector idx = systematic_resample(Eigen::Vector3d(0.5, 0.25, 0.25), 4, 0.1);
  EXPECT_EQ(idx, (IndexVector{0, 0, 1, 2}));
}

TEST(SystematicResample, OffsetOutsideUnitIntervalThrows) {
  EXPECT_THROW(systematic_resample(Eigen::Vector2d(0.5, 0.5), 2, 1.0), ArgumentError);
  EXPECT_THROW(systematic_resample(Eigen::Vector2d(0.5, 0.5), 2, -0.1), ArgumentError);
}

TEST(SystematicResample, BalancedAndSorted) {
  Rng rng = make_stream(21, {1});
  for (int t = 0; t < 500; ++t) {
    const Index n = 2 + t % 17;
    const Index k = 1 + (t * 7) % 40;
    const Eigen::VectorXd w = random_simplex(n, rng);
    const IndexVector idx = systematic_resample(w, k, uniform01(rng));
    ASSERT_EQ(static_cast<Index>(idx.size()), k);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    const Eigen::VectorXd c = counts(idx, n);
    EXPECT_LT((c - static_cast<double>(k) * w).cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(SystematicResample, UnbiasedOverOffset) {
  Rng rng = make_stream(21, {3});
  const Eigen::VectorXd w = random_simplex(6, rng);
  const Index k = 7;
  constexpr int kDraws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(6);
  for (int t = 0; t < kDraws; ++t) {
    const Eigen::VectorXd c = counts(systematic_resample(w, k, uniform01(rng)), 6);
    sum += c;
    sum_sq += c.cwiseProduct(c);
  }
  const Eigen::VectorXd mean = sum / kDraws;
  const Eigen::VectorXd var = sum_sq / kDraws - mean.cwiseProduct(mean);
  for (Index i = 0; i < 6; ++i) {
    const double se = std::sqrt(var(i) / kDraws) + 1e-12;
    EXPECT_LE(std::abs(mean(i) - k * w(i)), 3.0 * se) << "index " << i;
  }
}

TEST(ResampleEnsemble, UniformWeightsCopyInput) {
  Eigen::MatrixXd e(2, 3);
  e << 1, 2, 3, 4, 5, 6;
  EXPECT_TRUE(resample_ensemble(e, Eigen::VectorXd::Constant(3, 1.0 / 3), 0.5).isApprox(e));
}

TEST(ResampleEnsemble, DegenerateWeightsRepeatOneColumn) {
  Eigen::MatrixXd e(2, 3);
  e << 1, 2, 3, 4, 5, 6;
  const Ensemble out = resample_ensemble(e, Eigen::Vector3d(0, 0, 1), 0.2);
  for (Index i = 0; i < 3; ++i) EXPECT_TRUE(out.col(i).isApprox(e.col(2)));
}

TEST(ResampleEnsemble, DuplicationMatchesCounts) {
  Eigen::MatrixXd e(1, 3);
  e << 10, 20, 30;
  const Ensemble out = resample_ensemble(e, Eigen::Vector3d(0.5, 0.25, 0.25), 0.1);
  ASSERT_EQ(out.cols(), 3);
  const Ensemble out4 = select_columns(e, systematic_resample(Eigen::Vector3d(0.5, 0.25, 0.25), 4, 0.1));
  EXPECT_TRUE(out4.isApprox((Eigen::RowVector4d() << 10, 10, 20, 30).finished()));
}
