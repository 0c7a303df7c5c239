#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace enkpf {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Column i is particle i; rows are grid sites.
using Ensemble = Eigen::MatrixXd;
// Nonnegative, sums to one.
using WeightVector = Eigen::VectorXd;
using IndexVector = std::vector<Index>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateWeightsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step(step) {}
  std::size_t step;
};

struct FileError : std::runtime_error {
  FileError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path(std::move(path)) {}
  std::string path;
};

// ---------------------------------------------------------------------------
// Geometry and observations
// ---------------------------------------------------------------------------

/// One-dimensional periodic grid of n_sites points.
class RingGrid {
 public:
  explicit RingGrid(Index n_sites);

  Index size() const { return n_sites_; }
  Index distance(Index i, Index j) const;

 private:
  Index n_sites_;
};

/// Linear Gaussian likelihood y ~ N(Hx, R). Row r of H observes the grid
/// site obs_sites[r]; that site is what localization measures distance from.
struct LinearGaussianObs {
  Eigen::VectorXd y;
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;
  IndexVector obs_sites;

  Index dim() const { return y.size(); }
};

/// Throws ArgumentError on shape/site problems and SingularityError when R
/// is not symmetric positive definite.
void validate(const LinearGaussianObs& obs, Index n_sites);

/// Observation restricted to the given rows (in the order given).
LinearGaussianObs restrict_rows(const LinearGaussianObs& obs,
                                const IndexVector& rows);

/// H = I, R = noise_var * I, one observation per site.
LinearGaussianObs identity_observation(const Eigen::VectorXd& y,
                                       double noise_var = 1.0);

}  // namespace enkpf
