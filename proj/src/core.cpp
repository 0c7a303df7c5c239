#include "enkpf/core.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "enkpf/linalg.hpp"

namespace enkpf {

RingGrid::RingGrid(Index n_sites) : n_sites_(n_sites) {
  if (n_sites < 1) {
    throw ArgumentError("RingGrid: n_sites must be positive");
  }
}

Index RingGrid::distance(Index i, Index j) const {
  return periodic_distance(i, j, n_sites_);
}

void validate(const LinearGaussianObs& obs, Index n_sites) {
  const Index d = obs.y.size();
  if (obs.H.rows() != d || obs.H.cols() != n_sites) {
    throw ArgumentError("observation operator H has the wrong shape");
  }
  if (obs.R.rows() != d || obs.R.cols() != d) {
    throw ArgumentError("observation covariance R has the wrong shape");
  }
  if (static_cast<Index>(obs.obs_sites.size()) != d) {
    throw ArgumentError("need one observation site per observation row");
  }
  for (Index s : obs.obs_sites) {
    if (s < 0 || s >= n_sites) {
      throw ArgumentError("observation site outside the grid");
    }
  }
  if (!obs.y.allFinite() || !obs.H.allFinite()) {
    throw ArgumentError("observation contains non-finite values");
  }
  if (d == 0) {
    return;
  }
  if (!obs.R.isApprox(obs.R.transpose(), 1e-12)) {
    throw SingularityError("observation covariance R is not symmetric");
  }
  if (is_diagonal(obs.R)) {
    if ((obs.R.diagonal().array() <= 0.0).any()) {
      throw SingularityError("observation covariance R is not positive definite");
    }
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(obs.R);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("observation covariance R is not positive definite");
  }
}

LinearGaussianObs restrict_rows(const LinearGaussianObs& obs,
                                const IndexVector& rows) {
  const Index m = static_cast<Index>(rows.size());
  LinearGaussianObs out;
  out.y.resize(m);
  out.H.resize(m, obs.H.cols());
  out.R.resize(m, m);
  out.obs_sites.resize(rows.size());
  for (Index a = 0; a < m; ++a) {
    const Index ra = rows[static_cast<std::size_t>(a)];
    out.y(a) = obs.y(ra);
    out.H.row(a) = obs.H.row(ra);
    out.obs_sites[static_cast<std::size_t>(a)] =
        obs.obs_sites[static_cast<std::size_t>(ra)];
    for (Index b = 0; b < m; ++b) {
      out.R(a, b) = obs.R(ra, rows[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

LinearGaussianObs identity_observation(const Eigen::VectorXd& y,
                                       double noise_var) {
  const Index n = y.size();
  LinearGaussianObs obs;
  obs.y = y;
  obs.H = Eigen::MatrixXd::Identity(n, n);
  obs.R = noise_var * Eigen::MatrixXd::Identity(n, n);
  obs.obs_sites.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    obs.obs_sites[static_cast<std::size_t>(i)] = i;
  }
  return obs;
}

Eigen::VectorXd normalize_weights(const Eigen::VectorXd& w) {
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateWeightsError("weights have no finite positive mass");
  }
  return w / total;
}

Eigen::VectorXd weights_from_log(const Eigen::VectorXd& log_w) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < log_w.size(); ++i) {
    if (std::isnan(log_w(i))) {
      throw DegenerateWeightsError("log-weight is NaN");
    }
    max_log = std::max(max_log, log_w(i));
  }
  if (!std::isfinite(max_log)) {
    throw DegenerateWeightsError(
        "all log-likelihoods are -inf; observation is numerically impossible");
  }
  Eigen::VectorXd w = (log_w.array() - max_log).exp().matrix();
  return normalize_weights(w);
}

Eigen::MatrixXd taper_matrix(const IndexVector& sites, const RingGrid& grid,
                             double halfwidth) {
  const Index m = static_cast<Index>(sites.size());
  Eigen::MatrixXd t(m, m);
  for (Index a = 0; a < m; ++a) {
    t(a, a) = 1.0;
    for (Index b = a + 1; b < m; ++b) {
      const double d = static_cast<double>(grid.distance(
          sites[static_cast<std::size_t>(a)], sites[static_cast<std::size_t>(b)]));
      t(a, b) = t(b, a) = gc_taper(d, halfwidth);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) {
        return false;
      }
    }
  }
  return true;
}

CovarianceFactor::CovarianceFactor(const Eigen::MatrixXd& cov) : dim_(cov.rows()) {
  if (cov.rows() != cov.cols()) {
    throw ArgumentError("CovarianceFactor: matrix is not square");
  }
  if (enkpf::is_diagonal(cov)) {
    if ((cov.diagonal().array() < 0.0).any()) {
      throw SingularityError("CovarianceFactor: negative variance");
    }
    diagonal_ = true;
    sqrt_diag_ = cov.diagonal().cwiseSqrt();
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * cov.diagonal().mean();
    Eigen::MatrixXd bumped = 0.5 * (cov + cov.transpose());
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
    if (llt.info() != Eigen::Success) {
      throw SingularityError("CovarianceFactor: Cholesky failed after jitter");
    }
  }
  lower_ = llt.matrixL();
}

Eigen::MatrixXd CovarianceFactor::color(const Eigen::MatrixXd& z) const {
  if (diagonal_) {
    return sqrt_diag_.asDiagonal() * z;
  }
  return lower_.triangularView<Eigen::Lower>() * z;
}

Eigen::MatrixXd CovarianceFactor::whiten(const Eigen::MatrixXd& r) const {
  if (diagonal_) {
    if ((sqrt_diag_.array() <= 0.0).any()) {
      throw SingularityError("CovarianceFactor: cannot whiten with zero variance");
    }
    return sqrt_diag_.cwiseInverse().asDiagonal() * r;
  }
  return lower_.triangularView<Eigen::Lower>().solve(r);
}

Eigen::VectorXd CovarianceFactor::mahalanobis_sq(const Eigen::MatrixXd& r) const {
  return whiten(r).colwise().squaredNorm().transpose();
}

Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) {
    return llt.solve(b);
  }
  const Index d = s.rows();
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  const double jitter = d > 0 ? 1e-10 * std::abs(sym.trace()) / static_cast<double>(d) : 0.0;
  sym.diagonal().array() += jitter;
  llt.compute(sym);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("innovation matrix is not positive definite");
  }
  return llt.solve(b);
}

}  // namespace enkpf
