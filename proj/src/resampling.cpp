#include "enkpf/resampling.hpp"

namespace enkpf {

IndexVector systematic_resample(const WeightVector& w, Index k, double u) {
  if (!(u >= 0.0 && u < 1.0)) {
    throw ArgumentError("systematic_resample: offset u must lie in [0, 1)");
  }
  if (k < 1) {
    throw ArgumentError("systematic_resample: k must be positive");
  }
  const Index m = w.size();
  if (m < 1) {
    throw ArgumentError("systematic_resample: empty weight vector");
  }
  IndexVector idx(static_cast<std::size_t>(k));
  const double kd = static_cast<double>(k);
  // Work in units of k to keep point positions exact: point j sits at u + j
  // and particle i covers [k*C_{i-1}, k*C_i).
  long double upper = static_cast<long double>(kd * w(0));
  Index i = 0;
  for (Index j = 0; j < k; ++j) {
    const long double point = static_cast<long double>(u) + static_cast<long double>(j);
    while (point >= upper && i < m - 1) {
      ++i;
      upper += static_cast<long double>(kd * w(i));
    }
    idx[static_cast<std::size_t>(j)] = i;
  }
  return idx;
}

Ensemble select_columns(const Ensemble& e, const IndexVector& idx) {
  Ensemble out(e.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Index>(j)) = e.col(idx[j]);
  }
  return out;
}

Ensemble resample_ensemble(const Ensemble& e, const WeightVector& w, double u) {
  if (w.size() != e.cols()) {
    throw ArgumentError("resample_ensemble: one weight per particle required");
  }
  return select_columns(e, systematic_resample(w, e.cols(), u));
}

}  // namespace enkpf
