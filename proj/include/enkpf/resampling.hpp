#pragma once

#include "enkpf/types.hpp"

namespace enkpf {

/// Systematic (balanced) resampling.
///
/// The k points (u + j) / k, j = 0..k-1, are located against the cumulative
/// weights. Index i is selected N_i times with floor(k w_i) <= N_i <=
/// ceil(k w_i), and the output is sorted ascending so that equal indices form
/// contiguous runs. The offset u is supplied by the caller, which lets the
/// local particle filter reuse one offset at every site.
IndexVector systematic_resample(const WeightVector& w, Index k, double u);

/// Column i of the result is column idx[i] of e, idx = systematic_resample.
Ensemble resample_ensemble(const Ensemble& e, const WeightVector& w, double u);

/// Column i of the result is column idx[i] of e.
Ensemble select_columns(const Ensemble& e, const IndexVector& idx);

}  // namespace enkpf
