#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

#include "enkpf/types.hpp"

namespace enkpf {

using Rng = std::mt19937_64;

/// Counter-based seed derivation: mixes a master seed with a key path
/// (experiment, sweep point, algorithm, replicate, ...) through splitmix64,
/// so a stream depends only on its key and never on execution order.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> keys);

inline Rng make_stream(std::uint64_t master,
                       std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

/// Uniform draw on [0, 1).
double uniform01(Rng& rng);

/// rows x cols matrix of independent N(0, 1) draws, filled column-major.
Eigen::MatrixXd standard_normal(Index rows, Index cols, Rng& rng);

}  // namespace enkpf
