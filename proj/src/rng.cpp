#include "enkpf/rng.hpp"

namespace enkpf {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t key : keys) {
    h = splitmix64(h ^ splitmix64(key + 0x632be59bd9b4e019ULL));
  }
  return h;
}

double uniform01(Rng& rng) {
  // 53 random bits -> [0, 1) without the rounding-to-1 hazard of
  // generate_canonical.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::MatrixXd standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      z(i, j) = normal(rng);
    }
  }
  return z;
}

}  // namespace enkpf
