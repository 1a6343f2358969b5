#include "fedsysid/random.hpp"

namespace fedsysid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose,
                          std::uint64_t worker, std::uint64_t round) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ worker);
  h = splitmix64(h ^ round);
  return h;
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                       double stddev) {
  Matrix m(rows, cols);
  if (stddev == 0.0) {
    m.setZero();
    return m;
  }
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

}  // namespace fedsysid
