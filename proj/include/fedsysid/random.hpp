#pragma once

#include <cstdint>
#include <random>

#include "fedsysid/state_space.hpp"

namespace fedsysid {

using Rng = std::mt19937_64;

/// What a derived random stream is used for. The numeric values are part of
/// the sub-seed scheme and must not change, otherwise previously recorded
/// experiments stop being reproducible.
enum class SeedPurpose : std::uint64_t {
  kInitModel = 1,
  kTrainData = 2,
  kOutputNoise = 3,
  kPseudoInput = 4,
  kReferenceWorker = 5,
  kTestData = 6,
};

/// Counter-based sub-seed: a pure function of (master, purpose, worker,
/// round), built from nested splitmix64 finalizers. Streams never depend on
/// the order in which they are created.
std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose,
                          std::uint64_t worker = 0, std::uint64_t round = 0);

inline Rng make_rng(std::uint64_t master, SeedPurpose purpose,
                    std::uint64_t worker = 0, std::uint64_t round = 0) {
  return Rng(derive_seed(master, purpose, worker, round));
}

/// rows x cols matrix of i.i.d. Normal(0, stddev^2) draws, filled column by
/// column.
Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                       double stddev);

}  // namespace fedsysid
