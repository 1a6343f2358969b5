#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedsysid/random.hpp"
#include "fedsysid/state_space.hpp"
#include "fedsysid/time_series.hpp"

namespace fedsysid {

/// Sampling parameters for one synthetic worker dataset:
///   x[1] ~ N(0, x1_std^2 I), u[k] ~ N(0, u_std^2 I),
///   x[k+1] = A x[k] + B u[k] + w[k],  w[k] ~ N(0, w_std^2 I),
///   y[k]   = C x[k] + D u[k] + v[k],  v[k] ~ N(0, v_std^2 I).
struct SyntheticSystemSpec {
  StateSpaceModel truth_model;
  Eigen::Index samples = 0;
  double x1_std = 0.0;
  double u_std = 0.0;
  double w_std = 0.0;
  double v_std = 0.0;
};

/// Throws kUnstableTruth for an unstable truth model and kContractViolation
/// for negative deviations or a zero sample count.
TimeSeriesDataset generate_worker_dataset(const SyntheticSystemSpec& spec, Rng& rng);

/// Shipped truth systems.
///
/// siso_truth_model(seed) draws three real poles in (0.3, 0.9) and one
/// transmission zero in (-0.5, 0.5) from `seed`, and realizes the unit-DC-gain
/// transfer function in controllable canonical form. Draws whose poles lie
/// closer than kSisoMinPoleGap to each other, or whose zero lies closer than
/// kSisoMinZeroGap to a pole, are redrawn. kSisoTruthSeed is the seed behind
/// the default synthetic experiments.
inline constexpr std::uint64_t kSisoTruthSeed = 7;
inline constexpr double kSisoMinPoleGap = 0.1;
inline constexpr double kSisoMinZeroGap = 0.3;
StateSpaceModel siso_truth_model(std::uint64_t seed = kSisoTruthSeed);

/// Fourth-order two-input two-output system where both inputs reach every
/// mode: any choice of mu gives a well-conditioned canonical transform.
StateSpaceModel mimo1_truth_model();

/// Fourth-order two-input two-output system whose second input barely
/// excites the slow mode pair. Canonical transforms built from the second
/// input alone (mu = (0, 4)) are badly conditioned.
StateSpaceModel mimo2_truth_model();

/// Half-open sample index range [begin, end).
struct IndexRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index length() const { return end - begin; }
};

struct SplitSpec {
  IndexRange train;
  IndexRange test;
};

/// Contiguous slice; throws kBounds when the range falls outside the data.
TimeSeriesDataset slice(const TimeSeriesDataset& data, IndexRange range);
std::pair<TimeSeriesDataset, TimeSeriesDataset> split(const TimeSeriesDataset& data,
                                                      const SplitSpec& spec);

/// Removes the per-channel mean of every input and output.
TimeSeriesDataset detrend(const TimeSeriesDataset& data);

/// Per-channel statistics, inputs first then outputs. Population std.
struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// (x - mean) / std per channel. Throws kDegenerateChannel on a
/// zero-variance channel.
std::pair<TimeSeriesDataset, NormalizationStats> normalize(const TimeSeriesDataset& data);
TimeSeriesDataset denormalize(const TimeSeriesDataset& data,
                              const NormalizationStats& stats);

nlohmann::json stats_to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const nlohmann::json& j);

/// Adds i.i.d. N(0, v_std[p]^2) noise to output channel p.
TimeSeriesDataset add_output_noise(const TimeSeriesDataset& data,
                                   const std::vector<double>& v_std, Rng& rng);

/// Comma-separated samples, inputs then outputs; an optional header line is
/// recognized by a non-numeric first field.
TimeSeriesDataset read_csv(std::istream& in, int nu, int ny);
TimeSeriesDataset load_csv(const std::filesystem::path& path, int nu, int ny);

/// Writes a header "u1,..,y1,.." followed by round-trip-exact samples.
void write_csv(std::ostream& out, const TimeSeriesDataset& data);
void save_csv(const std::filesystem::path& path, const TimeSeriesDataset& data);

}  // namespace fedsysid
