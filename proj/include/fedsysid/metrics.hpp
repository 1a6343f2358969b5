#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsysid/state_space.hpp"
#include "fedsysid/time_series.hpp"

namespace fedsysid {

/// Best fit rate 100 (1 - ||y - y_hat|| / ||y - mean(y)||). Throws
/// kUndefinedBfr when `actual` is constant.
double bfr(std::span<const double> actual, std::span<const double> predicted);

/// Per-output BFR of a free-run simulation from the zero state. Every entry
/// is -inf if the simulation overflows.
std::vector<double> worker_bfr(const StateSpaceModel& model,
                               const TimeSeriesDataset& data);

struct WorkerFlags {
  bool alignment_failed = false;
  bool overflow = false;
  bool stalled = false;
  bool ill_conditioned = false;

  std::string to_string() const;  // "ok" or '|'-joined flag names
  static WorkerFlags parse(const std::string& text);
};

enum class Split { kTrain, kTest };
const char* to_string(Split split);

/// Metrics for one communication round of one seed. Round 0 describes the
/// initial local models.
struct RoundRecord {
  int round = 0;
  std::vector<std::vector<double>> bfr_train;  // [worker][output]
  std::vector<std::vector<double>> bfr_test;   // empty without test data
  bool global_stable = false;
  std::vector<std::optional<double>> kappa;    // [worker]
  std::vector<WorkerFlags> flags;              // [worker]
  // Not part of the results CSV.
  std::vector<std::complex<double>> global_eigenvalues;
  std::vector<std::vector<std::complex<double>>> local_eigenvalues;

  const std::vector<std::vector<double>>& bfr(Split split) const {
    return split == Split::kTrain ? bfr_train : bfr_test;
  }
};

struct SeedRecords {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
};

enum class ExclusionPolicy { kExcludeUnstableAndFailed, kIncludeAll };

/// Final-round view of one seed.
struct SeedOutcome {
  std::uint64_t seed = 0;
  bool unstable = false;  // final global model unstable (#UM)
  bool failed = false;    // some output's worker-mean train BFR < 0 (#F2L)
  std::vector<double> train_bfr;  // per output, mean over workers
  std::vector<double> test_bfr;   // empty without test data
};

SeedOutcome seed_outcome(const SeedRecords& records);

struct ChannelStats {
  double mean = 0.0;
  // Sample standard deviation across seeds (divisor n - 1); 0 for n = 1.
  double dispersion = 0.0;
  std::size_t count = 0;
};

struct KappaRoundStats {
  int round = 0;
  std::size_t count = 0;
  double mean_log10 = 0.0;
  double min_log10 = 0.0;
  double max_log10 = 0.0;
  double median_log10 = 0.0;
};

struct ExperimentSummary {
  std::size_t seeds = 0;
  std::size_t unstable = 0;
  std::size_t failed = 0;
  std::vector<std::uint64_t> excluded;  // sorted
  bool empty = false;                    // every seed excluded
  std::vector<ChannelStats> train;       // per output
  std::vector<ChannelStats> test;        // per output
  std::vector<KappaRoundStats> kappa;    // rounds with at least one kappa
  std::vector<SeedOutcome> outcomes;     // sorted by seed
};

/// Aggregates per-seed records. Invariant under permutation of `runs`.
ExperimentSummary summarize(const std::vector<SeedRecords>& runs,
                            ExclusionPolicy policy =
                                ExclusionPolicy::kExcludeUnstableAndFailed);

/// Per-seed final-round score on `split`, averaged over workers and output
/// channels, after applying the exclusion policy. Sorted by seed.
std::vector<double> seed_scores(const std::vector<SeedRecords>& runs,
                                Split split, ExclusionPolicy policy);

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value. Exact null
/// distribution when n_a + n_b <= 12 and there are no ties; otherwise the
/// normal approximation with tie and continuity corrections.
double ranksum_test(std::span<const double> a, std::span<const double> b);

/// Exact two-sided p-value from the Mann-Whitney U distribution.
double ranksum_exact(std::span<const double> a, std::span<const double> b);
/// Normal-approximation two-sided p-value.
double ranksum_normal(std::span<const double> a, std::span<const double> b);

// Results CSV: seed,round,worker,split,output_index,bfr,kappa,global_stable,flag
inline constexpr const char* kResultsHeader =
    "seed,round,worker,split,output_index,bfr,kappa,global_stable,flag";

void write_results_csv(std::ostream& out, const std::vector<SeedRecords>& runs);
std::vector<SeedRecords> read_results_csv(std::istream& in);

/// Round-trip-exact decimal text for a double ("%.17g"; "inf"/"-inf"/"nan").
std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace fedsysid
