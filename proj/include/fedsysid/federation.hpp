#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedsysid/alignment.hpp"
#include "fedsysid/metrics.hpp"
#include "fedsysid/pem.hpp"
#include "fedsysid/state_space.hpp"
#include "fedsysid/time_series.hpp"

namespace fedsysid {

enum class MethodKind { kFedAvg, kFedAlignA, kFedAlignO };

const char* to_string(MethodKind kind);
MethodKind parse_method_kind(const std::string& text);

struct MethodSpec {
  MethodKind kind = MethodKind::kFedAvg;
  std::optional<MuSpec> mu;              // fedalign_a with nu > 1
  std::optional<PseudoDataSpec> pseudo;  // fedalign_o
};

void validate(const MethodSpec& method, int nx, int nu);

struct FederationState {
  int round = 0;
  std::vector<StateSpaceModel> local_models;
  std::optional<StateSpaceModel> global_model;
  std::optional<std::vector<AlignmentTransform>> transforms;
};

/// Uniform entrywise mean of A, B, C and D.
StateSpaceModel aggregate_fedavg(const std::vector<StateSpaceModel>& models);

/// Mean of the models after moving each into the common basin with
/// apply_similarity(models[i], transforms[i]).
StateSpaceModel aggregate_aligned(const std::vector<StateSpaceModel>& models,
                                  const std::vector<AlignmentTransform>& transforms);

/// The global model expressed in every worker's own basin.
std::vector<StateSpaceModel> redistribute(
    const StateSpaceModel& global,
    const std::vector<AlignmentTransform>& transforms);

/// Server-side settings shared by every round of a run.
struct RoundContext {
  std::uint64_t master_seed = 0;
  std::size_t reference_worker = 0;  // fedalign_o basin owner, 0-based
  int threads = 1;
  double kappa_limit = kDefaultKappaLimit;
};

/// Alignment transforms for the given local models under `method`.
/// Throws on alignment failure.
std::vector<AlignmentTransform> compute_transforms(
    const std::vector<StateSpaceModel>& models, const MethodSpec& method,
    const RoundContext& ctx);

struct RoundReport {
  FederationState state;                       // after the round
  std::vector<StateSpaceModel> updated_models;  // after local update
  std::vector<bool> stalled;
  bool alignment_failed = false;
  std::string failure_message;
};

/// One communication round: local update on every worker, alignment,
/// aggregation and redistribution. If the alignment step fails the
/// aggregation is skipped and the updated local models are carried over.
RoundReport run_round(const FederationState& state, const MethodSpec& method,
                      const std::vector<TimeSeriesDataset>& datasets,
                      const PemSettings& settings, const RoundContext& ctx);

struct WorkerData {
  TimeSeriesDataset train;
  std::optional<TimeSeriesDataset> test;
};

struct FederatedRunSpec {
  MethodSpec method;
  int workers = 1;
  int rounds = 0;
  int nx = 1;
  PemSettings pem;
  double kappa_limit = kDefaultKappaLimit;
  int threads = 1;
  // Replaces the random initialization when present (one per worker).
  std::optional<std::vector<StateSpaceModel>> initial_models;
};

/// Reference worker for fedalign_o, drawn once per run from the seed.
std::size_t draw_reference_worker(std::uint64_t seed, int workers);

struct ExperimentRun {
  RoundRecord initial;              // round 0, the initialized local models
  std::vector<RoundRecord> rounds;  // rounds 1..R
  FederationState final_state;
};

/// Initializes the workers and runs `spec.rounds` rounds.
ExperimentRun run_federated(const FederatedRunSpec& spec,
                            const std::vector<WorkerData>& data, std::uint64_t seed);

/// One record per round; empty when spec.rounds == 0.
std::vector<RoundRecord> run_experiment(const FederatedRunSpec& spec,
                                        const std::vector<WorkerData>& data,
                                        std::uint64_t seed);

/// Calls fn(i) for i in [0, count) on up to `threads` threads.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fedsysid
