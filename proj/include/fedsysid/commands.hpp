#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fedsysid/experiment.hpp"
#include "fedsysid/metrics.hpp"

namespace fedsysid {

/// Shared by generate and run. Overrides replace the matching config field
/// of every variant.
struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // default: config output_dir
  bool force = false;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> threads;
};

/// Loads the plan and applies the overrides, revalidating each variant.
ExperimentPlan load_plan(const CommandOptions& options);

/// Writes seed_<s>/worker_<ii>_{train,test}.csv, truth_model.json (synthetic
/// data) and manifest.json under the output directory. A plan whose variants
/// disagree on data settings gets one subdirectory per variant. Refuses to
/// write into an existing manifest location unless options.force.
/// Returns the manifest paths written.
std::vector<std::filesystem::path> cmd_generate(const CommandOptions& options,
                                                std::ostream* log = nullptr);

/// Runs every variant and writes results.csv and summary.json (plus
/// normalization.json for normalized CSV data) to the output directory, or
/// to <out>/<variant>/ for plans with variants. UM and F2L seeds are results
/// and do not raise. Returns the result directories.
std::vector<std::filesystem::path> cmd_run(const CommandOptions& options,
                                           std::ostream* log = nullptr);

/// Rank-sum comparison of two result sets on channel-averaged final-round
/// BFR per seed, unstable and failed seeds excluded. Throws kSchema when the
/// output structures differ and kEmptySummary when a side has no surviving
/// seed.
nlohmann::json compare_results(const std::vector<SeedRecords>& a,
                               const std::vector<SeedRecords>& b);

/// compare_results on two results CSV files; the report also names the
/// files. Writes the report to `out` when given.
nlohmann::json cmd_compare(const std::filesystem::path& results_a,
                           const std::filesystem::path& results_b,
                           const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace fedsysid
