#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsysid/dataset.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/metrics.hpp"

namespace fedsysid {

enum class DataSource { kSynthetic, kCsv, kManifest };

struct SyntheticDataConfig {
  // "siso", "mimo1", "mimo2" or "custom" (explicit model).
  std::string truth = "siso";
  std::uint64_t truth_seed = kSisoTruthSeed;  // siso only
  std::optional<StateSpaceModel> truth_model;  // custom only
  Eigen::Index train_samples = 1000;
  Eigen::Index test_samples = 1000;  // 0 disables the test split
  double x1_std = 0.1;
  double u_std = 0.1;
  double w_std = 0.003;
  double v_std = 0.0;
};

/// One recorded series shared by every worker, or one file per worker.
struct CsvDataConfig {
  std::vector<std::filesystem::path> files;
  int nu = 1;
  int ny = 1;
  bool detrend = false;
  bool normalize = false;
  SplitSpec split;
  // Per-output deviation of the noise each worker adds to its training
  // outputs; empty means no noise.
  std::vector<double> train_noise_std;
};

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  SyntheticDataConfig synthetic;
  CsvDataConfig csv;
  std::filesystem::path manifest;
};

/// Where fedalign_o takes its pseudo-inputs from.
enum class PseudoSource { kRandom, kTestInputs };

struct ExperimentConfig {
  std::string name = "experiment";
  MethodSpec method;
  PseudoSource pseudo_source = PseudoSource::kRandom;
  int workers = 1;  // M
  int rounds = 0;   // R
  int nx = 1;
  std::vector<std::uint64_t> seeds;
  PemSettings pem;  // pem.iterations is iter
  double kappa_limit = kDefaultKappaLimit;
  int threads = 1;
  DataConfig data;
  std::optional<std::vector<StateSpaceModel>> initial_models;
  std::filesystem::path output_dir = "results";
};

/// A config file after variant expansion: the runs to execute, in file order.
struct ExperimentPlan {
  struct Variant {
    std::string name;  // empty for a config without "variants"
    ExperimentConfig config;
  };
  std::vector<Variant> variants;
};

/// Parses and validates one experiment object. Relative data paths are
/// resolved against `base_dir`. Throws kConfig with a field path on invalid
/// input.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});

/// Canonical form: every field explicit, paths as given after resolution.
/// parse_experiment_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Expands "variants": each entry {"name": ..., "patch": {...}} is applied to
/// the base object as a JSON merge patch.
ExperimentPlan parse_experiment_plan(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir = {});
ExperimentPlan load_experiment_plan(const std::filesystem::path& path);

void validate(const ExperimentConfig& config);

/// Datasets of every worker for one seed.
struct PreparedData {
  std::vector<WorkerData> workers;
  std::optional<NormalizationStats> normalization;
};

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed);

/// The truth model of a synthetic config.
StateSpaceModel synthetic_truth(const SyntheticDataConfig& config);

/// Federated run spec of one seed, including pseudo-inputs taken from the
/// test split when requested.
FederatedRunSpec make_run_spec(const ExperimentConfig& config,
                               const std::vector<WorkerData>& data,
                               std::uint64_t seed);

struct SeedResult {
  SeedRecords records;  // round 0 (initialization) followed by rounds 1..R
  std::vector<std::vector<std::complex<double>>> final_local_eigenvalues;
  std::optional<std::vector<std::complex<double>>> final_global_eigenvalues;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::optional<NormalizationStats> normalization;
};

ExperimentResult run_config(const ExperimentConfig& config);

std::vector<SeedRecords> seed_records(const ExperimentResult& result);

/// Summary JSON: counts, per-output statistics, per-round kappa statistics
/// and per-seed outcomes, followed by the canonical config.
nlohmann::json summary_to_json(const ExperimentConfig& config,
                               const ExperimentResult& result);

}  // namespace fedsysid
