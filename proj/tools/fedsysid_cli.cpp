// Batch experiment runner: generate, run, compare.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "fedsysid/fedsysid.h"

namespace {

int report(fsi_status status) {
  if (status == FSI_OK) return 0;
  std::cerr << "error [" << fsi_status_name(status) << "]: " << fsi_last_error() << "\n";
  return status == FSI_ERR_CONFIG ? 2 : 1;
}

struct Shared {
  std::string config;
  std::string out;
  bool force = false;
  std::vector<std::uint64_t> seeds;
  int threads = 0;
  bool quiet = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(
        CLI::ExistingFile);
    cmd->add_option("--out", out, "Output directory (overrides output_dir)");
    cmd->add_flag("--force", force, "Overwrite existing outputs");
    cmd->add_option("--seeds", seeds, "Master seeds, replacing the config list")
        ->delimiter(',');
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", quiet, "No progress output");
  }

  fsi_command_options options() const {
    fsi_command_options o{};
    o.config_path = config.c_str();
    o.out_dir = out.empty() ? nullptr : out.c_str();
    o.force = force ? 1 : 0;
    o.seeds = seeds.empty() ? nullptr : seeds.data();
    o.seed_count = seeds.size();
    o.threads = threads;
    o.log_progress = quiet ? 0 : 1;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated system identification experiments"};
  app.set_version_flag("--version", fsi_version());
  app.require_subcommand(1);

  Shared gen_opts;
  auto* gen = app.add_subcommand("generate", "Write per-worker datasets and a manifest");
  gen_opts.attach(gen);

  Shared run_opts;
  auto* run = app.add_subcommand("run", "Run every seed and variant of a config");
  run_opts.attach(run);

  std::string results_a, results_b, compare_out;
  auto* cmp = app.add_subcommand("compare", "Rank-sum comparison of two results CSVs");
  cmp->add_option("results_a", results_a, "First results.csv")->required()->check(
      CLI::ExistingFile);
  cmp->add_option("results_b", results_b, "Second results.csv")->required()->check(
      CLI::ExistingFile);
  cmp->add_option("--out", compare_out, "Also write the report to this file");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const auto o = gen_opts.options();
    return report(fsi_cmd_generate(&o));
  }
  if (run->parsed()) {
    const auto o = run_opts.options();
    return report(fsi_cmd_run(&o));
  }
  char* text = nullptr;
  const fsi_status status = fsi_cmd_compare(results_a.c_str(), results_b.c_str(),
                                            compare_out.empty() ? nullptr : compare_out.c_str(),
                                            &text);
  if (status == FSI_OK) {
    std::cout << text << "\n";
    fsi_string_free(text);
  }
  return report(status);
}
