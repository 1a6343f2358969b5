#include "fedsysid/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedsysid/error.hpp"
#include "fedsysid/json_io.hpp"

namespace fedsysid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw_error(ErrorCode::kIo, "cannot create " + path.parent_path().string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw_error(ErrorCode::kIo, "cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void refuse_existing(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw_error(ErrorCode::kIo, path.string() + " already exists; pass --force to overwrite");
  }
}

void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

std::string worker_file(std::size_t worker, const char* split) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "worker_%02zu_%s.csv", worker + 1, split);
  return buf;
}

fs::path output_root(const CommandOptions& options, const ExperimentConfig& first) {
  return options.out ? *options.out : first.output_dir;
}

json data_key(const ExperimentConfig& c) {
  json j = config_to_json(c);
  return {j["data"], j["workers"], j["seeds"]};
}

}  // namespace

ExperimentPlan load_plan(const CommandOptions& options) {
  ExperimentPlan plan = load_experiment_plan(options.config);
  for (auto& v : plan.variants) {
    if (options.seeds) v.config.seeds = *options.seeds;
    if (options.threads) v.config.threads = *options.threads;
    try {
      validate(v.config);
    } catch (const Error& e) {
      if (v.name.empty()) throw;
      throw_error(e.code(), "variant " + v.name + ": " + e.what());
    }
  }
  return plan;
}

namespace {

fs::path generate_one(const ExperimentConfig& c, const fs::path& dir, bool force,
                      std::ostream* log) {
  if (c.data.source == DataSource::kManifest) {
    throw_error(ErrorCode::kConfig, "data.source: already a generated manifest");
  }
  const fs::path manifest_path = dir / "manifest.json";
  refuse_existing(manifest_path, force);

  int nu = 0;
  int ny = 0;
  json manifest;
  manifest["format"] = "fedsysid-manifest";
  manifest["workers"] = c.workers;
  json seeds = json::array();
  std::optional<NormalizationStats> normalization;
  for (std::uint64_t seed : c.seeds) {
    const PreparedData data = prepare_data(c, seed);
    if (!normalization) normalization = data.normalization;
    const fs::path seed_dir = fs::path("seed_" + std::to_string(seed));
    json workers = json::array();
    for (std::size_t i = 0; i < data.workers.size(); ++i) {
      const WorkerData& w = data.workers[i];
      nu = w.train.nu();
      ny = w.train.ny();
      const fs::path train = seed_dir / worker_file(i, "train");
      std::ostringstream text;
      write_csv(text, w.train);
      write_text(dir / train, text.str());
      json entry = {{"train", train.generic_string()}, {"test", nullptr}};
      if (w.test) {
        const fs::path test = seed_dir / worker_file(i, "test");
        std::ostringstream t;
        write_csv(t, *w.test);
        write_text(dir / test, t.str());
        entry["test"] = test.generic_string();
      }
      workers.push_back(entry);
    }
    seeds.push_back({{"seed", seed}, {"workers", workers}});
    say(log, "generated seed " + std::to_string(seed) + " (" +
                 std::to_string(data.workers.size()) + " workers)");
  }
  manifest["nu"] = nu;
  manifest["ny"] = ny;
  manifest["seeds"] = seeds;
  if (c.data.source == DataSource::kSynthetic) {
    write_json(dir / "truth_model.json", model_to_json(synthetic_truth(c.data.synthetic)));
    manifest["truth_model"] = "truth_model.json";
  } else {
    manifest["truth_model"] = nullptr;
  }
  manifest["normalization"] = normalization ? stats_to_json(*normalization) : json(nullptr);
  manifest["config"] = config_to_json(c);
  write_json(manifest_path, manifest);
  return manifest_path;
}

}  // namespace

std::vector<fs::path> cmd_generate(const CommandOptions& options, std::ostream* log) {
  const ExperimentPlan plan = load_plan(options);
  const fs::path root = output_root(options, plan.variants.front().config);
  bool shared = true;
  for (const auto& v : plan.variants) {
    shared = shared && data_key(v.config) == data_key(plan.variants.front().config);
  }
  std::vector<fs::path> written;
  if (shared) {
    written.push_back(generate_one(plan.variants.front().config, root, options.force, log));
  } else {
    for (const auto& v : plan.variants) {
      written.push_back(generate_one(v.config, root / v.name, options.force, log));
    }
  }
  return written;
}

std::vector<fs::path> cmd_run(const CommandOptions& options, std::ostream* log) {
  const ExperimentPlan plan = load_plan(options);
  const fs::path root = output_root(options, plan.variants.front().config);
  std::vector<fs::path> dirs;
  for (const auto& v : plan.variants) {
    dirs.push_back(v.name.empty() ? root : root / v.name);
    refuse_existing(dirs.back() / "results.csv", options.force);
  }
  for (std::size_t i = 0; i < plan.variants.size(); ++i) {
    const auto& [name, config] = plan.variants[i];
    say(log, "running " + (name.empty() ? config.name : name) + " (" +
                 to_string(config.method.kind) + ", " +
                 std::to_string(config.seeds.size()) + " seeds)");
    const ExperimentResult result = run_config(config);

    std::ostringstream csv;
    write_results_csv(csv, seed_records(result));
    write_text(dirs[i] / "results.csv", csv.str());
    const json summary = summary_to_json(config, result);
    write_json(dirs[i] / "summary.json", summary);
    if (result.normalization) {
      write_json(dirs[i] / "normalization.json", stats_to_json(*result.normalization));
    }
    say(log, "  UM " + std::to_string(summary["unstable"].get<std::size_t>()) + ", F2L " +
                 std::to_string(summary["failed"].get<std::size_t>()) + " -> " +
                 dirs[i].string());
  }
  return dirs;
}

namespace {

struct Structure {
  std::size_t outputs = 0;
  bool has_test = false;
};

Structure structure_of(const std::vector<SeedRecords>& runs, const char* label) {
  std::optional<Structure> s;
  for (const auto& r : runs) {
    if (r.rounds.empty()) continue;
    const RoundRecord& last = r.rounds.back();
    if (last.bfr_train.empty()) continue;
    Structure here{last.bfr_train.front().size(), !last.bfr_test.empty()};
    if (s && (s->outputs != here.outputs || s->has_test != here.has_test)) {
      throw_error(ErrorCode::kSchema,
                  std::string(label) + ": seeds disagree on the output structure");
    }
    s = here;
  }
  if (!s) throw_error(ErrorCode::kEmptySummary, std::string(label) + ": no seeds");
  return *s;
}

json describe(const std::vector<double>& scores) {
  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : scores) ss += (x - mean) * (x - mean);
  return {{"n", scores.size()},
          {"mean", mean},
          {"std", scores.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0},
          {"scores", scores}};
}

}  // namespace

json compare_results(const std::vector<SeedRecords>& a, const std::vector<SeedRecords>& b) {
  const Structure sa = structure_of(a, "first results");
  const Structure sb = structure_of(b, "second results");
  if (sa.outputs != sb.outputs) {
    throw_error(ErrorCode::kSchema, "results differ in output count (" +
                                        std::to_string(sa.outputs) + " vs " +
                                        std::to_string(sb.outputs) + ")");
  }
  if (sa.has_test != sb.has_test) {
    throw_error(ErrorCode::kSchema, "only one of the results has a test split");
  }
  const auto policy = ExclusionPolicy::kExcludeUnstableAndFailed;
  json splits = json::array();
  std::vector<Split> which{Split::kTrain};
  if (sa.has_test) which.push_back(Split::kTest);
  for (Split split : which) {
    const auto xa = seed_scores(a, split, policy);
    const auto xb = seed_scores(b, split, policy);
    if (xa.empty() || xb.empty()) {
      throw_error(ErrorCode::kEmptySummary,
                  std::string("no surviving seeds on the ") + to_string(split) + " split in " +
                      (xa.empty() ? "the first" : "the second") + " results");
    }
    splits.push_back({{"split", to_string(split)},
                      {"a", describe(xa)},
                      {"b", describe(xb)},
                      {"p_value", ranksum_test(xa, xb)}});
  }
  json report;
  report["outputs"] = sa.outputs;
  report["policy"] = "exclude_unstable_and_failed";
  report["test"] = "wilcoxon_rank_sum_two_sided";
  report["splits"] = splits;
  return report;
}

json cmd_compare(const fs::path& results_a, const fs::path& results_b,
                 const std::optional<fs::path>& out) {
  auto load = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw_error(ErrorCode::kIo, "cannot open " + p.string());
    try {
      return read_results_csv(in);
    } catch (const Error& e) {
      throw_error(e.code(), p.string() + ": " + e.what());
    }
  };
  json report = compare_results(load(results_a), load(results_b));
  report["a_file"] = results_a.generic_string();
  report["b_file"] = results_b.generic_string();
  if (out) write_json(*out, report);
  return report;
}

}  // namespace fedsysid
