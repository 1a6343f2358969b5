#include "fedsysid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "fedsysid/error.hpp"
#include "fedsysid/json_io.hpp"

namespace fedsysid {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw_error(ErrorCode::kConfig, path + ": " + what);
}

// Typed access to one JSON object with field-path diagnostics.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_, "expected an object");
  }

  std::string path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const std::string& key) const {
    if (!has(key)) config_error(path(key), "missing required field");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) const {
    const json& v = at(key);
    try {
      check_kind<T>(v, key);
      return v.get<T>();
    } catch (const json::exception& e) {
      config_error(path(key), e.what());
    }
  }
  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  // Unknown keys are almost always typos; reject them.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) config_error(path(item.key()), "unknown field");
    }
  }

 private:
  template <typename T>
  void check_kind(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) config_error(path(key), "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) config_error(path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          config_error(path(key), "expected a nonnegative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) config_error(path(key), "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) config_error(path(key), "expected a string");
    }
  }

  const json& j_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

IndexRange parse_range(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer()) {
    config_error(path, "expected [begin, end]");
  }
  IndexRange r{j[0].get<Eigen::Index>(), j[1].get<Eigen::Index>()};
  if (r.begin < 0 || r.end <= r.begin) config_error(path, "empty or negative range");
  return r;
}

MethodSpec parse_method(const json& j, PseudoSource& source) {
  Fields f(j, "method");
  MethodSpec m;
  try {
    m.kind = parse_method_kind(f.get<std::string>("kind"));
  } catch (const Error& e) {
    config_error(f.path("kind"), e.what());
  }
  if (f.has("mu")) {
    MuSpec mu;
    try {
      mu.mu = f.at("mu").get<std::vector<int>>();
    } catch (const json::exception&) {
      config_error(f.path("mu"), "expected an array of integers");
    }
    m.mu = mu;
  }
  source = PseudoSource::kRandom;
  if (f.has("pseudo")) {
    Fields p(f.at("pseudo"), f.path("pseudo"));
    PseudoDataSpec spec;
    spec.length = p.get<Eigen::Index>("length", 0);
    spec.input_std = p.get<double>("input_std", 1.0);
    const auto src = p.get<std::string>("source", "random");
    if (src == "random") {
      source = PseudoSource::kRandom;
    } else if (src == "test_inputs") {
      source = PseudoSource::kTestInputs;
    } else {
      config_error(p.path("source"), "expected \"random\" or \"test_inputs\"");
    }
    p.finish();
    m.pseudo = spec;
  }
  f.finish();
  return m;
}

PemSettings parse_pem(const Fields& root, int iter) {
  PemSettings pem;
  pem.iterations = iter;
  if (!root.has("pem")) return pem;
  Fields f(root.at("pem"), "pem");
  pem.damping_init = f.get<double>("damping_init", pem.damping_init);
  pem.damping_scale = f.get<double>("damping_scale", pem.damping_scale);
  pem.min_step_decrease = f.get<double>("min_step_decrease", pem.min_step_decrease);
  pem.damping_max = f.get<double>("damping_max", pem.damping_max);
  f.finish();
  return pem;
}

DataConfig parse_data(const json& j, const std::filesystem::path& base) {
  Fields f(j, "data");
  DataConfig d;
  const auto source = f.get<std::string>("source");
  if (source == "synthetic") {
    d.source = DataSource::kSynthetic;
    auto& s = d.synthetic;
    s.truth = f.get<std::string>("truth", s.truth);
    s.truth_seed = f.get<std::uint64_t>("truth_seed", s.truth_seed);
    if (f.has("truth_model")) {
      try {
        s.truth_model = model_from_json(f.at("truth_model"));
      } catch (const Error& e) {
        config_error(f.path("truth_model"), e.what());
      }
    }
    s.train_samples = f.get<Eigen::Index>("train_samples", s.train_samples);
    s.test_samples = f.get<Eigen::Index>("test_samples", s.test_samples);
    s.x1_std = f.get<double>("x1_std", s.x1_std);
    s.u_std = f.get<double>("u_std", s.u_std);
    s.w_std = f.get<double>("w_std", s.w_std);
    s.v_std = f.get<double>("v_std", s.v_std);
  } else if (source == "csv") {
    d.source = DataSource::kCsv;
    auto& c = d.csv;
    const json& files = f.at("files");
    if (!files.is_array() || files.empty()) {
      config_error(f.path("files"), "expected a nonempty array of paths");
    }
    for (const auto& p : files) {
      if (!p.is_string()) config_error(f.path("files"), "expected paths");
      c.files.push_back(resolve(base, p.get<std::string>()));
    }
    c.nu = f.get<int>("nu");
    c.ny = f.get<int>("ny");
    c.detrend = f.get<bool>("detrend", false);
    c.normalize = f.get<bool>("normalize", false);
    Fields split(f.at("split"), f.path("split"));
    c.split.train = parse_range(split.at("train"), split.path("train"));
    c.split.test = parse_range(split.at("test"), split.path("test"));
    split.finish();
    if (f.has("train_noise_std")) {
      try {
        c.train_noise_std = f.at("train_noise_std").get<std::vector<double>>();
      } catch (const json::exception&) {
        config_error(f.path("train_noise_std"), "expected an array of numbers");
      }
    }
  } else if (source == "manifest") {
    d.source = DataSource::kManifest;
    d.manifest = resolve(base, f.get<std::string>("path"));
  } else {
    config_error(f.path("source"), "expected \"synthetic\", \"csv\" or \"manifest\"");
  }
  f.finish();
  return d;
}

const char* source_name(DataSource s) {
  switch (s) {
    case DataSource::kSynthetic: return "synthetic";
    case DataSource::kCsv: return "csv";
    case DataSource::kManifest: return "manifest";
  }
  return "?";
}

json range_to_json(IndexRange r) { return json::array({r.begin, r.end}); }

json data_to_json(const DataConfig& d) {
  json j;
  j["source"] = source_name(d.source);
  switch (d.source) {
    case DataSource::kSynthetic: {
      const auto& s = d.synthetic;
      j["truth"] = s.truth;
      j["truth_seed"] = s.truth_seed;
      if (s.truth_model) j["truth_model"] = model_to_json(*s.truth_model);
      j["train_samples"] = s.train_samples;
      j["test_samples"] = s.test_samples;
      j["x1_std"] = s.x1_std;
      j["u_std"] = s.u_std;
      j["w_std"] = s.w_std;
      j["v_std"] = s.v_std;
      break;
    }
    case DataSource::kCsv: {
      const auto& c = d.csv;
      j["files"] = json::array();
      for (const auto& p : c.files) j["files"].push_back(p.generic_string());
      j["nu"] = c.nu;
      j["ny"] = c.ny;
      j["detrend"] = c.detrend;
      j["normalize"] = c.normalize;
      j["split"] = {{"train", range_to_json(c.split.train)},
                    {"test", range_to_json(c.split.test)}};
      j["train_noise_std"] = c.train_noise_std;
      break;
    }
    case DataSource::kManifest:
      j["path"] = d.manifest.generic_string();
      break;
  }
  return j;
}

// Input/output counts implied by the data section, without loading data.
struct Channels {
  int nu = 0;
  int ny = 0;
};

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw_error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

Channels data_channels(const DataConfig& d) {
  switch (d.source) {
    case DataSource::kSynthetic: {
      const auto truth = synthetic_truth(d.synthetic);
      return {truth.nu(), truth.ny()};
    }
    case DataSource::kCsv:
      return {d.csv.nu, d.csv.ny};
    case DataSource::kManifest: {
      const json m = read_json_file(d.manifest);
      try {
        return {m.at("nu").get<int>(), m.at("ny").get<int>()};
      } catch (const json::exception& e) {
        throw_error(ErrorCode::kSchema, d.manifest.string() + ": " + e.what());
      }
    }
  }
  return {};
}

}  // namespace

StateSpaceModel synthetic_truth(const SyntheticDataConfig& config) {
  if (config.truth == "siso") return siso_truth_model(config.truth_seed);
  if (config.truth == "mimo1") return mimo1_truth_model();
  if (config.truth == "mimo2") return mimo2_truth_model();
  if (config.truth == "custom") {
    if (!config.truth_model) config_error("data.truth_model", "required for truth \"custom\"");
    return *config.truth_model;
  }
  config_error("data.truth", "expected \"siso\", \"mimo1\", \"mimo2\" or \"custom\"");
}

ExperimentConfig parse_experiment_config(const json& j,
                                         const std::filesystem::path& base_dir) {
  Fields f(j, "");
  ExperimentConfig c;
  c.name = f.get<std::string>("name", c.name);
  c.method = parse_method(f.at("method"), c.pseudo_source);
  c.workers = f.get<int>("workers");
  c.rounds = f.get<int>("rounds");
  const int iter = f.get<int>("iter");
  c.nx = f.get<int>("nx");
  {
    const json& seeds = f.at("seeds");
    if (!seeds.is_array()) config_error("seeds", "expected an array of integers");
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned()) config_error("seeds", "expected nonnegative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  c.pem = parse_pem(f, iter);
  c.kappa_limit = f.get<double>("kappa_limit", c.kappa_limit);
  c.threads = f.get<int>("threads", c.threads);
  c.data = parse_data(f.at("data"), base_dir);
  if (f.has("init")) {
    Fields init(f.at("init"), "init");
    const json& models = init.at("models");
    if (!models.is_array()) config_error("init.models", "expected an array of models");
    std::vector<StateSpaceModel> parsed;
    for (std::size_t i = 0; i < models.size(); ++i) {
      try {
        parsed.push_back(model_from_json(models[i]));
      } catch (const Error& e) {
        config_error("init.models[" + std::to_string(i) + "]", e.what());
      }
    }
    init.finish();
    c.initial_models = std::move(parsed);
  }
  c.output_dir = f.get<std::string>("output_dir", c.output_dir.string());
  f.has("variants");  // handled by parse_experiment_plan
  f.finish();
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.workers < 1) config_error("workers", "M (number of workers) must be at least 1");
  if (c.rounds < 0) config_error("rounds", "R (number of rounds) must be nonnegative");
  if (c.pem.iterations < 0) config_error("iter", "must be nonnegative");
  if (c.nx < 1) config_error("nx", "must be at least 1");
  if (c.seeds.empty()) config_error("seeds", "at least one seed is required");
  {
    std::set<std::uint64_t> unique(c.seeds.begin(), c.seeds.end());
    if (unique.size() != c.seeds.size()) config_error("seeds", "duplicate seed");
  }
  if (c.threads < 1) config_error("threads", "must be at least 1");
  if (!(c.kappa_limit > 1.0)) config_error("kappa_limit", "must exceed 1");
  try {
    validate(c.pem);
  } catch (const Error& e) {
    config_error("pem", e.what());
  }
  if (c.method.mu) {
    int sum = 0;
    for (int m : c.method.mu->mu) {
      if (m < 0) config_error("method.mu", "entries must be nonnegative");
      sum += m;
    }
    if (sum != c.nx) {
      config_error("method.mu", "entries sum to " + std::to_string(sum) +
                                    ", expected nx = " + std::to_string(c.nx));
    }
  }
  if (c.method.kind == MethodKind::kFedAlignO && !c.method.pseudo) {
    config_error("method.pseudo", "required for fedalign_o");
  }
  if (c.method.pseudo) {
    if (c.method.pseudo->length < 0) config_error("method.pseudo.length", "must be positive");
    if (c.method.pseudo->length > 0 && c.method.pseudo->length < c.nx) {
      config_error("method.pseudo.length", "must be at least nx");
    }
    if (!(c.method.pseudo->input_std > 0.0)) {
      config_error("method.pseudo.input_std", "must be positive");
    }
  }

  const auto& d = c.data;
  if (d.source == DataSource::kSynthetic) {
    const auto& s = d.synthetic;
    if (s.train_samples < 1) config_error("data.train_samples", "must be positive");
    if (s.test_samples < 0) config_error("data.test_samples", "must be nonnegative");
    if (s.x1_std < 0 || s.u_std < 0 || s.w_std < 0 || s.v_std < 0) {
      config_error("data", "noise deviations must be nonnegative");
    }
    if (s.truth == "custom" && !s.truth_model) {
      config_error("data.truth_model", "required for truth \"custom\"");
    }
    if (s.truth != "custom" && s.truth_model) {
      config_error("data.truth_model", "only allowed with truth \"custom\"");
    }
    (void)synthetic_truth(s);
  } else if (d.source == DataSource::kCsv) {
    const auto& csv = d.csv;
    if (csv.nu < 1 || csv.ny < 1) config_error("data", "nu and ny must be positive");
    if (csv.files.size() != 1 && csv.files.size() != static_cast<std::size_t>(c.workers)) {
      config_error("data.files", "expected one shared file or one file per worker (M = " +
                                     std::to_string(c.workers) + ")");
    }
    if (!csv.train_noise_std.empty() &&
        csv.train_noise_std.size() != static_cast<std::size_t>(csv.ny)) {
      config_error("data.train_noise_std", "expected one deviation per output");
    }
    for (double s : csv.train_noise_std) {
      if (s < 0) config_error("data.train_noise_std", "must be nonnegative");
    }
  }
  if (c.pseudo_source == PseudoSource::kTestInputs) {
    const bool no_test =
        d.source == DataSource::kSynthetic && d.synthetic.test_samples == 0;
    if (no_test) config_error("method.pseudo.source", "test_inputs needs a test split");
  }
  if (c.initial_models) {
    if (c.initial_models->size() != static_cast<std::size_t>(c.workers)) {
      config_error("init.models", "expected one model per worker (M = " +
                                      std::to_string(c.workers) + ")");
    }
    for (const auto& m : *c.initial_models) {
      if (m.nx() != c.nx) config_error("init.models", "model order differs from nx");
    }
  }
}

json config_to_json(const ExperimentConfig& c) {
  json method;
  method["kind"] = to_string(c.method.kind);
  method["mu"] = c.method.mu ? json(c.method.mu->mu) : json(nullptr);
  if (c.method.pseudo) {
    method["pseudo"] = {
        {"length", c.method.pseudo->length > 0 ? json(c.method.pseudo->length) : json(nullptr)},
        {"input_std", c.method.pseudo->input_std},
        {"source", c.pseudo_source == PseudoSource::kRandom ? "random" : "test_inputs"}};
  } else {
    method["pseudo"] = nullptr;
  }
  json j;
  j["name"] = c.name;
  j["method"] = method;
  j["workers"] = c.workers;
  j["rounds"] = c.rounds;
  j["iter"] = c.pem.iterations;
  j["nx"] = c.nx;
  j["seeds"] = c.seeds;
  j["pem"] = {{"damping_init", c.pem.damping_init},
              {"damping_scale", c.pem.damping_scale},
              {"min_step_decrease", c.pem.min_step_decrease},
              {"damping_max", c.pem.damping_max}};
  j["kappa_limit"] = c.kappa_limit;
  j["threads"] = c.threads;
  j["data"] = data_to_json(c.data);
  if (c.initial_models) {
    json models = json::array();
    for (const auto& m : *c.initial_models) models.push_back(model_to_json(m));
    j["init"] = {{"models", models}};
  } else {
    j["init"] = nullptr;
  }
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

ExperimentPlan parse_experiment_plan(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) config_error("", "expected a JSON object");
  ExperimentPlan plan;
  if (!j.contains("variants") || j.at("variants").is_null()) {
    plan.variants.push_back({"", parse_experiment_config(j, base_dir)});
    return plan;
  }
  const json& variants = j.at("variants");
  if (!variants.is_array() || variants.empty()) {
    config_error("variants", "expected a nonempty array");
  }
  json base = j;
  base.erase("variants");
  std::set<std::string> names;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string path = "variants[" + std::to_string(i) + "]";
    Fields v(variants[i], path);
    const auto name = v.get<std::string>("name");
    if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." ||
        name == "..") {
      config_error(v.path("name"), "must be a plain directory name");
    }
    if (!names.insert(name).second) config_error(v.path("name"), "duplicate variant name");
    json merged = base;
    if (v.has("patch")) merged.merge_patch(v.at("patch"));
    v.finish();
    try {
      plan.variants.push_back({name, parse_experiment_config(merged, base_dir)});
    } catch (const Error& e) {
      throw_error(e.code(), path + " (" + name + "): " + e.what());
    }
  }
  return plan;
}

ExperimentPlan load_experiment_plan(const std::filesystem::path& path) {
  return parse_experiment_plan(read_json_file(path), path.parent_path());
}

namespace {

PreparedData prepare_synthetic(const ExperimentConfig& c, std::uint64_t seed) {
  const auto& s = c.data.synthetic;
  const StateSpaceModel truth = synthetic_truth(s);
  PreparedData out;
  out.workers.resize(static_cast<std::size_t>(c.workers));
  parallel_for(out.workers.size(), c.threads, [&](std::size_t i) {
    SyntheticSystemSpec spec{truth, s.train_samples, s.x1_std, s.u_std, s.w_std, s.v_std};
    Rng train_rng = make_rng(seed, SeedPurpose::kTrainData, i);
    out.workers[i].train = generate_worker_dataset(spec, train_rng);
    if (s.test_samples > 0) {
      spec.samples = s.test_samples;
      Rng test_rng = make_rng(seed, SeedPurpose::kTestData, i);
      out.workers[i].test = generate_worker_dataset(spec, test_rng);
    }
  });
  return out;
}

PreparedData prepare_csv(const ExperimentConfig& c, std::uint64_t seed) {
  const auto& csv = c.data.csv;
  std::vector<TimeSeriesDataset> raw;
  std::optional<NormalizationStats> stats;
  for (const auto& path : csv.files) {
    TimeSeriesDataset d = load_csv(path, csv.nu, csv.ny);
    if (csv.detrend) d = detrend(d);
    if (csv.normalize) {
      auto [normalized, s] = normalize(d);
      d = std::move(normalized);
      if (!stats) stats = std::move(s);
    }
    raw.push_back(std::move(d));
  }
  PreparedData out;
  out.normalization = std::move(stats);
  for (int i = 0; i < c.workers; ++i) {
    const auto& series = raw[raw.size() == 1 ? 0 : static_cast<std::size_t>(i)];
    auto [train, test] = split(series, csv.split);
    if (!csv.train_noise_std.empty()) {
      Rng rng = make_rng(seed, SeedPurpose::kOutputNoise, static_cast<std::uint64_t>(i));
      train = add_output_noise(train, csv.train_noise_std, rng);
    }
    out.workers.push_back({std::move(train), std::move(test)});
  }
  return out;
}

PreparedData prepare_manifest(const ExperimentConfig& c, std::uint64_t seed) {
  const auto& path = c.data.manifest;
  const json m = read_json_file(path);
  const auto base = path.parent_path();
  PreparedData out;
  try {
    const int nu = m.at("nu").get<int>();
    const int ny = m.at("ny").get<int>();
    if (m.contains("normalization") && !m.at("normalization").is_null()) {
      out.normalization = stats_from_json(m.at("normalization"));
    }
    const json* entry = nullptr;
    for (const auto& s : m.at("seeds")) {
      if (s.at("seed").get<std::uint64_t>() == seed) entry = &s;
    }
    if (!entry) {
      throw_error(ErrorCode::kConfig, path.string() + ": no datasets for seed " +
                                          std::to_string(seed));
    }
    const json& workers = entry->at("workers");
    if (workers.size() != static_cast<std::size_t>(c.workers)) {
      throw_error(ErrorCode::kConfig,
                  path.string() + ": manifest has " + std::to_string(workers.size()) +
                      " workers, config expects M = " + std::to_string(c.workers));
    }
    for (const auto& w : workers) {
      WorkerData wd;
      wd.train = load_csv(resolve(base, w.at("train").get<std::string>()), nu, ny);
      if (w.contains("test") && !w.at("test").is_null()) {
        wd.test = load_csv(resolve(base, w.at("test").get<std::string>()), nu, ny);
      }
      out.workers.push_back(std::move(wd));
    }
  } catch (const json::exception& e) {
    throw_error(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
  switch (config.data.source) {
    case DataSource::kSynthetic: return prepare_synthetic(config, seed);
    case DataSource::kCsv: return prepare_csv(config, seed);
    case DataSource::kManifest: return prepare_manifest(config, seed);
  }
  return {};
}

FederatedRunSpec make_run_spec(const ExperimentConfig& c,
                               const std::vector<WorkerData>& data, std::uint64_t seed) {
  FederatedRunSpec spec;
  spec.method = c.method;
  spec.workers = c.workers;
  spec.rounds = c.rounds;
  spec.nx = c.nx;
  spec.pem = c.pem;
  spec.kappa_limit = c.kappa_limit;
  spec.threads = c.threads;
  spec.initial_models = c.initial_models;
  if (spec.method.pseudo) {
    auto& pseudo = *spec.method.pseudo;
    if (c.pseudo_source == PseudoSource::kTestInputs) {
      const auto ref = draw_reference_worker(seed, c.workers);
      if (!data.at(ref).test) {
        config_error("method.pseudo.source", "test_inputs needs a test split");
      }
      Matrix inputs = data[ref].test->inputs;
      if (pseudo.length > 0) {
        if (pseudo.length > inputs.cols()) {
          config_error("method.pseudo.length", "exceeds the test split length");
        }
        inputs = inputs.leftCols(pseudo.length).eval();
      }
      pseudo.length = inputs.cols();
      pseudo.inputs = std::move(inputs);
    } else if (pseudo.length == 0) {
      pseudo.length = data.front().train.length();
    }
  }
  const int nu = data.front().train.nu();
  try {
    validate(spec.method, c.nx, nu);
  } catch (const Error& e) {
    config_error("method", e.what());
  }
  return spec;
}

ExperimentResult run_config(const ExperimentConfig& config) {
  validate(config);
  const Channels ch = data_channels(config.data);
  MethodSpec early = config.method;
  // Length 0 stands for the training length, resolved per seed.
  if (early.pseudo && early.pseudo->length == 0) early.pseudo->length = config.nx;
  try {
    validate(early, config.nx, ch.nu);
  } catch (const Error& e) {
    config_error("method", e.what());
  }
  ExperimentResult result;
  for (std::uint64_t seed : config.seeds) {
    PreparedData data = prepare_data(config, seed);
    if (!result.normalization) result.normalization = data.normalization;
    const FederatedRunSpec spec = make_run_spec(config, data.workers, seed);
    ExperimentRun run = run_federated(spec, data.workers, seed);

    SeedResult sr;
    sr.records.seed = seed;
    sr.records.rounds.push_back(std::move(run.initial));
    for (auto& r : run.rounds) sr.records.rounds.push_back(std::move(r));
    for (const auto& m : run.final_state.local_models) {
      sr.final_local_eigenvalues.push_back(eigenvalues(m));
    }
    if (run.final_state.global_model) {
      sr.final_global_eigenvalues = eigenvalues(*run.final_state.global_model);
    }
    result.seeds.push_back(std::move(sr));
  }
  return result;
}

std::vector<SeedRecords> seed_records(const ExperimentResult& result) {
  std::vector<SeedRecords> out;
  for (const auto& s : result.seeds) out.push_back(s.records);
  return out;
}

namespace {

json number_or_text(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

json eigen_json(const std::vector<std::complex<double>>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back({number_or_text(v.real()), number_or_text(v.imag())});
  return out;
}

json doubles_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number_or_text(x));
  return out;
}

json channel_json(const std::vector<ChannelStats>& stats) {
  json out = json::array();
  for (const auto& s : stats) {
    out.push_back({{"mean", number_or_text(s.mean)},
                   {"dispersion", number_or_text(s.dispersion)},
                   {"count", s.count}});
  }
  return out;
}

}  // namespace

json summary_to_json(const ExperimentConfig& config, const ExperimentResult& result) {
  const ExperimentSummary s = summarize(seed_records(result));
  json j;
  j["name"] = config.name;
  j["method"] = to_string(config.method.kind);
  j["seeds"] = s.seeds;
  j["unstable"] = s.unstable;
  j["failed"] = s.failed;
  j["excluded"] = s.excluded;
  j["empty"] = s.empty;
  j["train"] = channel_json(s.train);
  j["test"] = channel_json(s.test);
  json kappa = json::array();
  for (const auto& k : s.kappa) {
    kappa.push_back({{"round", k.round},
                     {"count", k.count},
                     {"mean_log10", number_or_text(k.mean_log10)},
                     {"min_log10", number_or_text(k.min_log10)},
                     {"max_log10", number_or_text(k.max_log10)},
                     {"median_log10", number_or_text(k.median_log10)}});
  }
  j["kappa"] = kappa;

  json per_seed = json::array();
  for (const auto& o : s.outcomes) {
    const auto it = std::find_if(result.seeds.begin(), result.seeds.end(),
                                 [&](const SeedResult& r) { return r.records.seed == o.seed; });
    json entry = {{"seed", o.seed},
                  {"unstable", o.unstable},
                  {"failed", o.failed},
                  {"train_bfr", doubles_json(o.train_bfr)},
                  {"test_bfr", doubles_json(o.test_bfr)}};
    entry["global_eigenvalues"] =
        it->final_global_eigenvalues ? eigen_json(*it->final_global_eigenvalues) : json(nullptr);
    json locals = json::array();
    for (const auto& e : it->final_local_eigenvalues) locals.push_back(eigen_json(e));
    entry["local_eigenvalues"] = locals;
    const auto& last = it->records.rounds.back();
    json pre = json::array();
    for (const auto& e : last.local_eigenvalues) pre.push_back(eigen_json(e));
    entry["updated_local_eigenvalues"] = pre;
    per_seed.push_back(entry);
  }
  j["per_seed"] = per_seed;
  if (result.normalization) j["normalization"] = stats_to_json(*result.normalization);
  j["config"] = config_to_json(config);
  return j;
}

}  // namespace fedsysid
