#include "fedsysid/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "fedsysid/error.hpp"
#include "fedsysid/random.hpp"

namespace fedsysid {

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::kFedAvg: return "fedavg";
    case MethodKind::kFedAlignA: return "fedalign_a";
    case MethodKind::kFedAlignO: return "fedalign_o";
  }
  return "unknown";
}

MethodKind parse_method_kind(const std::string& text) {
  if (text == "fedavg") return MethodKind::kFedAvg;
  if (text == "fedalign_a") return MethodKind::kFedAlignA;
  if (text == "fedalign_o") return MethodKind::kFedAlignO;
  throw_error(ErrorCode::kConfig, "unknown method kind '" + text +
                                      "' (expected fedavg, fedalign_a or fedalign_o)");
}

void validate(const MethodSpec& method, int nx, int nu) {
  if (method.kind == MethodKind::kFedAlignA && nu > 1) {
    if (!method.mu) {
      throw_error(ErrorCode::kConfig, "fedalign_a with several inputs needs mu");
    }
    validate(*method.mu, nx, nu);
  }
  if (method.kind == MethodKind::kFedAlignO) {
    if (!method.pseudo) {
      throw_error(ErrorCode::kConfig, "fedalign_o needs pseudo-data settings");
    }
    const auto len = method.pseudo->inputs ? method.pseudo->inputs->cols()
                                           : method.pseudo->length;
    if (len < nx) {
      throw_error(ErrorCode::kConfig, "pseudo-data length must be at least nx");
    }
  }
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t n_threads =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

StateSpaceModel aggregate_fedavg(const std::vector<StateSpaceModel>& models) {
  require(!models.empty(), "aggregate_fedavg: no models");
  const auto& first = models.front();
  Matrix a = Matrix::Zero(first.nx(), first.nx());
  Matrix b = Matrix::Zero(first.nx(), first.nu());
  Matrix c = Matrix::Zero(first.ny(), first.nx());
  Matrix d = Matrix::Zero(first.ny(), first.nu());
  for (const auto& m : models) {
    require(m.same_dims(first), "aggregate_fedavg: models have different dimensions");
    a += m.A();
    b += m.B();
    c += m.C();
    d += m.D();
  }
  const double scale = 1.0 / static_cast<double>(models.size());
  return StateSpaceModel(a * scale, b * scale, c * scale, d * scale);
}

StateSpaceModel aggregate_aligned(const std::vector<StateSpaceModel>& models,
                                  const std::vector<AlignmentTransform>& transforms) {
  require(!models.empty(), "aggregate_aligned: no models");
  require(models.size() == transforms.size(),
          "aggregate_aligned: " + std::to_string(models.size()) + " models but " +
              std::to_string(transforms.size()) + " transforms");
  std::vector<StateSpaceModel> aligned;
  aligned.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    aligned.push_back(apply_similarity(models[i], transforms[i]));
  }
  return aggregate_fedavg(aligned);
}

std::vector<StateSpaceModel> redistribute(
    const StateSpaceModel& global,
    const std::vector<AlignmentTransform>& transforms) {
  std::vector<StateSpaceModel> out;
  out.reserve(transforms.size());
  for (const auto& t : transforms) out.push_back(apply_inverse_similarity(global, t));
  return out;
}

std::vector<AlignmentTransform> compute_transforms(
    const std::vector<StateSpaceModel>& models, const MethodSpec& method,
    const RoundContext& ctx) {
  require(!models.empty(), "compute_transforms: no models");
  const int nx = models.front().nx();
  switch (method.kind) {
    case MethodKind::kFedAvg:
      return std::vector<AlignmentTransform>(models.size(),
                                             AlignmentTransform::identity(nx));
    case MethodKind::kFedAlignA: {
      std::vector<AlignmentTransform> out(models.size());
      parallel_for(models.size(), ctx.threads, [&](std::size_t i) {
        out[i] = models[i].nu() == 1 && !method.mu
                     ? to_ccf_siso(models[i], ctx.kappa_limit)
                     : to_ccf_mimo(models[i], method.mu.value(), ctx.kappa_limit);
      });
      return out;
    }
    case MethodKind::kFedAlignO: {
      require(method.pseudo.has_value(), "fedalign_o needs pseudo-data settings");
      // Same stream every round: transforms track model drift only.
      Rng rng = make_rng(ctx.master_seed, SeedPurpose::kPseudoInput);
      return align_optimize(models, ctx.reference_worker, *method.pseudo, rng,
                            ctx.kappa_limit);
    }
  }
  throw_error(ErrorCode::kContractViolation, "unknown method kind");
}

RoundReport run_round(const FederationState& state, const MethodSpec& method,
                      const std::vector<TimeSeriesDataset>& datasets,
                      const PemSettings& settings, const RoundContext& ctx) {
  const std::size_t workers = state.local_models.size();
  require(workers > 0, "run_round: no workers");
  require(datasets.size() == workers,
          "run_round: " + std::to_string(datasets.size()) + " datasets for " +
              std::to_string(workers) + " workers");

  RoundReport report;
  std::vector<std::optional<LocalUpdateResult>> results(workers);
  parallel_for(workers, ctx.threads, [&](std::size_t i) {
    results[i] = local_update(state.local_models[i], datasets[i], settings);
  });
  for (auto& r : results) {
    report.updated_models.push_back(r->model);
    report.stalled.push_back(r->stalled);
  }

  report.state.round = state.round + 1;
  try {
    auto transforms = compute_transforms(report.updated_models, method, ctx);
    StateSpaceModel global = aggregate_aligned(report.updated_models, transforms);
    report.state.local_models = redistribute(global, transforms);
    report.state.global_model = std::move(global);
    report.state.transforms = std::move(transforms);
  } catch (const Error& e) {
    report.alignment_failed = true;
    report.failure_message = e.what();
    report.state.local_models = report.updated_models;
    report.state.global_model = state.global_model;
    report.state.transforms.reset();
  }
  return report;
}

std::size_t draw_reference_worker(std::uint64_t seed, int workers) {
  require(workers > 0, "draw_reference_worker: no workers");
  Rng rng = make_rng(seed, SeedPurpose::kReferenceWorker);
  std::uniform_int_distribution<int> pick(0, workers - 1);
  return static_cast<std::size_t>(pick(rng));
}

namespace {

void check_run_inputs(const FederatedRunSpec& spec,
                      const std::vector<WorkerData>& data) {
  if (spec.workers < 1) throw_error(ErrorCode::kConfig, "M must be at least 1");
  if (spec.rounds < 0) throw_error(ErrorCode::kConfig, "R must be nonnegative");
  if (spec.nx < 1) throw_error(ErrorCode::kConfig, "nx must be at least 1");
  if (data.size() != static_cast<std::size_t>(spec.workers)) {
    throw_error(ErrorCode::kConfig, std::to_string(data.size()) +
                                        " worker datasets for M = " +
                                        std::to_string(spec.workers));
  }
  const int nu = data.front().train.nu();
  const int ny = data.front().train.ny();
  for (const auto& w : data) {
    const bool test_ok =
        !w.test || (w.test->nu() == nu && w.test->ny() == ny &&
                    w.test->inputs.cols() == w.test->outputs.cols());
    if (w.train.nu() != nu || w.train.ny() != ny ||
        w.train.inputs.cols() != w.train.outputs.cols() || w.train.length() < 1 ||
        !test_ok) {
      throw_error(ErrorCode::kConfig,
                  "worker datasets disagree on channel counts or lengths");
    }
    if (w.test.has_value() != data.front().test.has_value()) {
      throw_error(ErrorCode::kConfig, "either every worker has test data or none");
    }
  }
  if (spec.initial_models) {
    if (spec.initial_models->size() != data.size()) {
      throw_error(ErrorCode::kConfig, "initial_models must list one model per worker");
    }
    for (const auto& m : *spec.initial_models) {
      if (m.nx() != spec.nx || m.nu() != nu || m.ny() != ny) {
        throw_error(ErrorCode::kConfig,
                    "initial model dimensions disagree with nx and the data");
      }
    }
  }
  try {
    validate(spec.method, spec.nx, nu);
    validate(spec.pem);
  } catch (const Error& e) {
    throw_error(ErrorCode::kConfig, e.what());
  }
}

bool all_stable(const std::vector<StateSpaceModel>& models) {
  return std::all_of(models.begin(), models.end(),
                     [](const StateSpaceModel& m) { return is_stable(m); });
}

RoundRecord evaluate_round(int round, const std::vector<StateSpaceModel>& models,
                           const std::vector<WorkerData>& data, int threads) {
  RoundRecord rec;
  rec.round = round;
  const std::size_t workers = models.size();
  rec.bfr_train.resize(workers);
  if (data.front().test) rec.bfr_test.resize(workers);
  rec.kappa.assign(workers, std::nullopt);
  rec.flags.assign(workers, WorkerFlags{});
  parallel_for(workers, threads, [&](std::size_t i) {
    rec.bfr_train[i] = worker_bfr(models[i], data[i].train);
    if (data[i].test) rec.bfr_test[i] = worker_bfr(models[i], *data[i].test);
  });
  for (std::size_t i = 0; i < workers; ++i) {
    auto non_finite = [](const std::vector<double>& v) {
      return std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); });
    };
    if (non_finite(rec.bfr_train[i]) || (!rec.bfr_test.empty() && non_finite(rec.bfr_test[i]))) {
      rec.flags[i].overflow = true;
    }
  }
  return rec;
}

}  // namespace

ExperimentRun run_federated(const FederatedRunSpec& spec,
                            const std::vector<WorkerData>& data, std::uint64_t seed) {
  check_run_inputs(spec, data);
  const int nu = data.front().train.nu();
  const int ny = data.front().train.ny();

  FederationState state;
  if (spec.initial_models) {
    state.local_models = *spec.initial_models;
  } else {
    for (int i = 0; i < spec.workers; ++i) {
      Rng rng = make_rng(seed, SeedPurpose::kInitModel, static_cast<std::uint64_t>(i));
      state.local_models.push_back(init_model(spec.nx, nu, ny, rng));
    }
  }

  RoundContext ctx;
  ctx.master_seed = seed;
  ctx.reference_worker = draw_reference_worker(seed, spec.workers);
  ctx.threads = spec.threads;
  ctx.kappa_limit = spec.kappa_limit;

  std::vector<TimeSeriesDataset> train;
  for (const auto& w : data) train.push_back(w.train);

  ExperimentRun run;
  run.initial = evaluate_round(0, state.local_models, data, spec.threads);
  // No global model exists yet; report whether every local model is stable.
  run.initial.global_stable = all_stable(state.local_models);
  for (const auto& m : state.local_models) {
    run.initial.local_eigenvalues.push_back(eigenvalues(m));
  }

  for (int r = 0; r < spec.rounds; ++r) {
    RoundReport report = run_round(state, spec.method, train, spec.pem, ctx);
    RoundRecord rec =
        evaluate_round(report.state.round, report.state.local_models, data, spec.threads);
    for (std::size_t i = 0; i < report.updated_models.size(); ++i) {
      rec.flags[i].stalled = report.stalled[i];
      rec.flags[i].alignment_failed = report.alignment_failed;
      rec.local_eigenvalues.push_back(eigenvalues(report.updated_models[i]));
      if (report.state.transforms) {
        const auto& t = (*report.state.transforms)[i];
        rec.kappa[i] = t.kappa;
        rec.flags[i].ill_conditioned = t.ill_conditioned;
      }
    }
    if (report.state.global_model) {
      rec.global_stable = is_stable(*report.state.global_model);
      rec.global_eigenvalues = eigenvalues(*report.state.global_model);
    } else {
      rec.global_stable = all_stable(report.state.local_models);
    }
    run.rounds.push_back(std::move(rec));
    state = std::move(report.state);
  }
  run.final_state = std::move(state);
  return run;
}

std::vector<RoundRecord> run_experiment(const FederatedRunSpec& spec,
                                        const std::vector<WorkerData>& data,
                                        std::uint64_t seed) {
  return run_federated(spec, data, seed).rounds;
}

}  // namespace fedsysid
