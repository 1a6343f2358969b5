#include "fedsysid/fedsysid.h"

#include <algorithm>
#include <cstring>
#include <iostream>
#include <new>
#include <string>

#include "fedsysid/alignment.hpp"
#include "fedsysid/commands.hpp"
#include "fedsysid/error.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/json_io.hpp"
#include "fedsysid/metrics.hpp"
#include "fedsysid/pem.hpp"
#include "fedsysid/state_space.hpp"

struct fsi_model {
  fedsysid::StateSpaceModel model;
};

struct fsi_transform {
  fedsysid::AlignmentTransform transform;
};

namespace {

using fedsysid::ErrorCode;
using fedsysid::Matrix;

thread_local std::string last_error;

struct NullArgument {
  const char* name;
};

fsi_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContractViolation: return FSI_ERR_CONTRACT;
    case ErrorCode::kOverflow: return FSI_ERR_OVERFLOW;
    case ErrorCode::kSingularTransform: return FSI_ERR_SINGULAR_TRANSFORM;
    case ErrorCode::kUncontrollableModel: return FSI_ERR_UNCONTROLLABLE;
    case ErrorCode::kInvalidMu: return FSI_ERR_INVALID_MU;
    case ErrorCode::kDegeneratePseudoData: return FSI_ERR_DEGENERATE_PSEUDO_DATA;
    case ErrorCode::kNumeric: return FSI_ERR_NUMERIC;
    case ErrorCode::kUndefinedBfr: return FSI_ERR_UNDEFINED_BFR;
    case ErrorCode::kDegenerateChannel: return FSI_ERR_DEGENERATE_CHANNEL;
    case ErrorCode::kParse: return FSI_ERR_PARSE;
    case ErrorCode::kSchema: return FSI_ERR_SCHEMA;
    case ErrorCode::kBounds: return FSI_ERR_BOUNDS;
    case ErrorCode::kIo: return FSI_ERR_IO;
    case ErrorCode::kConfig: return FSI_ERR_CONFIG;
    case ErrorCode::kEmptySummary: return FSI_ERR_EMPTY_SUMMARY;
    case ErrorCode::kUnstableTruth: return FSI_ERR_UNSTABLE_TRUTH;
  }
  return FSI_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
fsi_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return FSI_OK;
  } catch (const NullArgument& e) {
    last_error = std::string("null argument: ") + e.name;
    return FSI_ERR_NULL_ARGUMENT;
  } catch (const fedsysid::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return FSI_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FSI_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return FSI_ERR_INTERNAL;
  }
}

template <typename T>
void need(const T* p, const char* name) {
  if (!p) throw NullArgument{name};
}

Matrix read_row_major(const double* data, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[i * cols + j];
  }
  return m;
}

void write_row_major(const Matrix& m, double* out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

fsi_model* wrap(fedsysid::StateSpaceModel m) { return new fsi_model{std::move(m)}; }

std::vector<fedsysid::StateSpaceModel> unwrap(const fsi_model* const* models,
                                              std::size_t count) {
  need(models, "models");
  fedsysid::require(count > 0, "at least one model is required");
  std::vector<fedsysid::StateSpaceModel> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    need(models[i], "models[i]");
    out.push_back(models[i]->model);
  }
  return out;
}

fedsysid::CommandOptions command_options(const fsi_command_options* o) {
  need(o, "options");
  need(o->config_path, "options->config_path");
  fedsysid::CommandOptions c;
  c.config = o->config_path;
  if (o->out_dir) c.out = std::filesystem::path(o->out_dir);
  c.force = o->force != 0;
  if (o->seed_count > 0) {
    need(o->seeds, "options->seeds");
    c.seeds = std::vector<std::uint64_t>(o->seeds, o->seeds + o->seed_count);
  }
  if (o->threads > 0) c.threads = o->threads;
  return c;
}

}  // namespace

extern "C" {

const char* fsi_version(void) { return "1.0.0"; }

const char* fsi_last_error(void) { return last_error.c_str(); }

const char* fsi_status_name(fsi_status status) {
  switch (status) {
    case FSI_OK: return "ok";
    case FSI_ERR_CONTRACT: return "contract_violation";
    case FSI_ERR_OVERFLOW: return "overflow";
    case FSI_ERR_SINGULAR_TRANSFORM: return "singular_transform";
    case FSI_ERR_UNCONTROLLABLE: return "uncontrollable_model";
    case FSI_ERR_INVALID_MU: return "invalid_mu";
    case FSI_ERR_DEGENERATE_PSEUDO_DATA: return "degenerate_pseudo_data";
    case FSI_ERR_NUMERIC: return "numeric";
    case FSI_ERR_UNDEFINED_BFR: return "undefined_bfr";
    case FSI_ERR_DEGENERATE_CHANNEL: return "degenerate_channel";
    case FSI_ERR_PARSE: return "parse";
    case FSI_ERR_SCHEMA: return "schema";
    case FSI_ERR_BOUNDS: return "bounds";
    case FSI_ERR_IO: return "io";
    case FSI_ERR_CONFIG: return "config";
    case FSI_ERR_EMPTY_SUMMARY: return "empty_summary";
    case FSI_ERR_UNSTABLE_TRUTH: return "unstable_truth";
    case FSI_ERR_NULL_ARGUMENT: return "null_argument";
    case FSI_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void fsi_string_free(char* text) { delete[] text; }

fsi_status fsi_model_create(int nx, int nu, int ny, const double* a, const double* b,
                            const double* c, const double* d, fsi_model** out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(c, "c");
    need(out, "out");
    fedsysid::require(nx > 0 && nu > 0 && ny > 0, "dimensions must be positive");
    Matrix dm = d ? read_row_major(d, ny, nu) : Matrix::Zero(ny, nu);
    *out = wrap(fedsysid::StateSpaceModel(read_row_major(a, nx, nx), read_row_major(b, nx, nu),
                                          read_row_major(c, ny, nx), std::move(dm)));
  });
}

fsi_status fsi_model_from_json(const char* json, fsi_model** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      fedsysid::throw_error(ErrorCode::kParse, e.what());
    }
    *out = wrap(fedsysid::model_from_json(j));
  });
}

fsi_status fsi_model_to_json(const fsi_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = copy_string(fedsysid::model_to_json(model->model).dump());
  });
}

fsi_status fsi_model_clone(const fsi_model* model, fsi_model** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = wrap(model->model);
  });
}

void fsi_model_destroy(fsi_model* model) { delete model; }

fsi_status fsi_model_dims(const fsi_model* model, int* nx, int* nu, int* ny) {
  return guarded([&] {
    need(model, "model");
    if (nx) *nx = model->model.nx();
    if (nu) *nu = model->model.nu();
    if (ny) *ny = model->model.ny();
  });
}

fsi_status fsi_model_matrix(const fsi_model* model, char which, double* out, size_t count) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto& m = model->model;
    const Matrix* src = nullptr;
    switch (which) {
      case 'A': src = &m.A(); break;
      case 'B': src = &m.B(); break;
      case 'C': src = &m.C(); break;
      case 'D': src = &m.D(); break;
      default: fedsysid::throw_error(ErrorCode::kContractViolation, "which must be A, B, C or D");
    }
    if (count < static_cast<size_t>(src->size())) {
      fedsysid::throw_error(ErrorCode::kBounds, "output buffer too small");
    }
    write_row_major(*src, out);
  });
}

fsi_status fsi_simulate(const fsi_model* model, const double* inputs, size_t samples,
                        double* outputs) {
  return guarded([&] {
    need(model, "model");
    need(inputs, "inputs");
    need(outputs, "outputs");
    const auto k = static_cast<Eigen::Index>(samples);
    const Matrix y =
        fedsysid::simulate_outputs(model->model, read_row_major(inputs, model->model.nu(), k));
    write_row_major(y, outputs);
  });
}

fsi_status fsi_eigenvalues(const fsi_model* model, double* real, double* imag) {
  return guarded([&] {
    need(model, "model");
    need(real, "real");
    need(imag, "imag");
    auto ev = fedsysid::eigenvalues(model->model);
    std::sort(ev.begin(), ev.end(), [](auto x, auto y) {
      if (std::abs(x) != std::abs(y)) return std::abs(x) > std::abs(y);
      if (x.real() != y.real()) return x.real() > y.real();
      return x.imag() > y.imag();
    });
    for (std::size_t i = 0; i < ev.size(); ++i) {
      real[i] = ev[i].real();
      imag[i] = ev[i].imag();
    }
  });
}

fsi_status fsi_spectral_radius(const fsi_model* model, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = fedsysid::spectral_radius(model->model.A());
  });
}

fsi_status fsi_is_stable(const fsi_model* model, int* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = fedsysid::is_stable(model->model) ? 1 : 0;
  });
}

fsi_status fsi_char_poly(const fsi_model* model, double* coeffs) {
  return guarded([&] {
    need(model, "model");
    need(coeffs, "coeffs");
    const auto c = fedsysid::char_poly_coeffs(model->model);
    std::copy(c.data(), c.data() + c.size(), coeffs);
  });
}

fsi_status fsi_transform_create(int nx, const double* t, double kappa_limit,
                                fsi_transform** out) {
  return guarded([&] {
    need(t, "t");
    need(out, "out");
    fedsysid::require(nx > 0, "nx must be positive");
    *out = new fsi_transform{fedsysid::make_transform(read_row_major(t, nx, nx), kappa_limit)};
  });
}

void fsi_transform_destroy(fsi_transform* transform) { delete transform; }

fsi_status fsi_transform_info(const fsi_transform* transform, int* nx, double* kappa,
                              int* ill_conditioned) {
  return guarded([&] {
    need(transform, "transform");
    if (nx) *nx = transform->transform.nx();
    if (kappa) *kappa = transform->transform.kappa;
    if (ill_conditioned) *ill_conditioned = transform->transform.ill_conditioned ? 1 : 0;
  });
}

fsi_status fsi_transform_matrix(const fsi_transform* transform, int inverse, double* out) {
  return guarded([&] {
    need(transform, "transform");
    need(out, "out");
    write_row_major(inverse ? transform->transform.T_inv : transform->transform.T, out);
  });
}

fsi_status fsi_apply_similarity(const fsi_model* model, const fsi_transform* transform,
                                int inverse, fsi_model** out) {
  return guarded([&] {
    need(model, "model");
    need(transform, "transform");
    need(out, "out");
    *out = wrap(inverse ? fedsysid::apply_inverse_similarity(model->model, transform->transform)
                        : fedsysid::apply_similarity(model->model, transform->transform));
  });
}

fsi_status fsi_to_ccf(const fsi_model* model, const int* mu, size_t mu_count,
                      double kappa_limit, fsi_transform** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    if (mu_count > 0) {
      need(mu, "mu");
      const fedsysid::MuSpec spec{std::vector<int>(mu, mu + mu_count)};
      *out = new fsi_transform{fedsysid::to_ccf_mimo(model->model, spec, kappa_limit)};
    } else {
      *out = new fsi_transform{fedsysid::to_ccf_siso(model->model, kappa_limit)};
    }
  });
}

fsi_status fsi_align_optimize(const fsi_model* const* models, size_t count, size_t reference,
                              const double* inputs, size_t samples, double kappa_limit,
                              fsi_transform** out) {
  return guarded([&] {
    need(inputs, "inputs");
    need(out, "out");
    const auto list = unwrap(models, count);
    const Matrix u =
        read_row_major(inputs, list.front().nu(), static_cast<Eigen::Index>(samples));
    const auto transforms = fedsysid::align_optimize(list, reference, u, kappa_limit);
    for (std::size_t i = 0; i < transforms.size(); ++i) {
      out[i] = new fsi_transform{transforms[i]};
    }
  });
}

fsi_status fsi_aggregate(const fsi_model* const* models, size_t count,
                         const fsi_transform* const* transforms, fsi_model** out) {
  return guarded([&] {
    need(out, "out");
    const auto list = unwrap(models, count);
    if (!transforms) {
      *out = wrap(fedsysid::aggregate_fedavg(list));
      return;
    }
    std::vector<fedsysid::AlignmentTransform> ts;
    for (std::size_t i = 0; i < count; ++i) {
      need(transforms[i], "transforms[i]");
      ts.push_back(transforms[i]->transform);
    }
    *out = wrap(fedsysid::aggregate_aligned(list, ts));
  });
}

fsi_status fsi_local_update(const fsi_model* model, const double* inputs,
                            const double* outputs, size_t samples, int iterations,
                            fsi_model** out) {
  return guarded([&] {
    need(model, "model");
    need(inputs, "inputs");
    need(outputs, "outputs");
    need(out, "out");
    const auto k = static_cast<Eigen::Index>(samples);
    fedsysid::TimeSeriesDataset data{read_row_major(inputs, model->model.nu(), k),
                                     read_row_major(outputs, model->model.ny(), k)};
    fedsysid::PemSettings settings;
    settings.iterations = iterations;
    *out = wrap(fedsysid::local_update(model->model, data, settings).model);
  });
}

fsi_status fsi_bfr(const double* actual, const double* predicted, size_t count, double* out) {
  return guarded([&] {
    need(actual, "actual");
    need(predicted, "predicted");
    need(out, "out");
    *out = fedsysid::bfr({actual, count}, {predicted, count});
  });
}

fsi_status fsi_ranksum(const double* a, size_t na, const double* b, size_t nb,
                       double* p_value) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(p_value, "p_value");
    *p_value = fedsysid::ranksum_test({a, na}, {b, nb});
  });
}

fsi_status fsi_cmd_generate(const fsi_command_options* options) {
  return guarded([&] {
    const auto opts = command_options(options);
    fedsysid::cmd_generate(opts, options->log_progress ? &std::cerr : nullptr);
  });
}

fsi_status fsi_cmd_run(const fsi_command_options* options) {
  return guarded([&] {
    const auto opts = command_options(options);
    fedsysid::cmd_run(opts, options->log_progress ? &std::cerr : nullptr);
  });
}

fsi_status fsi_cmd_compare(const char* results_a, const char* results_b, const char* out_path,
                           char** report) {
  return guarded([&] {
    need(results_a, "results_a");
    need(results_b, "results_b");
    std::optional<std::filesystem::path> out;
    if (out_path) out = std::filesystem::path(out_path);
    const auto j = fedsysid::cmd_compare(results_a, results_b, out);
    if (report) *report = copy_string(j.dump(2));
  });
}

}  // extern "C"
