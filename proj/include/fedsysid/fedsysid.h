/* C interface to the fedsysid library.
 *
 * Every function returns an fsi_status; FSI_OK is zero. After a failure,
 * fsi_last_error() returns a message describing it (per calling thread,
 * valid until the next call on that thread).
 *
 * Matrices cross the boundary as dense row-major double arrays. Time series
 * are channel-major: an (n x K) series stores channel i at [i*K, (i+1)*K).
 * Strings returned through char** are owned by the caller and released with
 * fsi_string_free.
 */
#ifndef FEDSYSID_H
#define FEDSYSID_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FSI_API __declspec(dllexport)
#else
#define FSI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsi_status {
  FSI_OK = 0,
  FSI_ERR_CONTRACT = 1,
  FSI_ERR_OVERFLOW = 2,
  FSI_ERR_SINGULAR_TRANSFORM = 3,
  FSI_ERR_UNCONTROLLABLE = 4,
  FSI_ERR_INVALID_MU = 5,
  FSI_ERR_DEGENERATE_PSEUDO_DATA = 6,
  FSI_ERR_NUMERIC = 7,
  FSI_ERR_UNDEFINED_BFR = 8,
  FSI_ERR_DEGENERATE_CHANNEL = 9,
  FSI_ERR_PARSE = 10,
  FSI_ERR_SCHEMA = 11,
  FSI_ERR_BOUNDS = 12,
  FSI_ERR_IO = 13,
  FSI_ERR_CONFIG = 14,
  FSI_ERR_EMPTY_SUMMARY = 15,
  FSI_ERR_UNSTABLE_TRUTH = 16,
  FSI_ERR_NULL_ARGUMENT = 17,
  FSI_ERR_INTERNAL = 99
} fsi_status;

typedef struct fsi_model fsi_model;
typedef struct fsi_transform fsi_transform;

FSI_API const char* fsi_version(void);
FSI_API const char* fsi_last_error(void);
/* Stable identifier such as "config" or "singular_transform". */
FSI_API const char* fsi_status_name(fsi_status status);
FSI_API void fsi_string_free(char* text);

/* Models. d may be NULL for a zero feedthrough. */
FSI_API fsi_status fsi_model_create(int nx, int nu, int ny, const double* a,
                                    const double* b, const double* c,
                                    const double* d, fsi_model** out);
FSI_API fsi_status fsi_model_from_json(const char* json, fsi_model** out);
FSI_API fsi_status fsi_model_to_json(const fsi_model* model, char** out);
FSI_API fsi_status fsi_model_clone(const fsi_model* model, fsi_model** out);
FSI_API void fsi_model_destroy(fsi_model* model);
FSI_API fsi_status fsi_model_dims(const fsi_model* model, int* nx, int* nu,
                                  int* ny);
/* which is one of 'A', 'B', 'C', 'D'; count is the capacity of out. */
FSI_API fsi_status fsi_model_matrix(const fsi_model* model, char which,
                                    double* out, size_t count);

/* Free run from the zero state: inputs nu x K, outputs ny x K. */
FSI_API fsi_status fsi_simulate(const fsi_model* model, const double* inputs,
                                size_t samples, double* outputs);
/* nx eigenvalues, sorted by decreasing magnitude. */
FSI_API fsi_status fsi_eigenvalues(const fsi_model* model, double* real,
                                   double* imag);
FSI_API fsi_status fsi_spectral_radius(const fsi_model* model, double* out);
FSI_API fsi_status fsi_is_stable(const fsi_model* model, int* out);
/* Coefficients a1..anx of z^nx + a1 z^(nx-1) + ... + anx. */
FSI_API fsi_status fsi_char_poly(const fsi_model* model, double* coeffs);

/* Transforms. T is nx x nx; x = T x'. */
FSI_API fsi_status fsi_transform_create(int nx, const double* t,
                                        double kappa_limit,
                                        fsi_transform** out);
FSI_API void fsi_transform_destroy(fsi_transform* transform);
FSI_API fsi_status fsi_transform_info(const fsi_transform* transform, int* nx,
                                      double* kappa, int* ill_conditioned);
FSI_API fsi_status fsi_transform_matrix(const fsi_transform* transform,
                                        int inverse, double* out);
/* (T^-1 A T, T^-1 B, C T, D), or the inverse map when inverse != 0. */
FSI_API fsi_status fsi_apply_similarity(const fsi_model* model,
                                        const fsi_transform* transform,
                                        int inverse, fsi_model** out);

/* Canonical transform; mu may be NULL for single-input models. */
FSI_API fsi_status fsi_to_ccf(const fsi_model* model, const int* mu,
                              size_t mu_count, double kappa_limit,
                              fsi_transform** out);
/* Least-squares transforms aligning every model to models[reference];
 * inputs is nu x samples. out receives count handles. */
FSI_API fsi_status fsi_align_optimize(const fsi_model* const* models,
                                      size_t count, size_t reference,
                                      const double* inputs, size_t samples,
                                      double kappa_limit, fsi_transform** out);

/* Uniform average; with transforms != NULL the models are aligned first. */
FSI_API fsi_status fsi_aggregate(const fsi_model* const* models, size_t count,
                                 const fsi_transform* const* transforms,
                                 fsi_model** out);

/* LM refinement. inputs nu x samples, outputs ny x samples. */
FSI_API fsi_status fsi_local_update(const fsi_model* model,
                                    const double* inputs,
                                    const double* outputs, size_t samples,
                                    int iterations, fsi_model** out);

FSI_API fsi_status fsi_bfr(const double* actual, const double* predicted,
                           size_t count, double* out);
FSI_API fsi_status fsi_ranksum(const double* a, size_t na, const double* b,
                               size_t nb, double* p_value);

/* Batch commands. out_dir and seeds are optional (NULL / seed_count 0);
 * threads <= 0 keeps the config value. log_progress != 0 prints progress
 * to stderr. */
typedef struct fsi_command_options {
  const char* config_path;
  const char* out_dir;
  int force;
  const uint64_t* seeds;
  size_t seed_count;
  int threads;
  int log_progress;
} fsi_command_options;

FSI_API fsi_status fsi_cmd_generate(const fsi_command_options* options);
FSI_API fsi_status fsi_cmd_run(const fsi_command_options* options);
/* report receives the comparison JSON; out_path may be NULL. */
FSI_API fsi_status fsi_cmd_compare(const char* results_a,
                                   const char* results_b,
                                   const char* out_path, char** report);

#ifdef __cplusplus
}
#endif

#endif
