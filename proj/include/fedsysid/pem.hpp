#pragma once

#include "fedsysid/random.hpp"
#include "fedsysid/state_space.hpp"
#include "fedsysid/time_series.hpp"

namespace fedsysid {

struct PemSettings {
  int iterations = 1;
  double damping_init = 1e-3;
  double damping_scale = 10.0;
  // A trial step is accepted only if it lowers the cost by more than this
  // fraction of the current cost.
  double min_step_decrease = 0.0;
  // Damping beyond which the search gives up and reports a stall.
  double damping_max = 1e10;
};

void validate(const PemSettings& settings);

struct LocalUpdateResult {
  StateSpaceModel model;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int accepted_steps = 0;
  // Set when a step could not be accepted before the damping hit its cap.
  bool stalled = false;
};

/// Sum of squared free-run simulation errors from the zero initial state.
/// Returns +inf if the simulation overflows.
double simulation_cost(const StateSpaceModel& model,
                       const TimeSeriesDataset& data);

/// Number of free parameters: all entries of A, B, C and D.
int parameter_count(int nx, int nu, int ny);

/// Parameters ordered as row-major A, then B, C, D.
Vector pack_parameters(const StateSpaceModel& model);
StateSpaceModel unpack_parameters(const Vector& theta, int nx, int nu, int ny);

/// Residual vector r = vec(y - y_hat) (sample-major, channel-minor) and its
/// Jacobian with respect to pack_parameters(model), obtained by propagating
/// forward sensitivities of the state recursion. Throws SimulationOverflow.
struct ResidualJacobian {
  Vector residual;
  Matrix jacobian;  // (ny*K) x parameter_count
};
ResidualJacobian residual_jacobian(const StateSpaceModel& model,
                                   const TimeSeriesDataset& data);

/// J^T J, J^T r and r^T r of residual_jacobian, accumulated sample by
/// sample without storing J. Throws SimulationOverflow.
struct NormalEquations {
  Matrix hessian;   // J^T J
  Vector gradient;  // J^T r
  double cost = 0.0;
};
NormalEquations normal_equations(const StateSpaceModel& model,
                                 const TimeSeriesDataset& data);

/// Prediction-error refinement: `settings.iterations` accepted
/// Levenberg-Marquardt steps on the simulation cost, starting from `model`.
LocalUpdateResult local_update(const StateSpaceModel& model,
                               const TimeSeriesDataset& data,
                               const PemSettings& settings);

/// Random initial model: B, C, D ~ N(0, 0.1^2); A ~ N(0, 1) rescaled to a
/// spectral radius of 0.5.
StateSpaceModel init_model(int nx, int nu, int ny, Rng& rng);

}  // namespace fedsysid
