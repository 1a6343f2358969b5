#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fedsysid/random.hpp"
#include "fedsysid/state_space.hpp"

namespace fedsysid {

/// Number of controllability columns drawn from each input channel when
/// building the multi-input canonical transform. Entries sum to nx.
struct MuSpec {
  std::vector<int> mu;
};

void validate(const MuSpec& spec, int nx, int nu);

/// Server-side pseudo data used to fit least-squares alignments.
struct PseudoDataSpec {
  Eigen::Index length = 0;  // K_pseudo; must be >= nx
  double input_std = 1.0;
  // When set (nu x K_pseudo), used instead of drawing Gaussian inputs.
  std::optional<Matrix> inputs;
};

/// [B, AB, ..., A^(nx-1) B], blocks in that order.
Matrix controllability_matrix(const StateSpaceModel& model);

/// Hankel matrix of the coefficients of z^n + a1 z^(n-1) + ... + an,
///
///   [a(n-1)  a(n-2) ... a1 1]
///   [a(n-2)  a(n-3) ... 1  0]
///   [...                    ]
///   [1       0      ... 0  0]
///
/// which is the inverse of the controllability matrix of the companion form.
Matrix ccf_coefficient_matrix(const Vector& coeffs);

/// Transform that brings a single-input model into controllable canonical
/// form: T = P W. Requires nu == 1; throws kUncontrollableModel if the
/// controllability matrix is rank deficient.
AlignmentTransform to_ccf_siso(const StateSpaceModel& model,
                               double kappa_limit = kDefaultKappaLimit);

/// Multi-input canonical transform driven by the per-input column counts mu.
/// Throws kInvalidMu when the selected controllability columns are
/// dependent.
AlignmentTransform to_ccf_mimo(const StateSpaceModel& model, const MuSpec& mu,
                               double kappa_limit = kDefaultKappaLimit);

/// Shared pseudo-input sequence for align_optimize: spec.inputs if present,
/// otherwise N(0, input_std^2) draws from `rng`.
Matrix pseudo_inputs(const PseudoDataSpec& spec, int nu, Rng& rng);

/// States x[2..K+1] produced by `inputs` from the zero initial state, one
/// column per input sample (nx x K).
Matrix pseudo_states(const StateSpaceModel& model, const Matrix& inputs);

/// Least-squares alignment of every model to the basin of models[reference]
/// (0-based). The reference gets the identity; for every other model,
/// T_i = X_i X_ref^T (X_ref X_ref^T)^-1 over simulated pseudo-states.
std::vector<AlignmentTransform> align_optimize(
    const std::vector<StateSpaceModel>& models, std::size_t reference,
    const Matrix& inputs, double kappa_limit = kDefaultKappaLimit);

std::vector<AlignmentTransform> align_optimize(
    const std::vector<StateSpaceModel>& models, std::size_t reference,
    const PseudoDataSpec& spec, Rng& rng,
    double kappa_limit = kDefaultKappaLimit);

/// Largest deviation of (A, B) from the single-input controllable canonical
/// pattern: shifted identity above a free last row, B = e_n.
double ccf_structure_error(const StateSpaceModel& model);

}  // namespace fedsysid
