#include "fedsysid/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsysid/error.hpp"

namespace fedsysid {

void validate(const MuSpec& spec, int nx, int nu) {
  if (static_cast<int>(spec.mu.size()) != nu) {
    throw_error(ErrorCode::kInvalidMu,
                "mu has " + std::to_string(spec.mu.size()) +
                    " entries, model has " + std::to_string(nu) + " inputs");
  }
  int total = 0;
  for (int m : spec.mu) {
    if (m < 0 || m > nx) {
      throw_error(ErrorCode::kInvalidMu,
                  "mu entries must lie in [0, nx], got " + std::to_string(m));
    }
    total += m;
  }
  if (total != nx) {
    throw_error(ErrorCode::kInvalidMu, "mu entries sum to " +
                                           std::to_string(total) +
                                           ", expected nx = " + std::to_string(nx));
  }
}

Matrix controllability_matrix(const StateSpaceModel& model) {
  const int nx = model.nx(), nu = model.nu();
  Matrix p(nx, nx * nu);
  p.leftCols(nu) = model.B();
  for (int i = 1; i < nx; ++i) {
    p.middleCols(nu * i, nu) = model.A() * p.middleCols(nu * (i - 1), nu);
  }
  return p;
}

Matrix ccf_coefficient_matrix(const Vector& coeffs) {
  const auto n = coeffs.size();
  Matrix w = Matrix::Zero(n, n);
  // Entry (i, j) holds a_(n-1-i-j), with a_0 := 1 on the anti-diagonal.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; i + j < n; ++j) {
      const Eigen::Index idx = n - 1 - i - j;
      w(i, j) = idx == 0 ? 1.0 : coeffs(idx - 1);
    }
  }
  return w;
}

AlignmentTransform to_ccf_siso(const StateSpaceModel& model,
                               double kappa_limit) {
  require(model.nu() == 1, "to_ccf_siso requires a single-input model, got nu=" +
                               std::to_string(model.nu()));
  const Matrix p = controllability_matrix(model);
  const int rank = numerical_rank(p);
  if (rank < model.nx()) {
    throw_error(ErrorCode::kUncontrollableModel,
                "controllability matrix has numerical rank " +
                    std::to_string(rank) + " < nx = " +
                    std::to_string(model.nx()));
  }
  const Matrix w = ccf_coefficient_matrix(char_poly_coeffs(model.A()));
  return make_transform(p * w, kappa_limit);
}

AlignmentTransform to_ccf_mimo(const StateSpaceModel& model, const MuSpec& mu,
                               double kappa_limit) {
  const int nx = model.nx(), nu = model.nu();
  validate(mu, nx, nu);

  // Selected columns b_l, A b_l, ..., A^(mu_l - 1) b_l for every input.
  Matrix selected(nx, nx);
  int col = 0;
  for (int l = 0; l < nu; ++l) {
    Vector v = model.B().col(l);
    for (int k = 0; k < mu.mu[l]; ++k) {
      selected.col(col++) = v;
      v = model.A() * v;
    }
  }
  if (numerical_rank(selected) < nx) {
    throw_error(ErrorCode::kInvalidMu,
                "the controllability columns selected by mu are linearly "
                "dependent");
  }
  const Matrix selected_inv = selected.fullPivLu().inverse();
  if (!selected_inv.allFinite()) {
    throw_error(ErrorCode::kInvalidMu,
                "the controllability columns selected by mu are singular");
  }

  // Last row of each partition, propagated through A.
  Matrix q(nx, nx);
  int partition_end = 0;
  int row = 0;
  for (int l = 0; l < nu; ++l) {
    if (mu.mu[l] == 0) continue;
    partition_end += mu.mu[l];
    Eigen::RowVectorXd r = selected_inv.row(partition_end - 1);
    for (int k = 0; k < mu.mu[l]; ++k) {
      q.row(row++) = r;
      r = r * model.A();
    }
  }
  AlignmentTransform t = make_transform_from_inverse(q, kappa_limit);
  if (condition_number(selected) > kappa_limit) t.ill_conditioned = true;
  return t;
}

Matrix pseudo_inputs(const PseudoDataSpec& spec, int nu, Rng& rng) {
  if (spec.inputs) {
    require(spec.inputs->rows() == nu,
            "pseudo-input sequence has the wrong channel count");
    require(spec.inputs->cols() > 0, "pseudo-input sequence is empty");
    return *spec.inputs;
  }
  require(spec.length > 0, "pseudo-data length must be positive");
  require(spec.input_std > 0.0, "pseudo-input std must be positive");
  return gaussian_matrix(rng, nu, spec.length, spec.input_std);
}

Matrix pseudo_states(const StateSpaceModel& model, const Matrix& inputs) {
  require(inputs.rows() == model.nu(), "pseudo inputs: channel mismatch");
  const Eigen::Index steps = inputs.cols();
  Matrix states(model.nx(), steps);
  Vector x = Vector::Zero(model.nx());
  for (Eigen::Index k = 0; k < steps; ++k) {
    Vector next = model.A() * x + model.B() * inputs.col(k);
    if (!next.allFinite()) throw SimulationOverflow(static_cast<std::size_t>(k));
    states.col(k) = next;
    x.swap(next);
  }
  return states;
}

std::vector<AlignmentTransform> align_optimize(
    const std::vector<StateSpaceModel>& models, std::size_t reference,
    const Matrix& inputs, double kappa_limit) {
  require(!models.empty(), "align_optimize: no models");
  require(reference < models.size(), "align_optimize: reference index " +
                                         std::to_string(reference) +
                                         " out of range");
  const int nx = models.front().nx();
  for (const auto& m : models) {
    require(m.same_dims(models.front()),
            "align_optimize: models have different dimensions");
  }
  if (inputs.cols() < nx) {
    throw_error(ErrorCode::kDegeneratePseudoData,
                "pseudo-data length " + std::to_string(inputs.cols()) +
                    " is shorter than nx = " + std::to_string(nx));
  }

  const Matrix x_ref = pseudo_states(models[reference], inputs);
  const Matrix gram = x_ref * x_ref.transpose();
  if (numerical_rank(gram) < nx) {
    throw_error(ErrorCode::kDegeneratePseudoData,
                "reference pseudo-states are not persistently exciting");
  }
  const auto gram_ldlt = gram.ldlt();

  std::vector<AlignmentTransform> out;
  out.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (i == reference) {
      out.push_back(AlignmentTransform::identity(nx));
      continue;
    }
    const Matrix x_i = pseudo_states(models[i], inputs);
    // T = X_i X_ref^T G^-1, computed as (G^-1 X_ref X_i^T)^T with G symmetric.
    const Matrix t = gram_ldlt.solve(x_ref * x_i.transpose()).transpose();
    out.push_back(make_transform(t, kappa_limit));
  }
  return out;
}

std::vector<AlignmentTransform> align_optimize(
    const std::vector<StateSpaceModel>& models, std::size_t reference,
    const PseudoDataSpec& spec, Rng& rng, double kappa_limit) {
  require(!models.empty(), "align_optimize: no models");
  return align_optimize(models, reference,
                        pseudo_inputs(spec, models.front().nu(), rng),
                        kappa_limit);
}

double ccf_structure_error(const StateSpaceModel& model) {
  require(model.nu() == 1, "ccf_structure_error requires a single-input model");
  const int n = model.nx();
  double err = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double expected = (j == i + 1) ? 1.0 : 0.0;
      err = std::max(err, std::abs(model.A()(i, j) - expected));
    }
  }
  for (int i = 0; i < n; ++i) {
    const double expected = (i == n - 1) ? 1.0 : 0.0;
    err = std::max(err, std::abs(model.B()(i, 0) - expected));
  }
  return err;
}

}  // namespace fedsysid
