#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedsysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Discrete-time linear state-space model
///
///   x[k+1] = A x[k] + B u[k]
///   y[k]   = C x[k] + D u[k]
///
/// Instances are immutable once constructed; the constructor validates
/// dimensions and rejects non-finite entries.
class StateSpaceModel {
 public:
  StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d);

  /// Zero model with the given dimensions.
  static StateSpaceModel zeros(int nx, int nu, int ny);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& C() const { return c_; }
  const Matrix& D() const { return d_; }

  int nx() const { return static_cast<int>(a_.rows()); }
  int nu() const { return static_cast<int>(b_.cols()); }
  int ny() const { return static_cast<int>(c_.rows()); }

  bool same_dims(const StateSpaceModel& other) const {
    return nx() == other.nx() && nu() == other.nu() && ny() == other.ny();
  }

  /// Largest absolute entry difference over all four matrices.
  double max_abs_diff(const StateSpaceModel& other) const;

 private:
  Matrix a_, b_, c_, d_;
};

/// Nonsingular change of state coordinates x = T x'.
struct AlignmentTransform {
  Matrix T;
  Matrix T_inv;
  double kappa = 1.0;
  bool ill_conditioned = false;

  int nx() const { return static_cast<int>(T.rows()); }
  static AlignmentTransform identity(int nx);
};

struct StateTrajectory {
  Matrix states;   // nx x K, column k holds x[k]
  Matrix outputs;  // ny x K
};

inline constexpr double kDefaultKappaLimit = 1e12;

/// Free-run simulation. `inputs` is nu x K, one column per sample.
/// Throws SimulationOverflow when a value becomes non-finite.
StateTrajectory simulate(const StateSpaceModel& model, const Matrix& inputs,
                         const Vector& x1);

/// Simulation from the zero initial state; returns outputs only.
Matrix simulate_outputs(const StateSpaceModel& model, const Matrix& inputs);

std::vector<std::complex<double>> eigenvalues(const StateSpaceModel& model);
std::vector<std::complex<double>> eigenvalues(const Matrix& a);

double spectral_radius(const Matrix& a);

/// Coefficients (a1..an) of the monic polynomial det(lambda I - A) =
/// lambda^n + a1 lambda^(n-1) + ... + an, via Faddeev-LeVerrier.
Vector char_poly_coeffs(const Matrix& a);
inline Vector char_poly_coeffs(const StateSpaceModel& m) {
  return char_poly_coeffs(m.A());
}

/// Companion matrix whose last row is (-an, ..., -a1) above a shifted
/// identity. Inverse of char_poly_coeffs on companion matrices.
Matrix companion_matrix(const Vector& coeffs);

bool is_stable(const StateSpaceModel& model, double margin = 0.0);

/// (T^-1 A T, T^-1 B, C T, D): the model expressed in x' where x = T x'.
StateSpaceModel apply_similarity(const StateSpaceModel& model,
                                 const AlignmentTransform& t);

/// (T A T^-1, T B, C T^-1, D): undoes apply_similarity.
StateSpaceModel apply_inverse_similarity(const StateSpaceModel& model,
                                         const AlignmentTransform& t);

/// Builds a transform from T. Throws kSingularTransform if T is singular
/// to machine precision; flags ill_conditioned when kappa > kappa_limit.
AlignmentTransform make_transform(const Matrix& t,
                                  double kappa_limit = kDefaultKappaLimit);

/// Same as make_transform but takes T^-1 as the argument.
AlignmentTransform make_transform_from_inverse(
    const Matrix& t_inv, double kappa_limit = kDefaultKappaLimit);

/// 2-norm condition number, +inf for an exactly singular matrix.
double condition_number(const Matrix& m);

/// Numerical rank: singular values above rows * eps * sigma_max.
int numerical_rank(const Matrix& m);

std::string model_to_string(const StateSpaceModel& model);
StateSpaceModel model_from_string(const std::string& text);

}  // namespace fedsysid
