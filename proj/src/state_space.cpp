#include "fedsysid/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "fedsysid/error.hpp"
#include "fedsysid/json_io.hpp"

namespace fedsysid {

namespace {

std::string dims_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) {
    throw_error(ErrorCode::kContractViolation,
                std::string("matrix ") + name + " has non-finite entries");
  }
}

double singular_threshold(const Eigen::Index rows, double sigma_max) {
  return static_cast<double>(rows) * std::numeric_limits<double>::epsilon() *
         sigma_max;
}

}  // namespace

StateSpaceModel::StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  const auto nx = a_.rows();
  const auto nu = b_.cols();
  const auto ny = c_.rows();
  if (nx < 1 || nu < 1 || ny < 1 || a_.cols() != nx || b_.rows() != nx ||
      c_.cols() != nx || d_.rows() != ny || d_.cols() != nu) {
    throw_error(ErrorCode::kContractViolation,
                "inconsistent state-space dimensions: A " + dims_string(a_) +
                    ", B " + dims_string(b_) + ", C " + dims_string(c_) +
                    ", D " + dims_string(d_));
  }
  check_finite(a_, "A");
  check_finite(b_, "B");
  check_finite(c_, "C");
  check_finite(d_, "D");
}

StateSpaceModel StateSpaceModel::zeros(int nx, int nu, int ny) {
  require(nx > 0 && nu > 0 && ny > 0, "model dimensions must be positive");
  return StateSpaceModel(Matrix::Zero(nx, nx), Matrix::Zero(nx, nu),
                         Matrix::Zero(ny, nx), Matrix::Zero(ny, nu));
}

double StateSpaceModel::max_abs_diff(const StateSpaceModel& other) const {
  require(same_dims(other), "max_abs_diff: dimension mismatch");
  return std::max({(a_ - other.a_).cwiseAbs().maxCoeff(),
                   (b_ - other.b_).cwiseAbs().maxCoeff(),
                   (c_ - other.c_).cwiseAbs().maxCoeff(),
                   (d_ - other.d_).cwiseAbs().maxCoeff()});
}

AlignmentTransform AlignmentTransform::identity(int nx) {
  AlignmentTransform t;
  t.T = Matrix::Identity(nx, nx);
  t.T_inv = Matrix::Identity(nx, nx);
  t.kappa = 1.0;
  return t;
}

StateTrajectory simulate(const StateSpaceModel& model, const Matrix& inputs,
                         const Vector& x1) {
  require(inputs.cols() > 0, "simulate: empty input sequence");
  require(inputs.rows() == model.nu(),
          "simulate: input has " + std::to_string(inputs.rows()) +
              " channels, model expects " + std::to_string(model.nu()));
  require(x1.size() == model.nx(), "simulate: initial state size mismatch");

  const auto steps = inputs.cols();
  StateTrajectory traj;
  traj.states.resize(model.nx(), steps);
  traj.outputs.resize(model.ny(), steps);

  Vector x = x1;
  for (Eigen::Index k = 0; k < steps; ++k) {
    traj.states.col(k) = x;
    traj.outputs.col(k).noalias() = model.C() * x + model.D() * inputs.col(k);
    if (!traj.outputs.col(k).allFinite() || !x.allFinite()) {
      throw SimulationOverflow(static_cast<std::size_t>(k));
    }
    Vector next = model.A() * x + model.B() * inputs.col(k);
    x.swap(next);
  }
  return traj;
}

Matrix simulate_outputs(const StateSpaceModel& model, const Matrix& inputs) {
  return simulate(model, inputs, Vector::Zero(model.nx())).outputs;
}

std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
  require(a.rows() == a.cols(), "eigenvalues: matrix must be square");
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw_error(ErrorCode::kNumeric, "eigenvalue iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<std::complex<double>> eigenvalues(const StateSpaceModel& model) {
  return eigenvalues(model.A());
}

double spectral_radius(const Matrix& a) {
  double rho = 0.0;
  for (const auto& lambda : eigenvalues(a)) rho = std::max(rho, std::abs(lambda));
  return rho;
}

Vector char_poly_coeffs(const Matrix& a) {
  require(a.rows() == a.cols(), "char_poly_coeffs: matrix must be square");
  const auto n = a.rows();
  Vector coeffs(n);
  const Matrix identity = Matrix::Identity(n, n);
  // M_1 = I, a_k = -tr(A M_k) / k, M_{k+1} = A M_k + a_k I.
  Matrix m = identity;
  for (Eigen::Index k = 1; k <= n; ++k) {
    const Matrix am = a * m;
    coeffs(k - 1) = -am.trace() / static_cast<double>(k);
    m = am + coeffs(k - 1) * identity;
  }
  return coeffs;
}

Matrix companion_matrix(const Vector& coeffs) {
  const auto n = coeffs.size();
  require(n > 0, "companion_matrix: empty coefficient vector");
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = -coeffs(n - 1 - j);
  return a;
}

bool is_stable(const StateSpaceModel& model, double margin) {
  require(margin >= 0.0, "is_stable: margin must be nonnegative");
  return spectral_radius(model.A()) < 1.0 - margin;
}

StateSpaceModel apply_similarity(const StateSpaceModel& model,
                                 const AlignmentTransform& t) {
  require(t.nx() == model.nx(), "apply_similarity: transform is " +
                                    dims_string(t.T) + ", model nx is " +
                                    std::to_string(model.nx()));
  return StateSpaceModel(t.T_inv * model.A() * t.T, t.T_inv * model.B(),
                         model.C() * t.T, model.D());
}

StateSpaceModel apply_inverse_similarity(const StateSpaceModel& model,
                                         const AlignmentTransform& t) {
  require(t.nx() == model.nx(), "apply_inverse_similarity: transform is " +
                                    dims_string(t.T) + ", model nx is " +
                                    std::to_string(model.nx()));
  return StateSpaceModel(t.T * model.A() * t.T_inv, t.T * model.B(),
                         model.C() * t.T_inv, model.D());
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

int numerical_rank(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double tol = singular_threshold(m.rows(), s(0));
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) ++rank;
  }
  return rank;
}

namespace {

// Returns (matrix inverse, kappa) or throws when singular.
std::pair<Matrix, double> checked_inverse(const Matrix& m) {
  require(m.rows() == m.cols() && m.rows() > 0,
          "transform must be a nonempty square matrix, got " + dims_string(m));
  require(m.allFinite(), "transform has non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (smax == 0.0 || smin <= singular_threshold(m.rows(), smax)) {
    throw_error(ErrorCode::kSingularTransform,
                "transform is singular to machine precision (sigma_min=" +
                    std::to_string(smin) + ", sigma_max=" +
                    std::to_string(smax) + ")");
  }
  Matrix inv = svd.matrixV() * s.cwiseInverse().asDiagonal() *
               svd.matrixU().transpose();
  return {std::move(inv), smax / smin};
}

}  // namespace

AlignmentTransform make_transform(const Matrix& t, double kappa_limit) {
  auto [inv, kappa] = checked_inverse(t);
  AlignmentTransform out;
  out.T = t;
  out.T_inv = std::move(inv);
  out.kappa = kappa;
  out.ill_conditioned = kappa > kappa_limit;
  return out;
}

AlignmentTransform make_transform_from_inverse(const Matrix& t_inv,
                                               double kappa_limit) {
  auto [t, kappa] = checked_inverse(t_inv);
  AlignmentTransform out;
  out.T = std::move(t);
  out.T_inv = t_inv;
  out.kappa = kappa;
  out.ill_conditioned = kappa > kappa_limit;
  return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const char* name) {
  if (!j.is_array()) {
    throw_error(ErrorCode::kSchema,
                std::string("field ") + name + " must be an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw_error(ErrorCode::kSchema, std::string("field ") + name +
                                          " has ragged or non-array rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw_error(ErrorCode::kSchema,
                    std::string("field ") + name + " has a non-numeric entry");
      }
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

nlohmann::json model_to_json(const StateSpaceModel& model) {
  nlohmann::json j;
  j["nx"] = model.nx();
  j["nu"] = model.nu();
  j["ny"] = model.ny();
  j["A"] = matrix_to_json(model.A());
  j["B"] = matrix_to_json(model.B());
  j["C"] = matrix_to_json(model.C());
  j["D"] = matrix_to_json(model.D());
  return j;
}

StateSpaceModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw_error(ErrorCode::kSchema, "model must be an object");
  for (const char* key : {"nx", "nu", "ny", "A", "B", "C", "D"}) {
    if (!j.contains(key)) {
      throw_error(ErrorCode::kSchema, std::string("model is missing field ") + key);
    }
  }
  for (const char* key : {"nx", "nu", "ny"}) {
    if (!j.at(key).is_number_integer()) {
      throw_error(ErrorCode::kSchema, std::string("model field ") + key + " must be an integer");
    }
  }
  const int nx = j.at("nx").get<int>();
  const int nu = j.at("nu").get<int>();
  const int ny = j.at("ny").get<int>();
  Matrix a = matrix_from_json(j.at("A"), "A");
  Matrix b = matrix_from_json(j.at("B"), "B");
  Matrix c = matrix_from_json(j.at("C"), "C");
  Matrix d = matrix_from_json(j.at("D"), "D");
  if (a.rows() != nx || a.cols() != nx || b.rows() != nx || b.cols() != nu ||
      c.rows() != ny || c.cols() != nx || d.rows() != ny || d.cols() != nu) {
    throw_error(ErrorCode::kSchema,
                "model matrices disagree with declared nx/nu/ny");
  }
  try {
    return StateSpaceModel(std::move(a), std::move(b), std::move(c),
                           std::move(d));
  } catch (const Error& e) {
    throw_error(ErrorCode::kSchema, e.what());
  }
}

std::string model_to_string(const StateSpaceModel& model) {
  return model_to_json(model).dump();
}

StateSpaceModel model_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCode::kParse, std::string("model JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace fedsysid
