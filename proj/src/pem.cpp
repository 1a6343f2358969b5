#include "fedsysid/pem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fedsysid/error.hpp"

namespace fedsysid {

void validate(const PemSettings& settings) {
  require(settings.iterations >= 0, "PEM iterations must be nonnegative");
  require(settings.damping_init > 0.0, "damping_init must be positive");
  require(settings.damping_scale > 1.0, "damping_scale must exceed 1");
  require(settings.min_step_decrease >= 0.0,
          "min_step_decrease must be nonnegative");
  require(settings.damping_max >= settings.damping_init,
          "damping_max must be at least damping_init");
}

int parameter_count(int nx, int nu, int ny) {
  return nx * nx + nx * nu + ny * nx + ny * nu;
}

Vector pack_parameters(const StateSpaceModel& model) {
  const int nx = model.nx(), nu = model.nu(), ny = model.ny();
  Vector theta(parameter_count(nx, nu, ny));
  Eigen::Index p = 0;
  for (const Matrix* m : {&model.A(), &model.B(), &model.C(), &model.D()}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) theta(p++) = (*m)(i, j);
    }
  }
  return theta;
}

StateSpaceModel unpack_parameters(const Vector& theta, int nx, int nu, int ny) {
  require(theta.size() == parameter_count(nx, nu, ny),
          "parameter vector has the wrong length");
  Matrix a(nx, nx), b(nx, nu), c(ny, nx), d(ny, nu);
  Eigen::Index p = 0;
  for (Matrix* m : {&a, &b, &c, &d}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = theta(p++);
    }
  }
  return StateSpaceModel(std::move(a), std::move(b), std::move(c), std::move(d));
}

namespace {

// Row-major copies of the model matrices for the per-sample loops.
struct Flat {
  int nx, nu, ny;
  std::vector<double> a, b, c, d;

  explicit Flat(const StateSpaceModel& m)
      : nx(m.nx()), nu(m.nu()), ny(m.ny()), a(row_major(m.A())), b(row_major(m.B())),
        c(row_major(m.C())), d(row_major(m.D())) {}

  static std::vector<double> row_major(const Matrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
    return out;
  }
};

}  // namespace

double simulation_cost(const StateSpaceModel& model,
                       const TimeSeriesDataset& data) {
  check_compatible(model, data);
  const Flat m(model);
  const Eigen::Index steps = data.length();
  const double* u_all = data.inputs.data();
  const double* y_all = data.outputs.data();
  std::vector<double> x(m.nx, 0.0), next(m.nx);
  double cost = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double* u = u_all + k * m.nu;
    const double* y = y_all + k * m.ny;
    for (int i = 0; i < m.ny; ++i) {
      double acc = 0.0;
      for (int r = 0; r < m.nx; ++r) acc += m.c[i * m.nx + r] * x[r];
      for (int j = 0; j < m.nu; ++j) acc += m.d[i * m.nu + j] * u[j];
      const double e = y[i] - acc;
      cost += e * e;
    }
    for (int i = 0; i < m.nx; ++i) {
      double acc = 0.0;
      for (int l = 0; l < m.nx; ++l) acc += m.a[i * m.nx + l] * x[l];
      for (int j = 0; j < m.nu; ++j) acc += m.b[i * m.nu + j] * u[j];
      next[i] = acc;
    }
    x.swap(next);
    if (!std::isfinite(cost)) return std::numeric_limits<double>::infinity();
  }
  return cost;
}

NormalEquations normal_equations(const StateSpaceModel& model,
                                 const TimeSeriesDataset& data) {
  check_compatible(model, data);
  const int nx = model.nx(), nu = model.nu(), ny = model.ny();
  const Eigen::Index steps = data.length();
  require(steps > 0, "normal_equations: empty dataset");

  const int n_a = nx * nx;
  const int n_ab = n_a + nx * nu;
  const int n_c = ny * nx;
  const int n_theta = parameter_count(nx, nu, ny);

  const Matrix& a_mat = model.A();
  const Matrix& b_mat = model.B();
  const Matrix& c_mat = model.C();
  const Matrix& d_mat = model.D();

  Vector x = Vector::Zero(nx), x_next(nx), y_hat(ny);
  // Column p holds d x / d theta_p for the A and B entries.
  Matrix sens = Matrix::Zero(nx, n_ab), sens_next(nx, n_ab);
  // Output sensitivities (one column per sample and output) are buffered and
  // folded into J^T J a block at a time.
  constexpr Eigen::Index kBlock = 64;
  Matrix y_sens = Matrix::Zero(n_theta, kBlock * ny);
  Vector resid_block(kBlock * ny);
  Matrix h = Matrix::Zero(n_theta, n_theta);
  Vector g = Vector::Zero(n_theta);
  Eigen::Index filled = 0;
  auto flush = [&] {
    if (filled == 0) return;
    const auto ys = y_sens.leftCols(filled);
    h.selfadjointView<Eigen::Lower>().rankUpdate(ys);
    g.noalias() -= ys * resid_block.head(filled);
    filled = 0;
  };
  double cost = 0.0;

  for (Eigen::Index k = 0; k < steps; ++k) {
    const auto u = data.inputs.col(k);
    y_hat.noalias() = c_mat.lazyProduct(x);
    y_hat.noalias() += d_mat.lazyProduct(u);
    if (!y_hat.allFinite()) throw SimulationOverflow(static_cast<std::size_t>(k));

    // The residual Jacobian is the negated output sensitivity.
    auto block = y_sens.middleCols(filled, ny);
    block.topRows(n_ab).noalias() = sens.transpose().lazyProduct(c_mat.transpose());
    block.bottomRows(n_theta - n_ab).setZero();
    for (int i = 0; i < ny; ++i) {
      block.col(i).segment(n_ab + i * nx, nx) = x;
      block.col(i).segment(n_ab + n_c + i * nu, nu) = u;
    }
    auto r = resid_block.segment(filled, ny);
    r = data.outputs.col(k) - y_hat;
    cost += r.squaredNorm();
    filled += ny;
    if (filled == y_sens.cols()) flush();

    sens_next.noalias() = a_mat.lazyProduct(sens);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nx; ++j) sens_next(i, i * nx + j) += x(j);
      for (int j = 0; j < nu; ++j) sens_next(i, n_a + i * nu + j) += u(j);
    }
    sens.swap(sens_next);

    x_next.noalias() = a_mat.lazyProduct(x);
    x_next.noalias() += b_mat.lazyProduct(u);
    x.swap(x_next);
  }

  flush();
  NormalEquations out;
  out.hessian = h.selfadjointView<Eigen::Lower>();
  out.gradient = g;
  out.cost = cost;
  if (!out.hessian.allFinite() || !out.gradient.allFinite() || !std::isfinite(cost)) {
    throw SimulationOverflow(static_cast<std::size_t>(steps - 1));
  }
  return out;
}

ResidualJacobian residual_jacobian(const StateSpaceModel& model,
                                   const TimeSeriesDataset& data) {
  check_compatible(model, data);
  const int nx = model.nx(), nu = model.nu(), ny = model.ny();
  const Eigen::Index steps = data.length();
  require(steps > 0, "residual_jacobian: empty dataset");

  const int n_a = nx * nx;
  const int n_ab = n_a + nx * nu;
  const int n_c = ny * nx;
  const int n_theta = parameter_count(nx, nu, ny);

  ResidualJacobian out;
  out.residual.resize(ny * steps);
  out.jacobian.setZero(ny * steps, n_theta);

  const Matrix& A = model.A();
  const Matrix& B = model.B();
  const Matrix& C = model.C();
  const Matrix& D = model.D();

  Vector x = Vector::Zero(nx);
  Matrix sens = Matrix::Zero(nx, n_ab);  // d x[k] / d (A, B entries)
  Matrix next_sens(nx, n_ab);

  for (Eigen::Index k = 0; k < steps; ++k) {
    const auto u = data.inputs.col(k);
    const Vector y_hat = C * x + D * u;
    if (!y_hat.allFinite() || !x.allFinite()) {
      throw SimulationOverflow(static_cast<std::size_t>(k));
    }
    const Eigen::Index row0 = k * ny;
    out.residual.segment(row0, ny) = data.outputs.col(k) - y_hat;

    // Residual sensitivities are the negated output sensitivities.
    auto rows = out.jacobian.middleRows(row0, ny);
    rows.leftCols(n_ab).noalias() = -C * sens;
    for (int i = 0; i < ny; ++i) {
      for (int j = 0; j < nx; ++j) rows(i, n_ab + i * nx + j) = -x(j);
      for (int j = 0; j < nu; ++j) rows(i, n_ab + n_c + i * nu + j) = -u(j);
    }

    next_sens.noalias() = A * sens;
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nx; ++j) next_sens(i, i * nx + j) += x(j);
      for (int j = 0; j < nu; ++j) next_sens(i, n_a + i * nu + j) += u(j);
    }
    sens.swap(next_sens);
    Vector next_x = A * x + B * u;
    x.swap(next_x);
  }
  if (!out.jacobian.allFinite()) {
    throw SimulationOverflow(static_cast<std::size_t>(steps - 1));
  }
  return out;
}

LocalUpdateResult local_update(const StateSpaceModel& model,
                               const TimeSeriesDataset& data,
                               const PemSettings& settings) {
  validate(settings);
  check_compatible(model, data);
  const int nx = model.nx(), nu = model.nu(), ny = model.ny();

  LocalUpdateResult result{model};
  double cost = simulation_cost(model, data);
  result.initial_cost = cost;
  result.final_cost = cost;
  if (settings.iterations == 0) return result;
  if (!std::isfinite(cost)) {
    result.stalled = true;
    return result;
  }

  Vector theta = pack_parameters(model);
  double damping = settings.damping_init;

  for (int step = 0; step < settings.iterations; ++step) {
    NormalEquations ne;
    try {
      ne = normal_equations(result.model, data);
    } catch (const SimulationOverflow&) {
      result.stalled = true;
      break;
    }
    const Matrix& hessian = ne.hessian;
    const Vector& gradient = ne.gradient;
    // Marquardt scaling with a floor so that parameters with vanishing
    // curvature still receive some damping.
    const Vector diag = hessian.diagonal();
    const double floor = std::max(diag.maxCoeff() * 1e-12, 1e-300);
    const Vector scale = diag.cwiseMax(floor);

    bool accepted = false;
    while (damping <= settings.damping_max) {
      Matrix damped = hessian;
      damped.diagonal() += damping * scale;
      const Vector delta = -damped.ldlt().solve(gradient);
      if (delta.allFinite()) {
        const Vector trial_theta = theta + delta;
        const StateSpaceModel trial = unpack_parameters(trial_theta, nx, nu, ny);
        const double trial_cost = simulation_cost(trial, data);
        if (trial_cost < cost * (1.0 - settings.min_step_decrease)) {
          theta = trial_theta;
          result.model = trial;
          cost = trial_cost;
          damping = std::max(damping / settings.damping_scale, 1e-15);
          accepted = true;
          break;
        }
      }
      damping *= settings.damping_scale;
    }
    if (!accepted) {
      result.stalled = true;
      break;
    }
    ++result.accepted_steps;
  }
  result.final_cost = cost;
  return result;
}

StateSpaceModel init_model(int nx, int nu, int ny, Rng& rng) {
  require(nx > 0 && nu > 0 && ny > 0, "init_model: dimensions must be positive");
  Matrix a;
  double rho = 0.0;
  do {
    a = gaussian_matrix(rng, nx, nx, 1.0);
    rho = spectral_radius(a);
  } while (rho == 0.0);
  a *= 0.5 / rho;
  Matrix b = gaussian_matrix(rng, nx, nu, 0.1);
  Matrix c = gaussian_matrix(rng, ny, nx, 0.1);
  Matrix d = gaussian_matrix(rng, ny, nu, 0.1);
  return StateSpaceModel(std::move(a), std::move(b), std::move(c), std::move(d));
}

}  // namespace fedsysid
