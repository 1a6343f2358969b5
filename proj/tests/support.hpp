#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library except for type conversions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedsysid/error.hpp"
#include "fedsysid/state_space.hpp"
#include "fedsysid/time_series.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const fedsysid::Matrix& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

/// Plain nested-loop free run from x1.
inline Grid simulate(const Grid& a, const Grid& b, const Grid& c, const Grid& d,
                     const Grid& u, std::vector<double> x) {
  const std::size_t nx = a.size(), nu = u.size(), ny = c.size();
  const std::size_t k_max = u.empty() ? 0 : u[0].size();
  Grid y(ny, std::vector<double>(k_max, 0.0));
  for (std::size_t k = 0; k < k_max; ++k) {
    for (std::size_t p = 0; p < ny; ++p) {
      double acc = 0.0;
      for (std::size_t i = 0; i < nx; ++i) acc += c[p][i] * x[i];
      for (std::size_t j = 0; j < nu; ++j) acc += d[p][j] * u[j][k];
      y[p][k] = acc;
    }
    std::vector<double> next(nx, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < nx; ++l) acc += a[i][l] * x[l];
      for (std::size_t j = 0; j < nu; ++j) acc += b[i][j] * u[j][k];
      next[i] = acc;
    }
    x = next;
  }
  return y;
}

/// Roots of the monic polynomial z^n + c[0] z^(n-1) + ... + c[n-1] by the
/// Durand-Kerner iteration.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& c) {
  const std::size_t n = c.size();
  auto eval = [&](std::complex<double> z) {
    std::complex<double> v = 1.0;
    for (double ci : c) v = v * z + ci;
    return v;
  };
  double radius = 1.0;
  for (double ci : c) radius = std::max(radius, 1.0 + std::abs(ci));
  std::vector<std::complex<double>> z(n);
  const std::complex<double> seed(0.4, 0.9);
  for (std::size_t i = 0; i < n; ++i) z[i] = radius * std::pow(seed, static_cast<double>(i));
  for (int it = 0; it < 2000; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::complex<double> den = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const auto step = eval(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-15) break;
  }
  return z;
}

/// Coefficients a1..an of prod (z - r_i) for real roots.
inline std::vector<double> poly_from_roots(const std::vector<double>& roots) {
  std::vector<double> p{1.0};
  for (double r : roots) {
    std::vector<double> q(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      q[i] += p[i];
      q[i + 1] -= r * p[i];
    }
    p = q;
  }
  return {p.begin() + 1, p.end()};
}

/// Minimum distance matching between two root sets (greedy, small n).
inline double root_set_distance(std::vector<std::complex<double>> a,
                                std::vector<std::complex<double>> b) {
  double worst = 0.0;
  for (const auto& x : a) {
    auto best = std::min_element(b.begin(), b.end(), [&](auto p, auto q) {
      return std::abs(p - x) < std::abs(q - x);
    });
    worst = std::max(worst, std::abs(*best - x));
    b.erase(best);
  }
  return worst;
}

/// Two-sided exact rank-sum p-value by enumerating every assignment of
/// ranks to the first sample (no ties).
inline double ranksum_enumerate(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t m = a.size(), n = b.size(), total = m + n;
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  auto rank_of = [&](double v) {
    return static_cast<double>(std::lower_bound(all.begin(), all.end(), v) - all.begin()) + 1.0;
  };
  double observed = 0.0;
  for (double v : a) observed += rank_of(v);
  const double u_obs = observed - static_cast<double>(m * (m + 1)) / 2.0;

  double lower = 0.0, upper = 0.0, count = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << total); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != m) continue;
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < total; ++i)
      if (mask >> i & 1U) rank_sum += static_cast<double>(i + 1);
    const double u = rank_sum - static_cast<double>(m * (m + 1)) / 2.0;
    count += 1.0;
    if (u <= u_obs) lower += 1.0;
    if (u >= u_obs) upper += 1.0;
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / count);
}

/// BFR straight from its definition.
inline double bfr(const std::vector<double>& y, const std::vector<double>& yhat) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    den += (y[i] - mean) * (y[i] - mean);
  }
  return 100.0 * (1.0 - std::sqrt(num) / std::sqrt(den));
}

}  // namespace oracle

namespace testutil {

inline fedsysid::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                      double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  fedsysid::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

/// Stable random model with spectral radius `rho`.
inline fedsysid::StateSpaceModel random_stable_model(std::mt19937_64& rng, int nx, int nu,
                                                     int ny, double rho = 0.8) {
  fedsysid::Matrix a = random_matrix(rng, nx, nx);
  const auto ev = a.eigenvalues();
  double r = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) r = std::max(r, std::abs(ev(i)));
  a *= rho / r;
  return {a, random_matrix(rng, nx, nu), random_matrix(rng, ny, nx), random_matrix(rng, ny, nu)};
}

/// Companion-form A (last row -an .. -a1), B = e_n, given C.
inline fedsysid::StateSpaceModel ccf_model(const std::vector<double>& a,
                                           const std::vector<double>& c) {
  const int n = static_cast<int>(a.size());
  fedsysid::Matrix am = fedsysid::Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) am(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) am(n - 1, j) = -a[n - 1 - j];
  fedsysid::Matrix b = fedsysid::Matrix::Zero(n, 1);
  b(n - 1, 0) = 1.0;
  fedsysid::Matrix cm(1, n);
  for (int j = 0; j < n; ++j) cm(0, j) = c[j];
  return {am, b, cm, fedsysid::Matrix::Zero(1, 1)};
}

/// Input/output data produced by the oracle simulator.
inline fedsysid::TimeSeriesDataset make_data(const fedsysid::StateSpaceModel& m,
                                             Eigen::Index k, std::uint64_t seed,
                                             double noise = 0.0) {
  std::mt19937_64 rng(seed);
  fedsysid::Matrix u = random_matrix(rng, m.nu(), k);
  const auto y = oracle::simulate(oracle::to_grid(m.A()), oracle::to_grid(m.B()),
                                  oracle::to_grid(m.C()), oracle::to_grid(m.D()),
                                  oracle::to_grid(u), std::vector<double>(m.nx(), 0.0));
  fedsysid::Matrix ym(m.ny(), k);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int p = 0; p < m.ny(); ++p)
    for (Eigen::Index t = 0; t < k; ++t) ym(p, t) = y[p][t] + noise * n(rng);
  return {u, ym};
}

/// Error code thrown by fn, or nullopt when it returns normally.
template <class F>
std::optional<fedsysid::ErrorCode> error_code(F&& fn) {
  try {
    fn();
  } catch (const fedsysid::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fedsysid_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
