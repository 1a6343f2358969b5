#include <gtest/gtest.h>

#include "fedsysid/alignment.hpp"
#include "fedsysid/error.hpp"
#include "support.hpp"

using namespace fedsysid;
using testutil::error_code;

namespace {

// Controllability matrix built column by column with explicit powers.
Matrix oracle_controllability(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows(), m = b.cols();
  Matrix out(n, n * m);
  Matrix power = Matrix::Identity(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < m; ++l) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) acc += power(i, j) * b(j, l);
        out(i, k * m + l) = acc;
      }
    }
    power = power * a;
  }
  return out;
}

// Eq. 4 style pair for a1..a3: companion form and its transpose.
StateSpaceModel ccf_of(const std::vector<double>& a) {
  return testutil::ccf_model(a, {1.0, 0.4, -0.3});
}

StateSpaceModel ocf_of(const std::vector<double>& a) {
  const auto c = ccf_of(a);
  return {c.A().transpose(), c.C().transpose(), c.B().transpose(), c.D()};
}

// Random model whose first input reaches every state.
StateSpaceModel random_mimo(std::mt19937_64& rng, int nx, int nu, int ny) {
  return testutil::random_stable_model(rng, nx, nu, ny, 0.8);
}

Matrix random_well_conditioned(std::mt19937_64& rng, int n) {
  for (;;) {
    Matrix t = Matrix::Identity(n, n) + 0.4 * testutil::random_matrix(rng, n, n);
    if (condition_number(t) < 20.0) return t;
  }
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Controllability, ZeroStateMatrix) {
  Matrix b(3, 2);
  b << 1, 2, 3, 4, 5, 6;
  const StateSpaceModel m(Matrix::Zero(3, 3), b, Matrix::Ones(1, 3), Matrix::Zero(1, 2));
  const Matrix p = controllability_matrix(m);
  ASSERT_EQ(p.rows(), 3);
  ASSERT_EQ(p.cols(), 6);
  EXPECT_EQ(p.leftCols(2), b);
  EXPECT_EQ(max_abs(p.rightCols(4)), 0.0);
}

TEST(Controllability, TwoStateHandExample) {
  Matrix a(2, 2), b(2, 1), expected(2, 2);
  a << 0, 1, 0, 0;
  b << 0, 1;
  expected << 0, 1, 1, 0;
  const StateSpaceModel m(a, b, Matrix::Ones(1, 2), Matrix::Zero(1, 1));
  EXPECT_EQ(controllability_matrix(m), expected);
}

TEST(Controllability, MatchesPowerOracleAndCompanionIsFullRank) {
  std::mt19937_64 rng(1);
  for (int n = 1; n <= 5; ++n) {
    const auto m = random_mimo(rng, n, 2, 1);
    EXPECT_LT(max_abs(controllability_matrix(m) - oracle_controllability(m.A(), m.B())), 1e-12);
    std::vector<double> a(n);
    for (auto& v : a) v = std::normal_distribution<double>(0.0, 0.3)(rng);
    const auto c = testutil::ccf_model(a, std::vector<double>(n, 1.0));
    EXPECT_EQ(numerical_rank(controllability_matrix(c)), n);
  }
}

TEST(CcfCoefficients, HankelLayout) {
  Vector a(3);
  a << 0.2, -0.5, 0.7;
  Matrix expected(3, 3);
  expected << -0.5, 0.2, 1, 0.2, 1, 0, 1, 0, 0;
  EXPECT_EQ(ccf_coefficient_matrix(a), expected);
}

// P W = I for companion systems, checked against the power oracle.
TEST(CcfCoefficients, InvertsCompanionControllability) {
  std::mt19937_64 rng(2);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a(n);
      for (auto& v : a) v = std::normal_distribution<double>(0.0, 0.5)(rng);
      const auto m = testutil::ccf_model(a, std::vector<double>(n, 1.0));
      const Vector coeffs = Eigen::Map<const Vector>(a.data(), n);
      const Matrix pw = oracle_controllability(m.A(), m.B()) * ccf_coefficient_matrix(coeffs);
      EXPECT_LT(max_abs(pw - Matrix::Identity(n, n)), 1e-8) << "n=" << n;
    }
  }
}

TEST(CcfStructure, CompanionIsZeroObservableFormIsNot) {
  const std::vector<double> a{-1.2, 0.47, -0.06};
  EXPECT_EQ(ccf_structure_error(ccf_of(a)), 0.0);
  const auto ocf = ocf_of(a);
  const StateSpaceModel with_unit_b(ocf.A(), ccf_of(a).B(), ocf.C(), ocf.D());
  EXPECT_GT(ccf_structure_error(with_unit_b), 0.0);
  EXPECT_GT(ccf_structure_error(ocf), 0.0);
}

TEST(ToCcfSiso, CompanionInputGivesIdentity) {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 5; ++n) {
    std::vector<double> a(n), c(n);
    for (auto& v : a) v = std::normal_distribution<double>(0.0, 0.4)(rng);
    for (auto& v : c) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    const auto t = to_ccf_siso(testutil::ccf_model(a, c));
    EXPECT_LT(max_abs(t.T - Matrix::Identity(n, n)), 1e-8);
  }
}

TEST(ToCcfSiso, ObservableFormMapsToCompanionMatrix) {
  const std::vector<double> a{-1.2, 0.47, -0.06};
  const auto aligned = apply_similarity(ocf_of(a), to_ccf_siso(ocf_of(a)));
  EXPECT_LT(max_abs(aligned.A() - ccf_of(a).A()), 1e-10);
  EXPECT_LT(ccf_structure_error(aligned), 1e-10);
}

TEST(ToCcfSiso, RandomModelsReachCanonicalPattern) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testutil::random_stable_model(rng, 3, 1, 1);
    const auto t = to_ccf_siso(m);
    const auto aligned = apply_similarity(m, t);
    EXPECT_LT(ccf_structure_error(aligned), 1e-8);
    // Last row of A holds -a3, -a2, -a1.
    const Vector coeffs = char_poly_coeffs(m.A());
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(aligned.A()(2, j), -coeffs(2 - j), 1e-8);
    if (t.kappa < 1e6) {
      const auto r = oracle::root_set_distance(eigenvalues(m), eigenvalues(aligned));
      EXPECT_LT(r, 1e-6);
    }
  }
}

TEST(ToCcfSiso, Errors) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 0.5;
  a(1, 1) = 0.5;
  Matrix b(2, 1);
  b << 1, 1;
  const StateSpaceModel uncontrollable(a, b, Matrix::Ones(1, 2), Matrix::Zero(1, 1));
  EXPECT_EQ(error_code([&] { to_ccf_siso(uncontrollable); }), ErrorCode::kUncontrollableModel);
  std::mt19937_64 rng(5);
  const auto two_inputs = random_mimo(rng, 3, 2, 1);
  EXPECT_EQ(error_code([&] { to_ccf_siso(two_inputs); }), ErrorCode::kContractViolation);
}

TEST(ToCcfMimo, IdentityConstruction) {
  const StateSpaceModel m(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                          Matrix::Zero(2, 2));
  const auto t = to_ccf_mimo(m, MuSpec{{1, 1}});
  EXPECT_LT(max_abs(t.T - Matrix::Identity(2, 2)), 1e-15);
}

TEST(ToCcfMimo, SingleInputMassMatchesSisoConstruction) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_mimo(rng, 4, 2, 2);
    const StateSpaceModel first(m.A(), m.B().col(0), m.C(), m.D().col(0));
    const StateSpaceModel second(m.A(), m.B().col(1), m.C(), m.D().col(1));
    const auto siso1 = to_ccf_siso(first);
    const auto siso2 = to_ccf_siso(second);
    const auto mimo1 = to_ccf_mimo(m, MuSpec{{4, 0}});
    const auto mimo2 = to_ccf_mimo(m, MuSpec{{0, 4}});
    EXPECT_LT(max_abs(mimo1.T - siso1.T), 1e-8 * std::max(1.0, max_abs(siso1.T)));
    EXPECT_LT(max_abs(mimo2.T - siso2.T), 1e-8 * std::max(1.0, max_abs(siso2.T)));
  }
}

// model_b = apply_similarity(model_a, T0), so both canonical forms agree
// exactly when T_a = T0 T_b.
TEST(ToCcfMimo, SimilarModelsShareCanonicalBasis) {
  std::mt19937_64 rng(7);
  for (const auto& mu : {std::vector<int>{2, 2}, {3, 1}, {1, 3}, {4, 0}}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = random_mimo(rng, 4, 2, 2);
      const Matrix t0 = random_well_conditioned(rng, 4);
      const auto b = apply_similarity(a, make_transform(t0));
      const auto ta = to_ccf_mimo(a, MuSpec{mu});
      const auto tb = to_ccf_mimo(b, MuSpec{mu});
      const Matrix composed = t0 * tb.T;
      EXPECT_LT(max_abs(ta.T - composed), 1e-6 * std::max(1.0, max_abs(ta.T)));
      const auto ca = apply_similarity(a, ta);
      const auto cb = apply_similarity(b, tb);
      EXPECT_LT(ca.max_abs_diff(cb), 1e-6 * std::max(1.0, max_abs(ca.A())));
    }
  }
}

TEST(ToCcfMimo, PreservesEigenvalues) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_mimo(rng, 4, 2, 2);
    const auto t = to_ccf_mimo(m, MuSpec{{2, 2}});
    if (t.kappa >= 1e6) continue;
    EXPECT_LT(oracle::root_set_distance(eigenvalues(m), eigenvalues(apply_similarity(m, t))),
              1e-6);
  }
}

TEST(ToCcfMimo, InvalidMu) {
  std::mt19937_64 rng(9);
  const auto m = random_mimo(rng, 4, 2, 2);
  EXPECT_EQ(error_code([&] { to_ccf_mimo(m, MuSpec{{2, 1}}); }), ErrorCode::kInvalidMu);
  EXPECT_EQ(error_code([&] { to_ccf_mimo(m, MuSpec{{5, -1}}); }), ErrorCode::kInvalidMu);
  EXPECT_EQ(error_code([&] { to_ccf_mimo(m, MuSpec{{4}}); }), ErrorCode::kInvalidMu);
  Matrix b = m.B();
  b.col(1).setZero();
  const StateSpaceModel dead_input(m.A(), b, m.C(), m.D());
  EXPECT_EQ(error_code([&] { to_ccf_mimo(dead_input, MuSpec{{2, 2}}); }),
            ErrorCode::kInvalidMu);
  EXPECT_NO_THROW(to_ccf_mimo(dead_input, MuSpec{{4, 0}}));
}

TEST(PseudoData, SuppliedInputsAreUsedVerbatim) {
  Matrix u(2, 5);
  u.setRandom();
  PseudoDataSpec spec;
  spec.inputs = u;
  Rng rng(1);
  EXPECT_EQ(pseudo_inputs(spec, 2, rng), u);
  EXPECT_EQ(error_code([&] { pseudo_inputs(spec, 3, rng); }), ErrorCode::kContractViolation);
}

TEST(PseudoData, GaussianDrawsHaveRequestedScale) {
  PseudoDataSpec spec;
  spec.length = 20000;
  spec.input_std = 0.1;
  Rng rng(2);
  const Matrix u = pseudo_inputs(spec, 2, rng);
  ASSERT_EQ(u.cols(), 20000);
  EXPECT_NEAR(std::sqrt(u.squaredNorm() / u.size()), 0.1, 0.002);
}

TEST(PseudoData, StatesFollowRecursionFromZero) {
  std::mt19937_64 rng(10);
  const auto m = random_mimo(rng, 3, 2, 1);
  const Matrix u = testutil::random_matrix(rng, 2, 30);
  const Matrix x = pseudo_states(m, u);
  Vector state = Vector::Zero(3);
  for (int k = 0; k < 30; ++k) {
    state = (m.A() * state + m.B() * u.col(k)).eval();
    EXPECT_LT((x.col(k) - state).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AlignOptimize, IdenticalModelsGiveIdentity) {
  std::mt19937_64 rng(11);
  const auto m = random_mimo(rng, 3, 1, 1);
  const std::vector<StateSpaceModel> models(4, m);
  PseudoDataSpec spec;
  spec.length = 200;
  Rng r(1);
  const auto ts = align_optimize(models, 2, spec, r);
  ASSERT_EQ(ts.size(), 4U);
  EXPECT_EQ(ts[2].T, Matrix::Identity(3, 3));
  for (const auto& t : ts) EXPECT_LT(max_abs(t.T - Matrix::Identity(3, 3)), 1e-8);
}

// model_i = apply_similarity(model_j, T0) has states x_i = T0^-1 x_j.
TEST(AlignOptimize, RecoversPlantedSimilarity) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int nx = 2 + trial % 3;
    const auto ref = random_mimo(rng, nx, 2, 2);
    const Matrix t0 = random_well_conditioned(rng, nx);
    const auto planted = apply_similarity(ref, make_transform(t0));
    const Matrix u = testutil::random_matrix(rng, 2, 100);
    const auto ts = align_optimize({ref, planted}, 0, u);
    const Matrix expected = t0.inverse();
    EXPECT_LT(max_abs(ts[1].T - expected), 1e-6);
    // Moving the planted model into the reference basin recovers it.
    EXPECT_LT(apply_similarity(planted, ts[1]).max_abs_diff(ref), 1e-6);
  }
}

TEST(AlignOptimize, SquareSystemInterpolatesExactly) {
  std::mt19937_64 rng(13);
  const auto a = random_mimo(rng, 3, 1, 1);
  const auto b = random_mimo(rng, 3, 1, 1);
  const Matrix u = testutil::random_matrix(rng, 1, 3);
  const auto ts = align_optimize({a, b}, 0, u);
  const Matrix residual = pseudo_states(b, u) - ts[1].T * pseudo_states(a, u);
  EXPECT_LT(max_abs(residual), 1e-8);
}

TEST(AlignOptimize, Errors) {
  std::mt19937_64 rng(14);
  const auto a = random_mimo(rng, 3, 1, 1);
  const Matrix short_inputs = testutil::random_matrix(rng, 1, 2);
  EXPECT_EQ(error_code([&] { align_optimize({a, a}, 0, short_inputs); }),
            ErrorCode::kDegeneratePseudoData);
  const Matrix u = testutil::random_matrix(rng, 1, 50);
  EXPECT_EQ(error_code([&] { align_optimize({a, a}, 2, u); }), ErrorCode::kContractViolation);
  // A reference that never leaves the origin is not persistently exciting.
  const StateSpaceModel silent(a.A(), Matrix::Zero(3, 1), a.C(), a.D());
  EXPECT_EQ(error_code([&] { align_optimize({silent, a}, 0, u); }),
            ErrorCode::kDegeneratePseudoData);
  // A target that never moves yields a singular transform.
  EXPECT_EQ(error_code([&] { align_optimize({a, silent}, 0, u); }),
            ErrorCode::kSingularTransform);
}
