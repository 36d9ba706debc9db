// Numerics, model validation, QP, pencil analysis and structured reduction.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "phtp/decomp.hpp"
#include "phtp/examples.hpp"
#include "phtp/ocp.hpp"
#include "phtp/pencil.hpp"
#include "phtp/qp.hpp"
#include "support/random_systems.hpp"

using namespace phtp;
using namespace phtp::testing;

namespace {

Matrix mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

Vector vec(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d;
}

Matrix jordan(Eigen::Index n) {
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  return a;
}

const Matrix kMsdR = mat(3, 3, {1, 1, 0, 1, 1, 0, 0, 0, 0});

// The 2×2 example with a conservative and a dissipative direction.
Matrix dh_example() { return mat(2, 2, {-2, 1, -1, 0}); }

bool same_span(const SubspaceBasis& a, const Matrix& cols, double tol = 1e-9) {
  const SubspaceBasis b = SubspaceBasis::span_of(cols);
  return a.dim() == b.dim() && (a.projector() - b.projector()).norm() <= tol;
}

}  // namespace

// ---------------------------------------------------------------------------
// numerics

TEST(Rank, TrivialAndKalman) {
  EXPECT_EQ(rank(Matrix::Identity(3, 3), 1e-10), 3);
  EXPECT_EQ(rank(Matrix::Zero(2, 2), 1e-10), 0);
  const PhOdeSystem s = examples::msd_system();
  const Matrix A = s.A(), B = s.B;
  Matrix K(3, 3);
  K << B, A * B, A * A * B;
  // By hand: [B, AB, A²B] = [[1,−1,1],[0,−1,3],[0,−1,0]], det = 3.
  EXPECT_NEAR(K.determinant(), 3.0, 1e-12);
  EXPECT_EQ(rank(K, 1e-10), 3);
}

TEST(Nullspace, MsdDampingKernel) {
  const SubspaceBasis k = nullspace(kMsdR);
  EXPECT_TRUE(same_span(k, mat(3, 2, {1, 0, -1, 0, 0, 1})));
  EXPECT_TRUE(nullspace(Matrix::Identity(4, 4)).is_trivial());
}

TEST(Nullspace, RobotDissipationKernelIsFirstThreeAxes) {
  const PhDaeSystem r = examples::robot_system();
  const SubspaceBasis k = nullspace(r.R * r.Q);
  Matrix e = Matrix::Zero(5, 3);
  e.topRows(3).setIdentity();
  EXPECT_TRUE(same_span(k, e));
}

TEST(Subspace, IntersectCoordinatePlanes) {
  const auto a = SubspaceBasis::span_of(mat(3, 2, {1, 0, 0, 1, 0, 0}));
  const auto b = SubspaceBasis::span_of(mat(3, 2, {0, 0, 1, 0, 0, 1}));
  EXPECT_TRUE(same_span(subspace_intersect({a, b}), mat(3, 1, {0, 1, 0})));
  const auto full = SubspaceBasis::full(3);
  EXPECT_TRUE(same_span(subspace_intersect({a, full}), a.basis()));
}

TEST(Subspace, DistanceExamples) {
  const auto e2 = SubspaceBasis::span_of(mat(2, 1, {0, 1}));
  EXPECT_NEAR(dist_to_subspace(vec({1, 0}), e2), 1.0, 1e-14);
  EXPECT_NEAR(dist_to_subspace(vec({0, 3}), e2), 0.0, 1e-14);
  EXPECT_NEAR(dist_to_subspace(vec({1, 1, 1}), nullspace(kMsdR)),
              std::sqrt(2.0), 1e-12);
}

TEST(RealSchur, Examples) {
  const RealSchur d = real_schur(diag({-1, -2}));
  ASSERT_EQ(d.eigenvalues.size(), 2u);
  EXPECT_NEAR(d.eigenvalues[0].real(), -2.0, 1e-12);
  EXPECT_NEAR(d.eigenvalues[1].real(), -1.0, 1e-12);
  const RealSchur r = real_schur(mat(2, 2, {0, 1, -1, 0}));
  for (const auto& z : r.eigenvalues) {
    EXPECT_NEAR(z.real(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(z.imag()), 1.0, 1e-12);
  }
  // det(sI − A) = s³ + 2s² + 2s + 4 = (s + 2)(s² + 2) for the msd A.
  const RealSchur m = real_schur(examples::msd_system().A());
  std::vector<Complex> ev = m.eigenvalues;
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_NEAR(ev[0].real(), -2.0, 1e-10);
  EXPECT_NEAR(ev[1].real(), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(ev[1].imag()), std::sqrt(2.0), 1e-10);
}

TEST(RealSchur, ReconstructionOnRandomMatrices) {
  Rng rng(11);
  for (int c = 0; c < 40; ++c) {
    const Eigen::Index n = uniform_int(rng, 2, 10);
    const Matrix a = randn(rng, n, n);
    const RealSchur s = real_schur(a);
    EXPECT_LE((s.Z * s.T * s.Z.transpose() - a).norm(), 1e-8 * a.norm());
    EXPECT_LE((s.Z.transpose() * s.Z - Matrix::Identity(n, n)).norm(), 1e-9);
  }
}

TEST(Expm, ClosedForms) {
  EXPECT_LE((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-15);
  const Matrix e = expm(diag({1.0, -2.0, 0.5}), 0.7);
  EXPECT_NEAR(e(0, 0), std::exp(0.7), 1e-13);
  EXPECT_NEAR(e(1, 1), std::exp(-1.4), 1e-13);
  EXPECT_NEAR(e(2, 2), std::exp(0.35), 1e-13);
  EXPECT_LE((expm(jordan(2)) - mat(2, 2, {1, 1, 0, 1})).norm(), 1e-14);
}

TEST(Expm, Semigroup) {
  Rng rng(12);
  std::uniform_real_distribution<double> ud(0.0, 2.0);
  for (int c = 0; c < 30; ++c) {
    const Eigen::Index n = uniform_int(rng, 2, 6);
    const Matrix a = randn(rng, n, n) - 3.0 * Matrix::Identity(n, n);
    const double s = ud(rng), t = ud(rng);
    const Matrix lhs = expm(a, s + t), rhs = expm(a, s) * expm(a, t);
    EXPECT_LE((lhs - rhs).norm(), 1e-8 * std::max(1.0, lhs.norm()));
  }
}

TEST(PsdSqrt, Examples) {
  EXPECT_LE((psd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(),
            1e-12);
  EXPECT_LE((psd_sqrt(diag({4, 0})) - diag({2, 0})).norm(), 1e-12);
  const double h = std::sqrt(2.0) / 2.0;
  const Matrix expected = mat(3, 3, {h, h, 0, h, h, 0, 0, 0, 0});
  EXPECT_LE((psd_sqrt(kMsdR) - expected).norm(), 1e-12);
}

TEST(Eigen, MinPositiveEigenvalue) {
  EXPECT_NEAR(min_positive_eigenvalue(diag({3, 0, 5})), 3.0, 1e-12);
  EXPECT_NEAR(min_positive_eigenvalue(kMsdR), 2.0, 1e-12);
  const PhDaeSystem r = examples::robot_system();
  const double root = (47.0 - std::sqrt(47.0 * 47.0 - 4.0 * 440.0)) / 2.0;
  EXPECT_NEAR(min_positive_eigenvalue(r.Q.transpose() * r.R * r.Q), root,
              1e-10);
}

TEST(Eigen, KernelDistanceSandwich) {
  Rng rng(13);
  for (int c = 0; c < 50; ++c) {
    const Eigen::Index n = uniform_int(rng, 2, 7);
    const Matrix M = random_psd(rng, n, uniform_int(rng, 1, static_cast<int>(n)));
    const SubspaceBasis k = nullspace(M);
    const Vector x = randn(rng, n, 1);
    const double d2 = std::pow(dist_to_subspace(x, k), 2);
    const double q = x.dot(M * x);
    const double lo = min_positive_eigenvalue(M) * d2;
    const double hi = max_positive_eigenvalue(M) * d2;
    EXPECT_LE(lo, q * (1.0 + 1e-8) + 1e-12);
    EXPECT_LE(q, hi * (1.0 + 1e-8) + 1e-12);
  }
}

TEST(Lyapunov, SolvesStableEquation) {
  Rng rng(14);
  for (int c = 0; c < 10; ++c) {
    const Eigen::Index n = uniform_int(rng, 2, 6);
    const Matrix a = randn(rng, n, n) - 4.0 * Matrix::Identity(n, n);
    const Matrix q = random_spd(rng, n);
    const Matrix x = solve_lyapunov(a, q);
    EXPECT_LE((a * x + x * a.transpose() - q).norm(), 1e-9 * q.norm());
  }
}

// ---------------------------------------------------------------------------
// model

TEST(Validate, MsdIsValidWithBlockW) {
  const PhOdeSystem s = examples::msd_system();
  const auto v = validate_ph_ode(s.J, s.R, s.Q, s.B, s.P, s.D);
  ASSERT_TRUE(v.ok());
  Matrix W = Matrix::Zero(4, 4);
  W.topLeftCorner(3, 3) = kMsdR;
  EXPECT_EQ(v.system->W(), W);
}

TEST(Validate, ReportsViolations) {
  const PhOdeSystem s = examples::msd_system();
  Matrix J = Matrix::Zero(3, 3);
  J(0, 1) = J(1, 0) = 1.0;
  const auto v = validate_ph_ode(J, s.R, s.Q, s.B, s.P, s.D);
  ASSERT_FALSE(v.ok());
  EXPECT_NE(describe(v.violations).find("J not skew-symmetric"),
            std::string::npos);
  const auto q = validate_ph_ode(s.J, s.R, diag({1, -1, 1}), s.B, s.P, s.D);
  ASSERT_FALSE(q.ok());
  EXPECT_NE(describe(q.violations).find("Q not PSD"), std::string::npos);
}

TEST(Validate, FeedthroughCouplingMustKeepWPsd) {
  PhOdeSystem s = examples::msd_system();
  s.P = mat(3, 1, {0, 0, 1});  // S = 0 and R₃₃ = 0 cannot absorb P
  const auto v = validate_ph_ode(s.J, s.R, s.Q, s.B, s.P, s.D);
  ASSERT_FALSE(v.ok());
  EXPECT_NE(describe(v.violations).find("W not PSD"), std::string::npos);
}

TEST(Validate, RobotDaeIsValid) {
  const PhDaeSystem r = examples::robot_system();
  EXPECT_TRUE(validate_ph_dae(r.E, r.J, r.R, r.Q, r.B).ok());
}

TEST(Validate, IdempotentAndNonMutating) {
  Rng rng(15);
  const PhOdeSystem s = random_ph_ode(rng, 4, 2);
  const PhOdeSystem copy = s;
  const PhOdeSystem a = require_valid(validate_ph_ode(s.J, s.R, s.Q, s.B, s.P, s.D));
  const PhOdeSystem b = require_valid(validate_ph_ode(a.J, a.R, a.Q, a.B, a.P, a.D));
  EXPECT_EQ(a.W(), b.W());
  EXPECT_EQ(s.J, copy.J);
  EXPECT_EQ(s.R, copy.R);
}

TEST(Model, OutputAndHamiltonian) {
  const PhOdeSystem s = examples::msd_system();
  EXPECT_EQ(output_of(s, Vector::Zero(3), Vector::Zero(1)).norm(), 0.0);
  EXPECT_NEAR(output_of(s, Vector::Ones(3), vec({7}))(0), 1.0, 1e-15);
  EXPECT_NEAR(hamiltonian(s, Vector::Ones(3)), 1.5, 1e-15);
  PhOdeSystem f;
  f.J = f.R = Matrix::Zero(2, 2);
  f.Q = Matrix::Identity(2, 2);
  f.B = f.P = Matrix::Zero(2, 2);
  f.D = Matrix::Identity(2, 2);
  EXPECT_LE((output_of(f, Vector::Zero(2), vec({3, -4})) - vec({3, -4})).norm(),
            1e-15);
  const PhDaeSystem r = examples::robot_system();
  EXPECT_NEAR(hamiltonian(r, vec({1, 1, 0, 1, 0})), 3.05, 1e-14);
}

TEST(ControlSetTest, BoxAndBall) {
  const ControlSet b = ControlSet::box(vec({-1, -2}), vec({1, 2}));
  EXPECT_TRUE(b.contains(vec({1, -2})));
  EXPECT_FALSE(b.contains(vec({1.1, 0})));
  EXPECT_NEAR(b.ray_exit(vec({0, 1})), 2.0, 1e-14);
  const ControlSet c = ControlSet::ball(2, 3.0);
  EXPECT_TRUE(c.contains(vec({0, 3})));
  EXPECT_FALSE(c.interior(vec({0, 3}), 1e-6));
  EXPECT_THROW(ControlSet::box(vec({0.5}), vec({1})), ValidationError);
}

// ---------------------------------------------------------------------------
// qp

TEST(Qp, UnconstrainedIdentity) {
  QpProblem p;
  p.H = Matrix(Matrix::Identity(3, 3)).sparseView();
  const Vector g = vec({1, -2, 3});
  p.g = -g;
  p.A.resize(0, 3);
  p.b.resize(0);
  p.G.resize(0, 3);
  p.h.resize(0);
  const QpResult r = solve_qp(p);
  ASSERT_TRUE(r.converged);
  EXPECT_LE((r.z - g).norm(), 1e-9);
}

TEST(Qp, EqualityLeastSquaresMatchesKkt) {
  Rng rng(21);
  const Matrix C = randn(rng, 8, 5), A = randn(rng, 2, 5);
  const Vector d = randn(rng, 8, 1), b = randn(rng, 2, 1);
  QpProblem p;
  const Matrix H = C.transpose() * C;
  p.H = H.sparseView();
  p.g = -C.transpose() * d;
  p.A = A.sparseView();
  p.b = b;
  p.G.resize(0, 5);
  p.h.resize(0);
  const QpResult r = solve_qp(p);
  ASSERT_TRUE(r.converged);
  Matrix K = Matrix::Zero(7, 7);
  K.topLeftCorner(5, 5) = H;
  K.topRightCorner(5, 2) = A.transpose();
  K.bottomLeftCorner(2, 5) = A;
  Vector rhs(7);
  rhs << C.transpose() * d, b;
  const Vector ref = K.fullPivLu().solve(rhs).head(5);
  EXPECT_LE((r.z - ref).norm(), 1e-8 * (1.0 + ref.norm()));
}

TEST(Qp, ActiveBoxBound) {
  // min ½(z − 3)² s.t. z ≤ 1
  QpProblem p;
  p.H = Matrix(Matrix::Identity(1, 1)).sparseView();
  p.g = vec({-3});
  p.A.resize(0, 1);
  p.b.resize(0);
  p.G = Matrix(Matrix::Identity(1, 1)).sparseView();
  p.h = vec({1});
  const QpResult r = solve_qp(p);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.z(0), 1.0, 1e-7);
  EXPECT_NEAR(r.lambda(0), 2.0, 1e-6);
}

TEST(Qp, RankDeficientHessianAndDependentRows) {
  // Duplicated equality rows and a singular H.
  QpProblem p;
  p.H = Matrix(diag({1, 0, 0})).sparseView();
  p.g = Vector::Zero(3);
  const Matrix A = mat(2, 3, {1, 1, 1, 2, 2, 2});
  p.A = A.sparseView();
  p.b = vec({1, 2});
  p.G = Matrix(Matrix::Identity(3, 3)).sparseView();
  p.h = Vector::Constant(3, 5.0);
  const QpResult r = solve_qp(p);
  ASSERT_TRUE(r.converged) << r.status;
  EXPECT_NEAR(r.objective, 0.0, 1e-8);
  EXPECT_NEAR(r.z.sum(), 1.0, 1e-8);
}

// ---------------------------------------------------------------------------
// pencil

TEST(Wong, IdentityPencilHasIndexZero) {
  Rng rng(31);
  const Matrix A = randn(rng, 4, 4);
  const QuasiWeierstrass q = quasi_weierstrass(Matrix::Identity(4, 4), A);
  EXPECT_EQ(q.index, 0);
  EXPECT_EQ(q.n1(), 4);
  EXPECT_EQ(q.n2(), 0);
  // C similar to A: same characteristic polynomial coefficients
  EXPECT_NEAR(q.C.trace(), A.trace(), 1e-10);
  EXPECT_NEAR(q.C.determinant(), A.determinant(), 1e-9);
}

TEST(Wong, SingularEIndexOne) {
  const Matrix E = diag({1, 0}), A = Matrix::Identity(2, 2);
  const QuasiWeierstrass q = wong_sequences(E, A, 2.0, kRankTol);
  EXPECT_EQ(q.index, 1);
  EXPECT_TRUE(same_span(SubspaceBasis::from_orthonormal(q.Vb), mat(2, 1, {1, 0})));
  EXPECT_TRUE(same_span(SubspaceBasis::from_orthonormal(q.Wb), mat(2, 1, {0, 1})));
  EXPECT_LE(q.N.norm(), 1e-14);
  EXPECT_LE(qw_reconstruction_residual(q, E, A), 1e-12);
}

TEST(PencilIndex, Examples) {
  Rng rng(32);
  EXPECT_EQ(pencil_index(Matrix::Identity(3, 3), randn(rng, 3, 3)), 0);
  EXPECT_EQ(pencil_index(diag({1, 0}), Matrix::Identity(2, 2)), 1);
  EXPECT_EQ(pencil_index(jordan(2), Matrix::Identity(2, 2)), 2);
}

TEST(PencilIndex, RandomConstructionsAndProbeIndependence) {
  Rng rng(33);
  for (int c = 0; c < 40; ++c) {
    const int index = c % 4;
    const RandomPencil p = random_pencil(rng, uniform_int(rng, index + 1, 8), index);
    EXPECT_EQ(pencil_index(p.E, p.A), index);
    const QuasiWeierstrass q = quasi_weierstrass(p.E, p.A);
    EXPECT_EQ(q.n1(), p.n1);
    EXPECT_LE(qw_reconstruction_residual(q, p.E, p.A), 1e-8);
  }
}

TEST(Regular, Examples) {
  Rng rng(34);
  EXPECT_TRUE(is_regular(Matrix::Identity(3, 3), randn(rng, 3, 3)).regular);
  EXPECT_FALSE(is_regular(diag({1, 0}), diag({1, 0})).regular);
  const PhDaeSystem r = examples::robot_system();
  EXPECT_TRUE(is_regular(r.E, r.A()).regular);
  EXPECT_THROW(quasi_weierstrass(diag({1, 0}), diag({1, 0})), ValidationError);
}

TEST(DhChecks, RegularityCondition) {
  const PhDaeSystem r = examples::robot_system();
  EXPECT_TRUE(dh_regularity_check(r));
  PhDaeSystem z;
  z.E = z.J = z.R = Matrix::Zero(2, 2);
  z.Q = Matrix::Identity(2, 2);
  z.B = Matrix::Zero(2, 1);
  EXPECT_FALSE(dh_regularity_check(z));
  Rng rng(35);
  const PhOdeSystem o = random_ph_ode(rng, 3, 1);
  const PhDaeSystem e{Matrix::Identity(3, 3), o.J, o.R, o.Q, o.B};
  EXPECT_TRUE(dh_regularity_check(e));
  EXPECT_TRUE(dh_index_le1_check(e));
}

TEST(DhChecks, IndexConditionMatchesComputedIndex) {
  // Index-2 block s[[0,1],[0,0]] − I written as (J − R)Q with Q = J⁻¹.
  PhDaeSystem s;
  s.E = jordan(2);
  s.J = mat(2, 2, {0, 1, -1, 0});
  s.R = Matrix::Zero(2, 2);
  s.Q = mat(2, 2, {0, -1, 1, 0});
  s.B = Matrix::Zero(2, 1);
  ASSERT_LE((s.A() - Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_EQ(pencil_index(s.E, s.A()), 2);
  EXPECT_FALSE(dh_index_le1_check(s));
  // The robot pencil has index two: x₃ is determined by x₄, x₅ and then
  // differentiated once more. The index-one condition agrees.
  const PhDaeSystem r = examples::robot_system();
  EXPECT_EQ(pencil_index(r.E, r.A()), 2);
  EXPECT_FALSE(dh_index_le1_check(r));
}

TEST(DhMatrix, Examples) {
  const DhCertificate c = is_dh_matrix(dh_example());
  ASSERT_TRUE(c.dh);
  EXPECT_TRUE(witness_is_sound(c, dh_example()));
  EXPECT_LE(((c.J - c.R) * c.Q - dh_example()).norm(), 1e-9);

  const DhCertificate p = is_dh_matrix(diag({1, 0}));
  EXPECT_FALSE(p.dh);
  EXPECT_NE(std::find(p.violated.begin(), p.violated.end(), "i"), p.violated.end());

  const DhCertificate n = is_dh_matrix(jordan(3));
  EXPECT_FALSE(n.dh);
  EXPECT_NE(std::find(n.violated.begin(), n.violated.end(), "iii"),
            n.violated.end());
}

TEST(DhMatrix, NonSemisimpleImaginaryPairFails) {
  // [[R, I], [0, R]] with R the rotation generator: ±i with a Jordan chain.
  Matrix a = Matrix::Zero(4, 4);
  a.topLeftCorner(2, 2) = mat(2, 2, {0, 1, -1, 0});
  a.bottomRightCorner(2, 2) = mat(2, 2, {0, 1, -1, 0});
  a.topRightCorner(2, 2).setIdentity();
  const DhCertificate c = is_dh_matrix(a);
  EXPECT_FALSE(c.dh);
  EXPECT_NE(std::find(c.violated.begin(), c.violated.end(), "ii"),
            c.violated.end());
}

TEST(DhMatrix, RandomDhMatricesAreCertified) {
  Rng rng(36);
  for (int c = 0; c < 30; ++c) {
    const Eigen::Index n = uniform_int(rng, 2, 6);
    const Matrix J = random_skew(rng, n);
    const Matrix R = random_psd(rng, n, uniform_int(rng, 1, static_cast<int>(n)));
    const Matrix Q = random_spd(rng, n);
    const Matrix A = (J - R) * Q;
    const DhCertificate cert = is_dh_matrix(A);
    ASSERT_TRUE(cert.dh) << "case " << c;
    EXPECT_TRUE(witness_is_sound(cert, A));
  }
}

TEST(DhPencil, Examples) {
  EXPECT_TRUE(is_dh_pencil(Matrix::Identity(2, 2), dh_example()).dh);
  const PhDaeSystem r = examples::robot_system();
  const DhCertificate c = is_dh_pencil(r.E, r.A());
  EXPECT_TRUE(c.dh);
  for (const auto& [k, v] : c.conditions) EXPECT_TRUE(v) << k;
  const DhCertificate n = is_dh_pencil(Matrix::Identity(3, 3), jordan(3));
  EXPECT_FALSE(n.dh);
  EXPECT_NE(std::find(n.violated.begin(), n.violated.end(), "iv"),
            n.violated.end());
}

TEST(DaeIvp, IdentityEMatchesOdeSimulation) {
  Rng rng(37);
  const PhOdeSystem o = random_ph_ode(rng, 3, 1, {.feedthrough = false});
  const PhDaeSystem d{Matrix::Identity(3, 3), o.J, o.R, o.Q, o.B};
  const Matrix u = randn(rng, 1, 50);
  const Vector x0 = randn(rng, 3, 1);
  const Trajectory a = solve_dae_ivp(d, u, x0, 1.0);
  const Trajectory b = simulate_ode(o, u, x0, 1.0);
  EXPECT_LE((a.x - b.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DaeIvp, ZeroInputZeroStateStaysZero) {
  const PhDaeSystem r = examples::robot_system();
  const Trajectory t = solve_dae_ivp(r, Matrix::Zero(1, 100), Vector::Zero(5), 1.0);
  EXPECT_EQ(t.x.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DaeIvp, RobotEnergyNonIncreasingWithoutInput) {
  const PhDaeSystem r = examples::robot_system();
  const Trajectory t =
      solve_dae_ivp(r, Matrix::Zero(1, 500), vec({1, 1, 0, 1, 0}), 5.0);
  EXPECT_LE((r.E * t.x.col(0) - vec({1, 1, 0, 1, 0})).norm(), 1e-8);
  for (Eigen::Index k = 0; k + 1 < t.t.size(); ++k) {
    EXPECT_LE(hamiltonian(r, t.x.col(k + 1)), hamiltonian(r, t.x.col(k)) + 1e-12);
  }
}

TEST(DaeIvp, RefusesInconsistentStart) {
  const PhDaeSystem r = examples::robot_system();
  EXPECT_THROW(solve_dae_ivp(r, Matrix::Zero(1, 10), vec({0, 0, 1, 0, 0}), 1.0),
               ValidationError);
}

// ---------------------------------------------------------------------------
// decomp

TEST(Beattie, IdentityEIsTheIdentityReduction) {
  Rng rng(41);
  const PhOdeSystem o = random_ph_ode(rng, 3, 2, {.feedthrough = false});
  const PhDaeSystem d{Matrix::Identity(3, 3), o.J, o.R, o.Q, o.B};
  const BeattieReduction r = beattie_reduce(d);
  EXPECT_EQ(r.n1, 3);
  const Matrix A = r.reduced.A(), Bt = r.reduced.B_tilde();
  // Same input-output map up to the change of variables z = Uᵀx... compare A.
  EXPECT_LE((r.V * A - o.A() * r.V).norm(), 1e-9);
  EXPECT_LE(r.P_hat.norm(), 1e-12);
  EXPECT_LE(r.S_hat.norm(), 1e-12);
  EXPECT_LE(r.N_hat.norm(), 1e-12);
  EXPECT_LE((r.V * Bt - o.B).norm(), 1e-9);
}

TEST(Beattie, RecoverZ2Trivial) {
  Rng rng(42);
  const PhDaeSystem d = random_index1_dae(rng, 2, 2, 1);
  const BeattieReduction r = beattie_reduce(d);
  EXPECT_LE(recover_z2(r, Vector::Zero(2), Vector::Zero(1)).norm(), 1e-15);
}

TEST(Beattie, ReducedSystemIsValidAndEnergyIdentityHolds) {
  Rng rng(43);
  for (int c = 0; c < 20; ++c) {
    const Eigen::Index n1 = uniform_int(rng, 1, 4), n2 = uniform_int(rng, 1, 3);
    const PhDaeSystem d = random_index1_dae(rng, n1, n2, uniform_int(rng, 1, 2));
    const BeattieReduction r = beattie_reduce(d);
    const PhOdeSystem& s = r.reduced;
    EXPECT_TRUE(validate_ph_ode(s.J, s.R, s.Q, s.B, s.P, s.D).ok());
    EXPECT_LE((s.W() - r.W_hat).norm(), 1e-9 * (1.0 + r.W_hat.norm()));
    const Matrix qrq = d.Q.transpose() * d.R * d.Q;
    for (int p = 0; p < 10; ++p) {
      const Vector z1 = randn(rng, n1, 1), u = randn(rng, d.m(), 1);
      const Vector x = lift_state(r, z1, u);
      Vector zu(n1 + d.m());
      zu << z1, u;
      EXPECT_NEAR(x.dot(qrq * x), zu.dot(r.W_hat * zu), 1e-8 * (1.0 + x.squaredNorm()));
      // Lifted state satisfies the algebraic rows of the DAE.
      const Vector res = d.A() * x + d.B * u;
      const Vector alg = (Matrix::Identity(d.n(), d.n()) -
                          SubspaceBasis::span_of(d.E).projector()) * res;
      EXPECT_LE(alg.norm(), 1e-9 * (1.0 + res.norm()));
    }
  }
}

TEST(Beattie, LiftedTrajectoryHasSmallDaeResidual) {
  Rng rng(44);
  const PhDaeSystem d = random_index1_dae(rng, 3, 2, 1);
  const BeattieReduction r = beattie_reduce(d);
  const int N = 2000;
  const double T = 1.0, h = T / N;
  Matrix u(1, N);
  for (int k = 0; k < N; ++k) u(0, k) = std::sin(3.0 * k * h);
  const Trajectory z = simulate_ode(r.reduced, u, Vector::Ones(3), T);
  const Matrix x = lift_solution(r, z.x, z.u);
  double worst = 0.0;
  for (int k = 1; k < N; ++k) {
    const Vector dEx = d.E * (x.col(k + 1) - x.col(k - 1)) / (2.0 * h);
    const Vector uc = vec({std::sin(3.0 * k * h)});
    const Vector res = dEx - d.A() * x.col(k) - d.B * uc;
    worst = std::max(worst, res.norm());
  }
  // Piecewise-constant input vs central differences: O(h) at the switches.
  EXPECT_LE(worst, 5e-3);
}

TEST(Beattie, SteadyPointInKernelStaysConstant) {
  // Q annihilates the first differential coordinate, so A has a kernel.
  Rng rng(45);
  PhDaeSystem d;
  d.E = Matrix::Zero(3, 3);
  d.E(0, 0) = 1.5;
  d.E(1, 1) = 0.7;  // diagonal keeps QᵀE symmetric
  d.Q = Matrix::Identity(3, 3);
  d.Q(0, 0) = 0.0;
  d.J = random_skew(rng, 3);
  d.R = random_psd(rng, 3, 2);
  d.R(2, 2) += 1.0;
  d.B = randn(rng, 3, 1);
  ASSERT_TRUE(validate_ph_dae(d.E, d.J, d.R, d.Q, d.B).ok());
  const BeattieReduction r = beattie_reduce(d);
  const SubspaceBasis k = nullspace(r.reduced.A());
  ASSERT_FALSE(k.is_trivial());
  const Vector z = k.basis().col(0);
  const Trajectory t = simulate_ode(r.reduced, Matrix::Zero(1, 20), z, 1.0);
  const Matrix x = lift_solution(r, t.x, t.u);
  EXPECT_GT(x.col(0).norm(), 1e-3);
  EXPECT_LE((x.col(20) - x.col(0)).norm(), 1e-10);
}

TEST(Beattie, RefusesHigherIndex) {
  EXPECT_THROW(beattie_reduce(examples::robot_system()), std::exception);
}

TEST(QwReduce, RobotReductionReproducesDirectSolve) {
  const PhDaeSystem d = examples::robot_system();
  const QwReduction q = qw_reduce(d);
  EXPECT_EQ(q.n1(), 3);
  const int N = 400;
  Matrix u(1, N);
  for (int k = 0; k < N; ++k) u(0, k) = std::cos(0.01 * k);
  const Vector w0 = vec({1, 1, 0, 1, 0});
  const Trajectory direct = solve_dae_ivp(d, u, w0, 2.0);
  EXPECT_LE((d.E * direct.x.col(0) - w0).norm(), 1e-8);
  EXPECT_LE((q.lift(q.to_xi(d.E * direct.x.col(N)), u.rightCols(1)) -
             direct.x.col(N)).norm(), 1e-8);
}

TEST(SpectralSplit, Examples) {
  Rng rng(46);
  const Matrix J = random_skew(rng, 3);
  const SpectralSplit c = spectral_split(J, Matrix::Zero(3, 3), Matrix::Identity(3, 3));
  EXPECT_EQ(c.N1.dim(), 3);
  EXPECT_EQ(c.N2.dim(), 0);

  const PhOdeSystem m = examples::msd_system();
  const SpectralSplit s = spectral_split(m.J, m.R, m.Q);
  EXPECT_EQ(s.N1.dim(), 2);
  EXPECT_EQ(s.N2.dim(), 1);
  EXPECT_TRUE(same_span(s.N1, nullspace(m.R * m.Q).basis(), 1e-8));

  const SpectralSplit r = spectral_split(mat(2, 2, {0, 1, -1, 0}), diag({2, 0}),
                                         Matrix::Identity(2, 2));
  EXPECT_EQ(r.N1.dim(), 0);
  EXPECT_EQ(r.N2.dim(), 2);
}
