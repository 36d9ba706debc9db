#pragma once

// Structure-preserving reduction of a regular index-1 pH-DAE to a pH-ODE with
// feed-through, state recovery and the conservative/dissipative split.

#include <string>
#include <vector>

#include "phtp/model.hpp"
#include "phtp/pencil.hpp"

namespace phtp {

struct BeattieReduction {
  Matrix U, V;
  Eigen::Index n1 = 0;
  Matrix J11, J12, J21, J22, R11, R12, R21, R22, Q11, Q22, B1, B2;
  Matrix L21, L22;
  Matrix B_hat, P_hat, S_hat, N_hat, W_hat;
  PhOdeSystem reduced;
  /// Largest residual among the verified block identities.
  double residual = 0.0;

  Eigen::Index n() const { return U.rows(); }
  Eigen::Index n2() const { return n() - n1; }
  /// z₁⁰ = (Uᵀw)₁ for w ∈ im E.
  Vector to_z1(const Vector& w) const {
    return (U.transpose() * w).head(n1);
  }
  /// w = Ex = U^{-ᵀ}(z₁; 0).
  Vector to_w(const Vector& z1) const {
    Vector z = Vector::Zero(n());
    z.head(n1) = z1;
    return U.transpose().partialPivLu().solve(z);
  }
};

namespace detail {

inline Matrix orth_kernel(const Matrix& m, Eigen::Index cols, double tol) {
  if (m.rows() == 0) return Matrix::Identity(cols, cols);
  return nullspace(m, tol).basis();
}

inline void require_rcond(const Matrix& m, const char* what) {
  if (m.size() == 0) return;
  const double rc = rcond(m);
  if (rc < 1e-10) {
    throw NumericalError(std::string("beattie_reduce: ") + what +
                         " is numerically singular (rcond " +
                         std::to_string(rc) + ")");
  }
}

}  // namespace detail

/// Computes (U, V) with UᵀEV = diag(I, 0), U^{-1}QV = diag(Q11, Q22) and
/// R12 = J12, then the reduced feed-through ODE.
inline BeattieReduction beattie_reduce(const PhDaeSystem& sys,
                                       double tol = kRankTol) {
  if (!dh_regularity_check(sys, tol) || !dh_index_le1_check(sys, tol)) {
    throw ValidationError(
        "beattie_reduce: pencil is not regular with index at most one");
  }
  const Eigen::Index n = sys.n(), m = sys.m();
  const Matrix L = sys.J - sys.R;

  const Matrix V2 = nullspace(sys.E, tol).basis();
  const Eigen::Index n2 = V2.cols(), n1 = n - n2;
  const Matrix U2 = sys.Q * V2;
  const Matrix LQV2 = L * U2;
  const Matrix V1 = detail::orth_kernel(U2.transpose() * L.transpose() * sys.Q,
                                        n, tol);
  Matrix U1 = detail::orth_kernel(LQV2.transpose(), n, tol);
  if (V1.cols() != n1 || U1.cols() != n1) {
    throw NumericalError("beattie_reduce: complement dimensions do not match");
  }
  const Matrix G = U1.transpose() * sys.E * V1;
  detail::require_rcond(G, "U1^T E V1");
  U1 = U1 * G.inverse().transpose();

  BeattieReduction r;
  r.n1 = n1;
  r.U.resize(n, n);
  r.U << U1, U2;
  r.V.resize(n, n);
  r.V << V1, V2;
  detail::require_rcond(r.U, "U");
  detail::require_rcond(r.V, "V");

  const Matrix UJU = r.U.transpose() * sys.J * r.U;
  const Matrix URU = r.U.transpose() * sys.R * r.U;
  const Matrix UinvQV = r.U.partialPivLu().solve(sys.Q * r.V);
  const Matrix UB = r.U.transpose() * sys.B;
  r.J11 = UJU.topLeftCorner(n1, n1);
  r.J12 = UJU.topRightCorner(n1, n2);
  r.J21 = UJU.bottomLeftCorner(n2, n1);
  r.J22 = UJU.bottomRightCorner(n2, n2);
  r.R11 = URU.topLeftCorner(n1, n1);
  r.R12 = URU.topRightCorner(n1, n2);
  r.R21 = URU.bottomLeftCorner(n2, n1);
  r.R22 = URU.bottomRightCorner(n2, n2);
  r.Q11 = UinvQV.topLeftCorner(n1, n1);
  r.Q22 = UinvQV.bottomRightCorner(n2, n2);
  r.B1 = UB.topRows(n1);
  r.B2 = UB.bottomRows(n2);
  r.L21 = r.J21 - r.R21;
  r.L22 = r.J22 - r.R22;
  detail::require_rcond(r.L22, "J22 - R22");
  detail::require_rcond(r.Q22, "Q22");

  // Postconditions.
  const double se = std::max(1.0, norm2(sys.E));
  const double sq = std::max(1.0, norm2(sys.Q));
  const double sl = std::max(1.0, norm2(UJU) + norm2(URU));
  Matrix Eblk = Matrix::Zero(n, n);
  Eblk.topLeftCorner(n1, n1).setIdentity();
  const double res_e = norm2(r.U.transpose() * sys.E * r.V - Eblk) / se;
  Matrix qoff = UinvQV;
  qoff.topLeftCorner(n1, n1).setZero();
  qoff.bottomRightCorner(n2, n2).setZero();
  const double res_q = (qoff.size() ? norm2(qoff) : 0.0) / sq;
  const double res_12 = (n1 && n2) ? norm2(r.R12 - r.J12) / sl : 0.0;
  const double res_sym = symmetry_residual(r.Q11) / sq;
  r.residual = std::max({res_e, res_q, res_12, res_sym});
  if (r.residual > 1e-9) {
    throw NumericalError("beattie_reduce: block identities violated (residual " +
                         std::to_string(r.residual) + ")");
  }
  r.Q11 = 0.5 * (r.Q11 + r.Q11.transpose());
  r.R11 = 0.5 * (r.R11 + r.R11.transpose());
  r.J11 = 0.5 * (r.J11 - r.J11.transpose());

  if (n2 > 0) {
    Eigen::PartialPivLU<Matrix> l22(r.L22);
    Eigen::PartialPivLU<Matrix> l22t(Matrix(r.L22.transpose()));
    const Matrix l22t_b2 = l22t.solve(r.B2);
    const Matrix l22_b2 = l22.solve(r.B2);
    r.P_hat = -0.5 * r.L21.transpose() * l22t_b2;
    r.B_hat = r.B1 + r.P_hat;
    r.S_hat = -0.5 * r.B2.transpose() * (l22_b2 + l22t_b2);
    r.N_hat = -0.5 * r.B2.transpose() * (l22_b2 - l22t_b2);
    r.S_hat = 0.5 * (r.S_hat + r.S_hat.transpose());
  } else {
    r.P_hat = Matrix::Zero(n1, m);
    r.B_hat = r.B1;
    r.S_hat = Matrix::Zero(m, m);
    r.N_hat = Matrix::Zero(m, m);
  }
  r.reduced = PhOdeSystem{r.J11, r.R11, r.Q11, r.B_hat, r.P_hat,
                          r.S_hat + r.N_hat};
  r.W_hat = r.reduced.W();
  const double wdef = psd_deficit(r.W_hat);
  if (wdef > 1e-9 * std::max(1.0, norm2(r.W_hat))) {
    throw NumericalError("beattie_reduce: reduced W is not PSD");
  }
  return r;
}

/// z₂ = −Q22^{-1} L22^{-1} (L21 Q11 z₁ + B₂ u).
inline Vector recover_z2(const BeattieReduction& r, const Vector& z1,
                         const Vector& u) {
  if (z1.size() != r.n1 || u.size() != r.B2.cols()) {
    throw DimensionError("recover_z2: dimension mismatch");
  }
  if (r.n2() == 0) return Vector(0);
  const Vector rhs = r.L21 * (r.Q11 * z1) + r.B2 * u;
  return -r.Q22.partialPivLu().solve(r.L22.partialPivLu().solve(rhs));
}

inline Vector lift_state(const BeattieReduction& r, const Vector& z1,
                         const Vector& u) {
  Vector z(r.n());
  z << z1, recover_z2(r, z1, u);
  return r.V * z;
}

/// x(t_k) = V (z₁(t_k); z₂(t_k)); columns are grid samples.
inline Matrix lift_solution(const BeattieReduction& r, const Matrix& z1,
                            const Matrix& u) {
  if (z1.cols() != u.cols()) {
    throw DimensionError("lift_solution: grid mismatch");
  }
  Matrix x(r.n(), z1.cols());
  for (Eigen::Index k = 0; k < z1.cols(); ++k) {
    x.col(k) = lift_state(r, z1.col(k), u.col(k));
  }
  return x;
}

// ---------------------------------------------------------------------------
// Reduction through the quasi-Weierstrass form. Covers index 1 and higher
// index when the input does not reach the nilpotent chain (N·b_W = 0), so
// that x = V_b ξ − W_b b_W u involves no input derivatives.

struct QwReduction {
  QuasiWeierstrass q;
  Matrix bv, bw;  // S⁻¹B split along V ⊕ W
  Matrix EV;      // E·V_b, so Ex = EV·ξ
  LqModel model;

  Eigen::Index n1() const { return q.n1(); }

  /// ξ with E V_b ξ = w; throws if w violates the (hidden) constraints.
  Vector to_xi(const Vector& w) const {
    const Vector xi = EV.colPivHouseholderQr().solve(w);
    const double res = (EV * xi - w).norm();
    if (res > 1e-8 * (1.0 + w.norm())) {
      throw ValidationError(
          "w is not consistent with the algebraic constraints (residual " +
          std::to_string(res) + ")");
    }
    return xi;
  }
  Vector to_w(const Vector& xi) const { return EV * xi; }
  Vector lift_state(const Vector& xi, const Vector& u) const {
    return q.Vb * xi - q.Wb * (bw * u);
  }
  Matrix lift(const Matrix& xi, const Matrix& u) const {
    if (xi.cols() != u.cols()) throw DimensionError("lift: grid mismatch");
    return q.Vb * xi - q.Wb * (bw * u);
  }
};

/// True when the input enters only through derivative-free terms.
inline bool input_derivative_free(const QuasiWeierstrass& q, const Matrix& bw,
                                  double tol = 1e-9) {
  if (q.n2() == 0 || q.index <= 1) return true;
  const double scale = std::max(1.0, norm2(q.N)) * std::max(1.0, norm2(bw));
  return norm2(q.N * bw) <= tol * scale;
}

inline QwReduction qw_reduce(const PhDaeSystem& sys) {
  QwReduction r;
  r.q = quasi_weierstrass(sys.E, sys.A());
  const Eigen::Index n1 = r.q.n1(), n2 = r.q.n2(), m = sys.m();
  const Matrix sb = r.q.S.partialPivLu().solve(sys.B);
  r.bv = sb.topRows(n1);
  r.bw = sb.bottomRows(n2);
  if (!input_derivative_free(r.q, r.bw)) {
    throw ValidationError("qw_reduce: pencil index " +
                          std::to_string(r.q.index) +
                          " with the input reaching the nilpotent chain");
  }
  r.EV = sys.E * r.q.Vb;
  Matrix L(sys.n(), n1 + m);
  L << r.q.Vb, -(r.q.Wb * r.bw);
  LqModel& lm = r.model;
  lm.a = r.q.C;
  lm.bt = r.bv;
  const Matrix w = L.transpose() * sys.Q.transpose() * sys.R * sys.Q * L;
  lm.w = 0.5 * (w + w.transpose());
  const Matrix qx = r.q.Vb.transpose() * sys.E.transpose() * sys.Q * r.q.Vb;
  lm.Q = 0.5 * (qx + qx.transpose());
  lm.c = sys.B.transpose() * sys.Q * r.q.Vb;
  lm.d = -(sys.B.transpose() * sys.Q * r.q.Wb * r.bw);
  return r;
}

// ---------------------------------------------------------------------------

struct SpectralSplit {
  SubspaceBasis N1, N2;
  Matrix J1;      // JQ on N1
  Matrix J2, R2;  // P2 JQ and P2 RQ on N2
  bool boundary_flag = false;  // an eigenvalue sat at the axis tolerance edge
};

inline SpectralSplit spectral_split(const Matrix& J, const Matrix& R,
                                    const Matrix& Q,
                                    double spectral_tol = kSpectralTol) {
  const Matrix A = (J - R) * Q;
  const Eigen::Index n = A.rows();
  const auto ev = eigenvalues(A);
  const double rho = spectral_radius(ev);
  const double axis = std::max(spectral_tol * rho, 1e-12 * norm2(A));
  SpectralSplit s;
  for (auto z : ev) {
    if (z.real() < -axis && z.real() > -100.0 * axis) s.boundary_flag = true;
  }
  s.N1 = invariant_subspace(A, [&](Complex z) { return z.real() >= -axis; });
  s.N2 = invariant_subspace(A, [&](Complex z) { return z.real() < -axis; });
  const Eigen::Index k1 = s.N1.dim(), k2 = s.N2.dim();
  Matrix X(n, n);
  X << s.N1.basis(), s.N2.basis();
  Eigen::PartialPivLU<Matrix> xlu(X);
  const Matrix jq = xlu.solve(J * Q * X);
  const Matrix rq = xlu.solve(R * Q * X);
  s.J1 = jq.topLeftCorner(k1, k1);
  s.J2 = jq.bottomRightCorner(k2, k2);
  s.R2 = rq.bottomRightCorner(k2, k2);
  return s;
}

}  // namespace phtp
