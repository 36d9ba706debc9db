#pragma once

// Reachability and steady-state analysis: Kalman subspace, R-controllability,
// optimal steady states, Gramians, growth bounds, minimal-time estimates.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "phtp/decomp.hpp"
#include "phtp/model.hpp"
#include "phtp/ocp.hpp"
#include "phtp/pencil.hpp"

namespace phtp {

/// im [B, AB, …, A^{n−1}B], grown one Krylov step at a time.
inline SubspaceBasis kalman_subspace(const Matrix& A, const Matrix& B,
                                     double tol = kRankTol) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) {
    throw DimensionError("kalman_subspace: shape mismatch");
  }
  const double scale = std::max({1.0, norm2(A), norm2(B)});
  if (B.size() == 0 || norm2(B) <= tol * scale) return SubspaceBasis(n);
  SubspaceBasis k = SubspaceBasis::span_of(B, tol);
  for (Eigen::Index j = 0; j < n && k.dim() < n; ++j) {
    Matrix grown(n, 2 * k.dim());
    grown << k.basis(), A * k.basis();
    SubspaceBasis next = SubspaceBasis::span_of(grown, tol);
    if (next.dim() == k.dim()) break;
    k = std::move(next);
  }
  return k;
}

inline bool is_controllable(const Matrix& A, const Matrix& B,
                            double tol = kRankTol) {
  return kalman_subspace(A, B, tol).dim() == A.rows();
}

/// rank [λE − A, B] = n at every finite eigenvalue of the pencil.
inline bool is_r_controllable(const PhDaeSystem& sys, double tol = kRankTol) {
  const Matrix A = sys.A();
  const Eigen::Index n = sys.n(), m = sys.m();
  const QuasiWeierstrass q = quasi_weierstrass(sys.E, A);
  if (q.n1() == 0) return true;
  const auto ev = eigenvalues(q.C);
  // Cluster eigenvalues so repeated ones are tested once.
  std::vector<Complex> seen;
  const double scale = std::max(1.0, spectral_radius(ev));
  for (const Complex& lam : ev) {
    bool dup = false;
    for (const Complex& s : seen) {
      if (std::abs(s - lam) <= 1e-6 * scale) dup = true;
    }
    if (dup) continue;
    seen.push_back(lam);
    CMatrix M(n, n + m);
    M.leftCols(n) = lam * sys.E.cast<Complex>() - A.cast<Complex>();
    M.rightCols(m) = sys.B.cast<Complex>();
    const Matrix re = real_embedding(M);
    const double thr = tol * std::max(1.0, norm2(re));
    if (rank_abs(re, thr) < 2 * n) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Steady states

struct SteadyState {
  Vector x, u, y;
  bool optimal = false;
};

struct OptimalSteadyStates {
  SubspaceBasis basis;           // kernel of the stacked matrix in ℝ^{n+m}
  SteadyState representative;    // (0, 0) unless a nonzero-ū element exists
  bool has_nonzero = false;      // a representative with ū ≠ 0 in int 𝕌
};

/// [[A, B̃], [QRQ, QP], [PᵀQ, S]]
inline Matrix steady_state_matrix(const PhOdeSystem& sys) {
  const Eigen::Index n = sys.n(), m = sys.m();
  Matrix K(2 * n + m, n + m);
  K.topRows(n) << sys.A(), sys.B_tilde();
  K.bottomRows(n + m) = sys.W();
  return K;
}

inline SteadyState make_steady_state(const PhOdeSystem& sys, const Vector& x,
                                     const Vector& u, double tol = 1e-9) {
  SteadyState s;
  s.x = x;
  s.u = u;
  s.y = output_of(sys, x, u);
  Vector z(x.size() + u.size());
  z << x, u;
  s.optimal = (sys.W() * z).norm() <= tol * std::max(1.0, z.norm());
  return s;
}

inline OptimalSteadyStates optimal_steady_states(const PhOdeSystem& sys,
                                                 const ControlSet& U,
                                                 double tol = kRankTol) {
  const Eigen::Index n = sys.n(), m = sys.m();
  OptimalSteadyStates out;
  out.basis = nullspace(steady_state_matrix(sys), tol);
  out.representative =
      make_steady_state(sys, Vector::Zero(n), Vector::Zero(m));
  out.representative.optimal = true;
  // Among basis vectors pick the one with the largest ū component; scale it
  // to half the distance from 0 to ∂𝕌 along ū.
  Eigen::Index best = -1;
  double best_u = 1e-8;
  for (Eigen::Index j = 0; j < out.basis.dim(); ++j) {
    const double nu = out.basis.basis().col(j).tail(m).norm();
    if (nu > best_u) {
      best_u = nu;
      best = j;
    }
  }
  if (best >= 0) {
    const Vector v = out.basis.basis().col(best);
    const double s = 0.5 * U.ray_exit(v.tail(m));
    if (std::isfinite(s) && s > 0.0) {
      out.representative = make_steady_state(sys, s * v.head(n), s * v.tail(m));
      out.representative.optimal = true;
      out.has_nonzero = true;
    }
  }
  return out;
}

inline Matrix steady_state_matrix(const LqModel& sys) {
  const Eigen::Index n = sys.n(), m = sys.m();
  Matrix K(2 * n + m, n + m);
  K.topRows(n) << sys.A(), sys.B_tilde();
  K.bottomRows(n + m) = sys.W();
  return K;
}

/// Optimal steady state reachable from x0. Linear functionals ℓ with
/// ℓᵀ[A, B̃] = 0 are conserved along every trajectory, so x̄ must share them
/// with x0. Picks the least-norm element of the optimal steady-state kernel
/// matching those invariants; falls back to (0, 0) when x0 has none.
inline SteadyState reachable_steady_state(const LqModel& sys, const Vector& x0,
                                          double tol = kRankTol) {
  const Eigen::Index n = sys.n(), m = sys.m();
  Matrix AB(n, n + m);
  AB << sys.A(), sys.B_tilde();
  const SubspaceBasis inv = nullspace(Matrix(AB.transpose()), tol);
  SteadyState s;
  s.x = Vector::Zero(n);
  s.u = Vector::Zero(m);
  if (inv.dim() > 0) {
    const SubspaceBasis ker = nullspace(steady_state_matrix(sys), tol);
    if (ker.dim() > 0) {
      // Among kernel elements matching the invariants, prefer the smallest
      // input, then the smallest state.
      const Matrix L = inv.basis();
      const Matrix K = ker.basis();
      const Matrix M = L.transpose() * K.topRows(n);
      Vector c = M.completeOrthogonalDecomposition().solve(
          Vector(L.transpose() * x0));
      const SubspaceBasis free = nullspace(M, tol);
      if (free.dim() > 0) {
        const Matrix Ku = K.bottomRows(m) * free.basis();
        const Vector d = Ku.completeOrthogonalDecomposition().solve(
            Vector(-K.bottomRows(m) * c));
        c += free.basis() * d;
      }
      const Vector z = K * c;
      s.x = z.head(n);
      s.u = z.tail(m);
    }
  }
  s.y = output_of(sys, s.x, s.u);
  Vector z(n + m);
  z << s.x, s.u;
  s.optimal = (sys.W() * z).norm() <= 1e-9 * std::max(1.0, z.norm());
  return s;
}

/// The unique x̄ with Ex̄ = w̄ and (J−R)Qx̄ + Bū = 0.
inline Vector dae_steady_state_lift(const PhDaeSystem& sys, const Vector& w,
                                    const Vector& u, double tol = 1e-8) {
  const Eigen::Index n = sys.n();
  if (w.size() != n || u.size() != sys.m()) {
    throw DimensionError("dae_steady_state_lift: dimension mismatch");
  }
  Matrix M(2 * n, n);
  M << sys.E, sys.A();
  Vector rhs(2 * n);
  rhs << w, -sys.B * u;
  const Vector x = M.colPivHouseholderQr().solve(rhs);
  const double scale = 1.0 + rhs.norm();
  const double res = (M * x - rhs).norm();
  if (!(res <= tol * scale)) {
    throw ValidationError("dae_steady_state_lift: (w, u) is not a steady state "
                          "(residual " + std::to_string(res) + ")");
  }
  return x;
}

// ---------------------------------------------------------------------------
// Gramian and growth bound

struct GramianResult {
  Matrix G;
  double alpha = 0.0;  // λ_min(G)
  int steps = 0;       // Simpson intervals used
};

inline Matrix gramian_simpson(const Matrix& A, const Matrix& B, double t,
                              int steps) {
  const double h = t / steps;
  const Matrix step = expm(A, h);
  const Matrix BBt = B * B.transpose();
  Matrix E = Matrix::Identity(A.rows(), A.cols());
  Matrix G = Matrix::Zero(A.rows(), A.rows());
  for (int j = 0; j <= steps; ++j) {
    const double w = (j == 0 || j == steps) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    G += w * E * BBt * E.transpose();
    E = step * E;
  }
  G *= h / 3.0;
  return 0.5 * (G + G.transpose());
}

/// G_t = ∫₀ᵗ e^{sA}BBᵀe^{sAᵀ}ds, composite Simpson with at least 200
/// intervals, doubled until the relative change is ≤ rel_tol.
inline GramianResult controllability_gramian(const Matrix& A, const Matrix& B,
                                             double t, int min_steps = 200,
                                             double rel_tol = 1e-6) {
  if (!(t > 0.0)) throw ValidationError("controllability_gramian: t <= 0");
  int steps = std::max(2, min_steps + (min_steps % 2));
  Matrix G = gramian_simpson(A, B, t, steps);
  for (int it = 0; it < 12; ++it) {
    const Matrix G2 = gramian_simpson(A, B, t, 2 * steps);
    steps *= 2;
    const double diff = (G2 - G).norm(), ref = std::max(G2.norm(), 1e-300);
    G = G2;
    if (diff <= rel_tol * ref) break;
  }
  GramianResult r;
  r.G = G;
  r.steps = steps;
  Eigen::SelfAdjointEigenSolver<Matrix> es(G);
  r.alpha = std::max(0.0, es.eigenvalues()(0));
  if (r.alpha <= 1e-13 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    r.alpha = 0.0;
  }
  return r;
}

struct GrowthBound {
  double M = 0.0;
  bool verified = false;
  int reinflations = 0;
};

/// M with ‖e^{tA}‖ ≤ 1 + Mt on (0, T_max], from a sampled maximum times 1.25.
inline GrowthBound exp_growth_bound_report(const Matrix& A, double T_max,
                                           int samples = 200) {
  if (!(T_max > 0.0)) throw ValidationError("exp_growth_bound: T_max <= 0");
  constexpr double kFloor = 1e-6;
  auto sample_max = [&](int count) {
    double best = 0.0;
    const double t0 = T_max * 1e-4;
    const double ratio = std::pow(T_max / t0, 1.0 / (count - 1));
    double t = t0;
    for (int i = 0; i < count; ++i, t *= ratio) {
      const double tt = std::min(t, T_max);
      best = std::max(best, (norm2(expm(A, tt)) - 1.0) / tt);
    }
    // uniform samples catch the late part of the horizon
    for (int i = 1; i <= count; ++i) {
      const double tt = T_max * i / count;
      best = std::max(best, (norm2(expm(A, tt)) - 1.0) / tt);
    }
    return best;
  };
  GrowthBound g;
  g.M = std::max(kFloor, 1.25 * sample_max(samples));
  for (int rep = 0; rep < 5; ++rep) {
    const double check = sample_max(10 * samples);
    if (check <= g.M) {
      g.verified = true;
      break;
    }
    g.M = 1.25 * check;
    ++g.reinflations;
  }
  return g;
}

inline double exp_growth_bound(const Matrix& A, double T_max) {
  return exp_growth_bound_report(A, T_max).M;
}

// ---------------------------------------------------------------------------
// Minimal-time estimate

struct TimeEstimate {
  double lower = 0.0, upper = 0.0;
  double control_peak = 0.0;  // max_k ‖u_k‖ of the steering control at `upper`
  int probes = 0;
};

/// Bisection on T ∈ [0, T_hi] with feasibility probes on `steps` intervals.
inline TimeEstimate minimal_time_estimate(const LqModel& sys,
                                          const Vector& x0,
                                          const TargetSet& target,
                                          const ControlSet& U, double T_hi,
                                          int steps = 100,
                                          const SolverOptions& opt = {}) {
  if (!(T_hi > 0.0)) throw ValidationError("minimal_time_estimate: T_hi <= 0");
  TimeEstimate est;
  const double tol = opt.feasibility_tol * (1.0 + x0.norm());
  if (terminal_distance(target, x0) <= tol &&
      (sys.A() * x0).norm() <= tol) {
    return est;  // already there and at rest
  }
  auto probe = [&](double T) {
    OdeProblem pr;
    pr.sys = sys;
    pr.T = T;
    pr.N = steps;
    pr.x0 = x0;
    pr.target = target;
    pr.control = U;
    pr.disc = opt.discretization;
    ++est.probes;
    return feasibility_check(pr, opt);
  };
  FeasibilityResult hi = probe(T_hi);
  if (!hi.feasible) {
    throw InfeasibleError("minimal_time_estimate: target not reachable within "
                          "T_hi (distance " + std::to_string(hi.distance) + ")");
  }
  double lo = 0.0, up = T_hi;
  while (up - lo > 1e-2 * T_hi) {
    const double mid = 0.5 * (lo + up);
    FeasibilityResult r = probe(mid);
    if (r.feasible) {
      up = mid;
      hi = std::move(r);
    } else {
      lo = mid;
    }
  }
  est.lower = lo;
  est.upper = up;
  for (Eigen::Index k = 0; k < hi.u.cols(); ++k) {
    est.control_peak = std::max(est.control_peak, hi.u.col(k).norm());
  }
  return est;
}

inline TimeEstimate minimal_time_estimate(const PhOdeSystem& sys,
                                          const Vector& x0,
                                          const TargetSet& target,
                                          const ControlSet& U, double T_hi,
                                          int steps = 100,
                                          const SolverOptions& opt = {}) {
  return minimal_time_estimate(LqModel::of(sys), x0, target, U, T_hi, steps,
                               opt);
}

}  // namespace phtp
