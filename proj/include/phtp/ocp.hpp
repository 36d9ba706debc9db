#pragma once

// Direct transcription of the minimal-energy-supply OCP in its reformulated
// form  H(x(T)) + ∫‖W^{1/2}(x;u)‖²,  QP solution, adjoint recovery and the
// energy-balance audit. DAE problems are solved on the reduced ODE.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phtp/decomp.hpp"
#include "phtp/model.hpp"
#include "phtp/qp.hpp"

namespace phtp {

/// ODE problem data after any DAE reduction.
struct OdeProblem {
  LqModel sys;
  double T = 1.0;
  int N = 100;
  Vector x0;
  TargetSet target;
  ControlSet control;
  Discretization disc = Discretization::Exact;
};

// ---------------------------------------------------------------------------
// Interval operators. With z = (x; u) and u frozen, ż = Ãz, Ã = [[A, B̃],[0, 0]].

inline Matrix augmented_generator(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows(), m = b.cols();
  Matrix g = Matrix::Zero(n + m, n + m);
  g.topLeftCorner(n, n) = a;
  g.topRightCorner(n, m) = b;
  return g;
}

/// z(t + h) = step_map · z(t): exact exponential or the RK4 polynomial.
inline Matrix step_map(const Matrix& gen, double h, Discretization d) {
  if (d == Discretization::Exact) return expm(gen, h);
  const Rk4Maps r = rk4_maps(gen, Matrix::Zero(gen.rows(), 0), h);
  return r.Phi;
}

/// ∫₀ʰ z(s)ᵀ M z(s) ds = z(0)ᵀ K z(0). Exact: Van Loan block exponential.
/// Rk4: Simpson with RK4 half and full steps.
inline Matrix interval_quadratic(const Matrix& gen, const Matrix& M, double h,
                                 Discretization d) {
  const Eigen::Index k = gen.rows();
  Matrix K;
  if (d == Discretization::Exact) {
    Matrix big = Matrix::Zero(2 * k, 2 * k);
    big.topLeftCorner(k, k) = -gen.transpose();
    big.topRightCorner(k, k) = M;
    big.bottomRightCorner(k, k) = gen;
    const Matrix F = expm(big, h);
    K = F.bottomRightCorner(k, k).transpose() * F.topRightCorner(k, k);
  } else {
    const Matrix Hm = step_map(gen, 0.5 * h, d), Hf = step_map(gen, h, d);
    K = h / 6.0 * (M + 4.0 * Hm.transpose() * M * Hm + Hf.transpose() * M * Hf);
  }
  return 0.5 * (K + K.transpose());
}

struct IntervalOps {
  Matrix Phi, Gamma;  // x_{k+1} = Φx_k + Γu_k
  Matrix cost;        // ∫‖W^{1/2}z‖² = z_kᵀ cost z_k
  Matrix supply;      // ∫uᵀy = z_kᵀ supply z_k
};

/// uᵀy = (z;u)ᵀY(z;u)
inline Matrix supply_form(const LqModel& sys) {
  const Eigen::Index n = sys.n(), m = sys.m();
  Matrix Y = Matrix::Zero(n + m, n + m);
  Y.topRightCorner(n, m) = 0.5 * sys.c.transpose();
  Y.bottomLeftCorner(m, n) = 0.5 * sys.c;
  Y.bottomRightCorner(m, m) = 0.5 * (sys.d + sys.d.transpose());
  return Y;
}

inline IntervalOps interval_ops(const LqModel& sys, double h,
                                Discretization d) {
  const Eigen::Index n = sys.n(), m = sys.m();
  const Matrix gen = augmented_generator(sys.A(), sys.B_tilde());
  const Matrix F = step_map(gen, h, d);
  IntervalOps ops;
  ops.Phi = F.topLeftCorner(n, n);
  ops.Gamma = F.topRightCorner(n, m);
  ops.cost = interval_quadratic(gen, sys.W(), h, d);
  ops.supply = interval_quadratic(gen, supply_form(sys), h, d);
  return ops;
}

/// Decision vector: u_0 … u_{N−1}, then x_0 … x_N (plus t for the
/// feasibility LP). Equality rows: initial state, defects, target point.
struct TranscribedQp {
  QpProblem qp;
  int N = 0;
  Eigen::Index n = 0, m = 0;
  double h = 0.0;
  Eigen::Index defect_row0 = 0;
  Eigen::Index target_row0 = -1;        // equality rows of a point target
  Eigen::Index target_ineq_row0 = -1;   // inequality rows of a box target
  Eigen::Index target_ineq_rows = 0;

  Eigen::Index u_index(int k) const { return static_cast<Eigen::Index>(k) * m; }
  Eigen::Index x_index(int k) const {
    return static_cast<Eigen::Index>(N) * m + static_cast<Eigen::Index>(k) * n;
  }
};

namespace detail {

inline void add_dense_block(std::vector<Triplet>& t, const Matrix& blk,
                            Eigen::Index r0, Eigen::Index c0) {
  for (Eigen::Index j = 0; j < blk.cols(); ++j) {
    for (Eigen::Index i = 0; i < blk.rows(); ++i) {
      if (blk(i, j) != 0.0) t.emplace_back(r0 + i, c0 + j, blk(i, j));
    }
  }
}

/// Facet normals of the polyhedral outer approximation of a ball in ℝ^m.
inline Matrix ball_facets(Eigen::Index m) {
  if (m == 1) {
    Matrix d(2, 1);
    d << 1.0, -1.0;
    return d;
  }
  const Eigen::Index count = 16 * m;
  Matrix d(count, m);
  d.setZero();
  for (Eigen::Index i = 0; i < m; ++i) {
    d(2 * i, i) = 1.0;
    d(2 * i + 1, i) = -1.0;
  }
  std::mt19937_64 rng(0xba11);
  std::normal_distribution<double> nd;
  for (Eigen::Index r = 2 * m; r < count; ++r) {
    Vector v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = nd(rng);
    d.row(r) = v.normalized().transpose();
  }
  return d;
}

/// Control constraint rows (G, h) for one interval.
inline void control_rows(const ControlSet& c, Matrix& g, Vector& h) {
  if (c.kind == ControlSet::Kind::Box) {
    g.resize(2 * c.dim, c.dim);
    g << Matrix::Identity(c.dim, c.dim), -Matrix::Identity(c.dim, c.dim);
    h.resize(2 * c.dim);
    h << c.upper, -c.lower;
  } else {
    g = ball_facets(c.dim);
    h = Vector::Constant(g.rows(), c.radius);
  }
}

/// Equality rows shared by the OCP and the feasibility LP.
inline void dynamics_rows(const OdeProblem& pr, TranscribedQp& out,
                          std::vector<Triplet>& at, std::vector<double>& b,
                          const Rk4Maps& maps) {
  const Eigen::Index n = out.n;
  const int N = out.N;
  at.reserve(at.size() + static_cast<std::size_t>(N) * n * (n + out.m + 1));
  // x_0 = x⁰
  for (Eigen::Index i = 0; i < n; ++i) {
    at.emplace_back(i, out.x_index(0) + i, 1.0);
    b.push_back(pr.x0(i));
  }
  out.defect_row0 = n;
  for (int k = 0; k < N; ++k) {
    const Eigen::Index r0 = n + static_cast<Eigen::Index>(k) * n;
    for (Eigen::Index i = 0; i < n; ++i) {
      at.emplace_back(r0 + i, out.x_index(k + 1) + i, 1.0);
      b.push_back(0.0);
    }
    add_dense_block(at, -maps.Phi, r0, out.x_index(k));
    add_dense_block(at, -maps.Gamma, r0, out.u_index(k));
  }
}

}  // namespace detail

/// Builds the QP for an ODE problem. The running cost of interval k is the
/// quadratic form z_kᵀ K z_k of the interval integral with u frozen.
inline TranscribedQp transcribe(const OdeProblem& pr) {
  const LqModel& sys = pr.sys;
  const Eigen::Index n = sys.n(), m = sys.m();
  if (pr.x0.size() != n || pr.control.dim != m || pr.N < 1) {
    throw DimensionError("transcribe: shape mismatch");
  }
  TranscribedQp out;
  out.N = pr.N;
  out.n = n;
  out.m = m;
  out.h = pr.T / pr.N;
  const int N = pr.N;
  const Eigen::Index nv = static_cast<Eigen::Index>(N) * m + (N + 1) * n;
  const IntervalOps ops = interval_ops(sys, out.h, pr.disc);
  const Rk4Maps full{ops.Phi, ops.Gamma};

  // ½zᵀHz = Σ_k z_kᵀ K z_k + ½x_NᵀQx_N
  const Matrix Hk = 2.0 * ops.cost;
  std::vector<Triplet> ht;
  ht.reserve(static_cast<std::size_t>(N) * (n + m) * (n + m) + n * n);
  for (int k = 0; k < N; ++k) {
    const Eigen::Index xi = out.x_index(k), ui = out.u_index(k);
    detail::add_dense_block(ht, Hk.topLeftCorner(n, n), xi, xi);
    detail::add_dense_block(ht, Hk.topRightCorner(n, m), xi, ui);
    detail::add_dense_block(ht, Hk.bottomLeftCorner(m, n), ui, xi);
    detail::add_dense_block(ht, Hk.bottomRightCorner(m, m), ui, ui);
  }
  const Matrix& Qs = sys.Q;
  detail::add_dense_block(ht, Qs, out.x_index(N), out.x_index(N));
  out.qp.H.resize(nv, nv);
  out.qp.H.setFromTriplets(ht.begin(), ht.end());
  out.qp.g = Vector::Zero(nv);

  std::vector<Triplet> at;
  std::vector<double> b;
  detail::dynamics_rows(pr, out, at, b, full);
  Eigen::Index ne = n + static_cast<Eigen::Index>(N) * n;
  if (pr.target.kind == TargetSet::Kind::Point) {
    if (pr.target.point.size() != n) {
      throw DimensionError("transcribe: target dimension mismatch");
    }
    out.target_row0 = ne;
    for (Eigen::Index i = 0; i < n; ++i) {
      at.emplace_back(ne + i, out.x_index(N) + i, 1.0);
      b.push_back(pr.target.point(i));
    }
    ne += n;
  }
  out.qp.A.resize(ne, nv);
  out.qp.A.setFromTriplets(at.begin(), at.end());
  out.qp.b = Eigen::Map<Vector>(b.data(), static_cast<Eigen::Index>(b.size()));

  Matrix gc;
  Vector hc;
  detail::control_rows(pr.control, gc, hc);
  std::vector<Triplet> gt;
  std::vector<double> hv;
  Eigen::Index ni = 0;
  for (int k = 0; k < N; ++k) {
    detail::add_dense_block(gt, gc, ni, out.u_index(k));
    for (Eigen::Index i = 0; i < hc.size(); ++i) hv.push_back(hc(i));
    ni += gc.rows();
  }
  if (pr.target.kind == TargetSet::Kind::AffineBox) {
    const Matrix& G = pr.target.G;
    if (G.cols() != n) throw DimensionError("transcribe: target box mismatch");
    out.target_ineq_row0 = ni;
    out.target_ineq_rows = 2 * G.rows();
    detail::add_dense_block(gt, G, ni, out.x_index(N));
    detail::add_dense_block(gt, -G, ni + G.rows(), out.x_index(N));
    for (Eigen::Index i = 0; i < G.rows(); ++i) hv.push_back(pr.target.u(i));
    for (Eigen::Index i = 0; i < G.rows(); ++i) hv.push_back(-pr.target.l(i));
    ni += 2 * G.rows();
  }
  out.qp.G.resize(ni, nv);
  out.qp.G.setFromTriplets(gt.begin(), gt.end());
  out.qp.h = Eigen::Map<Vector>(hv.data(), static_cast<Eigen::Index>(hv.size()));
  return out;
}

/// LP  min t  subject to the dynamics, the control set and a terminal
/// violation of at most t (infinity norm). t is the last decision variable.
inline TranscribedQp transcribe_feasibility(const OdeProblem& pr) {
  const LqModel& sys = pr.sys;
  const Eigen::Index n = sys.n(), m = sys.m();
  TranscribedQp out;
  out.N = pr.N;
  out.n = n;
  out.m = m;
  out.h = pr.T / pr.N;
  const int N = pr.N;
  const Eigen::Index nx = static_cast<Eigen::Index>(N) * m + (N + 1) * n;
  const Eigen::Index nv = nx + 1, ti = nx;
  const IntervalOps ops = interval_ops(sys, out.h, pr.disc);
  const Rk4Maps full{ops.Phi, ops.Gamma};
  out.qp.H.resize(nv, nv);
  out.qp.g = Vector::Zero(nv);
  out.qp.g(ti) = 1.0;

  std::vector<Triplet> at;
  std::vector<double> b;
  detail::dynamics_rows(pr, out, at, b, full);
  const Eigen::Index ne = n + static_cast<Eigen::Index>(N) * n;
  out.qp.A.resize(ne, nv);
  out.qp.A.setFromTriplets(at.begin(), at.end());
  out.qp.b = Eigen::Map<Vector>(b.data(), ne);

  Matrix gc;
  Vector hc;
  detail::control_rows(pr.control, gc, hc);
  std::vector<Triplet> gt;
  std::vector<double> hv;
  Eigen::Index ni = 0;
  for (int k = 0; k < N; ++k) {
    detail::add_dense_block(gt, gc, ni, out.u_index(k));
    for (Eigen::Index i = 0; i < hc.size(); ++i) hv.push_back(hc(i));
    ni += gc.rows();
  }
  Matrix G;
  Vector lo, hi;
  if (pr.target.kind == TargetSet::Kind::Point) {
    G = Matrix::Identity(n, n);
    lo = hi = pr.target.point;
  } else if (pr.target.kind == TargetSet::Kind::AffineBox) {
    G = pr.target.G;
    lo = pr.target.l;
    hi = pr.target.u;
  } else {
    G = Matrix::Zero(0, n);
  }
  out.target_ineq_row0 = ni;
  out.target_ineq_rows = 2 * G.rows();
  // G x_N − t ≤ hi,  −G x_N − t ≤ −lo
  detail::add_dense_block(gt, G, ni, out.x_index(N));
  detail::add_dense_block(gt, -G, ni + G.rows(), out.x_index(N));
  for (Eigen::Index i = 0; i < 2 * G.rows(); ++i) {
    gt.emplace_back(ni + i, ti, -1.0);
  }
  for (Eigen::Index i = 0; i < G.rows(); ++i) hv.push_back(hi(i));
  for (Eigen::Index i = 0; i < G.rows(); ++i) hv.push_back(-lo(i));
  ni += 2 * G.rows();
  gt.emplace_back(ni, ti, -1.0);  // t ≥ 0
  hv.push_back(0.0);
  ++ni;
  out.qp.G.resize(ni, nv);
  out.qp.G.setFromTriplets(gt.begin(), gt.end());
  out.qp.h = Eigen::Map<Vector>(hv.data(), ni);
  return out;
}

/// Unpacks controls (m×N) and states (n×(N+1)) from a decision vector.
inline void unpack(const TranscribedQp& t, const Vector& z, Matrix& u,
                   Matrix& x) {
  u.resize(t.m, t.N);
  x.resize(t.n, t.N + 1);
  for (int k = 0; k < t.N; ++k) u.col(k) = z.segment(t.u_index(k), t.m);
  for (int k = 0; k <= t.N; ++k) x.col(k) = z.segment(t.x_index(k), t.n);
}

// ---------------------------------------------------------------------------
// Energy accounting with the transcription's interval integrals

struct EnergyAudit {
  double H0 = 0.0, HT = 0.0;
  double supplied = 0.0;    // ∫uᵀy
  double dissipated = 0.0;  // ∫‖W^{1/2}(x;u)‖²
  double residual = 0.0;    // |HT − H0 + dissipated − supplied|
};

/// Audit of an ODE trajectory (x: n×(N+1), u: m×N or m×(N+1)). Interval
/// integrals start from the left sample; H is taken at the given end samples,
/// so integrator error shows up in the residual.
inline EnergyAudit energy_audit(const LqModel& sys, const Vector& t,
                                const Matrix& x, const Matrix& u,
                                Discretization d = Discretization::Exact) {
  const int N = static_cast<int>(t.size()) - 1;
  if (N < 1 || x.cols() != N + 1 || u.cols() < N) {
    throw DimensionError("energy_audit: grid mismatch");
  }
  const IntervalOps ops = interval_ops(sys, t(1) - t(0), d);
  const Eigen::Index n = sys.n(), m = sys.m();
  EnergyAudit e;
  e.H0 = hamiltonian(sys, x.col(0));
  e.HT = hamiltonian(sys, x.col(N));
  Vector z(n + m);
  for (int k = 0; k < N; ++k) {
    z << x.col(k), u.col(k);
    e.supplied += z.dot(ops.supply * z);
    e.dissipated += z.dot(ops.cost * z);
  }
  e.residual = std::abs(e.HT - e.H0 + e.dissipated - e.supplied);
  return e;
}

inline EnergyAudit energy_audit(const PhOdeSystem& sys, const Vector& t,
                                const Matrix& x, const Matrix& u,
                                Discretization d = Discretization::Exact) {
  return energy_audit(LqModel::of(sys), t, x, u, d);
}

inline double energy_balance_residual(const Trajectory& tr,
                                      const PhOdeSystem& sys) {
  return energy_audit(sys, tr.t, tr.x, tr.u).residual;
}

/// DAE audit: H = ½xᵀEᵀQx, dissipation xᵀQᵀRQx, y = BᵀQx. On each interval
/// x = V_b ξ − W_b b_W u with ξ̇ = Cξ + b_V u (quasi-Weierstrass coordinates).
inline EnergyAudit energy_audit(const PhDaeSystem& sys, const Trajectory& tr,
                                Discretization d = Discretization::Exact) {
  const int N = static_cast<int>(tr.steps());
  const QwReduction r = qw_reduce(sys);
  const Eigen::Index n1 = r.n1(), m = sys.m();
  Eigen::PartialPivLU<Matrix> xlu(r.q.X());
  const Matrix gen = augmented_generator(r.model.A(), r.model.B_tilde());
  const Matrix Kd = interval_quadratic(gen, r.model.W(), tr.h(), d);
  const Matrix Ks = interval_quadratic(gen, supply_form(r.model), tr.h(), d);
  EnergyAudit e;
  e.H0 = hamiltonian(sys, tr.x.col(0));
  e.HT = hamiltonian(sys, tr.x.col(N));
  Vector z(n1 + m);
  for (int k = 0; k < N; ++k) {
    z << xlu.solve(Vector(tr.x.col(k))).head(n1), tr.u.col(k);
    e.supplied += z.dot(Ks * z);
    e.dissipated += z.dot(Kd * z);
  }
  e.residual = std::abs(e.HT - e.H0 + e.dissipated - e.supplied);
  return e;
}

// ---------------------------------------------------------------------------

/// The reduction a DAE problem was solved through (at most one is set).
struct DaeReduction {
  std::optional<BeattieReduction> beattie;
  std::optional<QwReduction> qw;

  bool active() const { return beattie.has_value() || qw.has_value(); }
  Vector to_z(const Vector& w) const {
    if (beattie) {
      if (dist_to_subspace(w, SubspaceBasis::span_of(w_map())) >
          1e-8 * (1.0 + w.norm())) {
        throw ValidationError("w is not in im E");
      }
      return beattie->to_z1(w);
    }
    return qw->to_xi(w);
  }
  Vector to_w(const Vector& z) const {
    return beattie ? beattie->to_w(z) : qw->to_w(z);
  }
  /// Linear map z ↦ w = Ex.
  Matrix w_map() const {
    if (beattie) {
      const Matrix uinvt = beattie->U.transpose().partialPivLu().inverse();
      return uinvt.leftCols(beattie->n1);
    }
    return qw->EV;
  }
  Matrix lift(const Matrix& z, const Matrix& u) const {
    return beattie ? lift_solution(*beattie, z, u) : qw->lift(z, u);
  }
};

// ---------------------------------------------------------------------------

struct OcpSolution {
  Trajectory traj;       // original coordinates (lifted for DAE input)
  Trajectory ode_traj;   // coordinates of the solved ODE (z₁ for DAE)
  OdeProblem ode;        // the problem the QP was posed on
  DaeReduction reduction;      // empty for ODE input
  Matrix lambda_discrete;      // adjoint from the defect multipliers
  Vector terminal_multiplier;  // η: λ(T) = −Qx(T) − η
  double cost = 0.0;           // H(x(T)) + ∫‖W^{1/2}‖²
  double supplied_energy = 0.0;
  double dissipated_energy = 0.0;
  double kkt_residual = 0.0;
  double energy_balance_residual = 0.0;
  double terminal_error = 0.0;
  bool ball_check_ok = true;
  int iterations = 0;
  bool control_set_default = false;
};

/// Builds the ODE problem for a spec. DAE specs go through the structured
/// reduction when the index is at most one, otherwise through the
/// quasi-Weierstrass ODE part (input must not reach the nilpotent chain).
inline OdeProblem ode_problem(const OcpSpec& spec, DaeReduction* red_out) {
  spec.check();
  OdeProblem pr;
  pr.T = spec.T;
  pr.N = spec.N;
  pr.control = spec.control;
  pr.disc = spec.options.discretization;
  if (!spec.is_dae()) {
    pr.sys = LqModel::of(std::get<PhOdeSystem>(spec.system));
    pr.x0 = spec.initial;
    pr.target = spec.target;
    return pr;
  }
  const auto& dae = std::get<PhDaeSystem>(spec.system);
  DaeReduction r;
  if (dh_regularity_check(dae) && dh_index_le1_check(dae)) {
    r.beattie = beattie_reduce(dae);
    pr.sys = LqModel::of(r.beattie->reduced);
  } else {
    if (!is_regular(dae.E, dae.A()).regular) {
      throw ValidationError("DAE pencil is not regular");
    }
    r.qw = qw_reduce(dae);
    pr.sys = r.qw->model;
  }
  pr.x0 = r.to_z(spec.initial);
  switch (spec.target.kind) {
    case TargetSet::Kind::Free:
      pr.target = TargetSet::free();
      break;
    case TargetSet::Kind::Point:
      pr.target = TargetSet::at(r.to_z(spec.target.point));
      break;
    case TargetSet::Kind::AffineBox:
      pr.target = TargetSet::affine_box(spec.target.G * r.w_map(),
                                        spec.target.l, spec.target.u);
      break;
  }
  if (red_out) *red_out = std::move(r);
  return pr;
}

struct FeasibilityResult {
  bool feasible = false;
  double distance = 0.0;  // Euclidean terminal distance of the LP optimum
  double threshold = 0.0;
  Matrix u;               // m×N controls realizing it
  Matrix x;               // n×(N+1)
  bool converged = false;
};

inline double terminal_distance(const TargetSet& tg, const Vector& x) {
  switch (tg.kind) {
    case TargetSet::Kind::Free:
      return 0.0;
    case TargetSet::Kind::Point:
      return (x - tg.point).norm();
    case TargetSet::Kind::AffineBox: {
      const Vector gx = tg.G * x;
      return ((gx - tg.u).cwiseMax(0.0) + (tg.l - gx).cwiseMax(0.0)).norm();
    }
  }
  return 0.0;
}

inline FeasibilityResult feasibility_check(const OdeProblem& pr,
                                           const SolverOptions& opt = {}) {
  FeasibilityResult fr;
  fr.threshold = opt.feasibility_tol * (1.0 + pr.x0.norm());
  const TranscribedQp t = transcribe_feasibility(pr);
  QpOptions qo;
  qo.tol = opt.qp_tol;
  qo.max_iterations = opt.max_iterations;
  const QpResult r = solve_qp(t.qp, qo);
  fr.converged = r.converged;
  if (!r.converged && r.kkt_residual > 1e-6) {
    throw NumericalError("feasibility_check: LP did not converge (" + r.status +
                         ")");
  }
  unpack(t, r.z, fr.u, fr.x);
  fr.distance = terminal_distance(pr.target, fr.x.col(pr.N));
  fr.feasible = fr.distance <= fr.threshold;
  return fr;
}

inline FeasibilityResult feasibility_check(const OcpSpec& spec) {
  DaeReduction red;
  OdeProblem pr = ode_problem(spec, &red);
  FeasibilityResult fr = feasibility_check(pr, spec.options);
  if (red.active() && spec.target.kind != TargetSet::Kind::Free) {
    // Report the distance in the original w-coordinates.
    const Vector wN = red.to_w(fr.x.col(pr.N));
    fr.distance = terminal_distance(spec.target, wN);
    fr.feasible = fr.distance <= fr.threshold;
  }
  return fr;
}

/// Solves an ODE problem; throws InfeasibleError / NumericalError.
inline OcpSolution solve_ode_ocp(const OdeProblem& pr,
                                 const SolverOptions& opt = {}) {
  const TranscribedQp t = transcribe(pr);
  QpOptions qo;
  qo.tol = opt.qp_tol;
  qo.max_iterations = opt.max_iterations;
  const QpResult r = solve_qp(t.qp, qo);
  if (!r.converged) {
    const FeasibilityResult fr = feasibility_check(pr, opt);
    if (!fr.feasible) {
      throw InfeasibleError("target not reachable: terminal distance " +
                            std::to_string(fr.distance));
    }
    throw NumericalError("QP solver failed: " + r.status +
                         " (KKT residual " + std::to_string(r.kkt_residual) +
                         ")");
  }
  const LqModel& sys = pr.sys;
  const Eigen::Index n = sys.n();
  const int N = pr.N;
  OcpSolution sol;
  sol.ode = pr;
  sol.iterations = r.iterations;
  sol.kkt_residual = r.kkt_residual;
  sol.cost = r.objective;
  Matrix u, x;
  unpack(t, r.z, u, x);
  Trajectory& tr = sol.ode_traj;
  tr.t = uniform_grid(pr.T, N);
  tr.x = x;
  tr.u = pad_controls(u);
  tr.y.resize(sys.m(), N + 1);
  for (int k = 0; k <= N; ++k) {
    tr.y.col(k) = output_of(sys, tr.x.col(k), tr.u.col(k));
  }

  // λ(t_0) = y_init, λ(t_k) = y_{k−1} (defect multipliers).
  sol.lambda_discrete.resize(n, N + 1);
  sol.lambda_discrete.col(0) = r.y.head(n);
  for (int k = 1; k <= N; ++k) {
    sol.lambda_discrete.col(k) = r.y.segment(t.defect_row0 + (k - 1) * n, n);
  }
  sol.terminal_multiplier = Vector::Zero(n);
  if (t.target_row0 >= 0) {
    sol.terminal_multiplier = r.y.segment(t.target_row0, n);
  } else if (t.target_ineq_row0 >= 0) {
    const Eigen::Index rows = t.target_ineq_rows / 2;
    const Vector lu = r.lambda.segment(t.target_ineq_row0, rows);
    const Vector ll = r.lambda.segment(t.target_ineq_row0 + rows, rows);
    sol.terminal_multiplier = pr.target.G.transpose() * (lu - ll);
  }

  const EnergyAudit e = energy_audit(sys, tr.t, tr.x, tr.u, pr.disc);
  sol.supplied_energy = e.supplied;
  sol.dissipated_energy = e.dissipated;
  sol.energy_balance_residual = e.residual;
  sol.terminal_error = terminal_distance(pr.target, tr.x.col(N));
  if (pr.control.kind == ControlSet::Kind::Ball) {
    for (int k = 0; k < N; ++k) {
      if (!pr.control.contains(u.col(k), 1e-8)) sol.ball_check_ok = false;
    }
  }
  sol.control_set_default = pr.control.is_default;
  sol.traj = tr;
  return sol;
}

inline OcpSolution solve_ocp(const OcpSpec& spec) {
  DaeReduction red;
  const OdeProblem pr = ode_problem(spec, &red);
  OcpSolution sol = solve_ode_ocp(pr, spec.options);
  if (red.active()) {
    const auto& dae = std::get<PhDaeSystem>(spec.system);
    Trajectory& tr = sol.traj;
    tr.x = red.lift(sol.ode_traj.x, sol.ode_traj.u);
    tr.y.resize(dae.m(), tr.t.size());
    for (Eigen::Index k = 0; k < tr.t.size(); ++k) {
      tr.y.col(k) = output_of(dae, tr.x.col(k));
    }
    if (spec.target.kind != TargetSet::Kind::Free) {
      sol.terminal_error = terminal_distance(
          spec.target, dae.E * tr.x.col(tr.t.size() - 1));
    }
    sol.reduction = std::move(red);
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Adjoint

struct AdjointResult {
  Matrix lambda;             // n×(N+1), ODE coordinates
  double lambda0 = -1.0;
  /// ‖B̃ᵀλ − 2(PᵀQx + Su)‖ at t_k on interior arcs, NaN elsewhere.
  Vector stationarity;
};

/// Backward RK4 integration of λ̇ = −Aᵀλ + 2(QRQx + QPu) from
/// λ(T) = −Qx(T) − η, with `substeps` RK4 steps per grid interval and the
/// intra-interval state propagated from (x_k, u_k).
inline AdjointResult adjoint_trajectory(const OcpSolution& sol,
                                        int substeps = 8,
                                        double interior_margin = 1e-6) {
  const LqModel& sys = sol.ode.sys;
  const Trajectory& tr = sol.ode_traj;
  const int N = static_cast<int>(tr.steps());
  const Eigen::Index n = sys.n(), m = sys.m();
  const double hs = tr.h() / substeps;
  const Matrix At = sys.A().transpose();
  Matrix src(n, n + m);  // z ↦ 2(QRQx + QPu)
  src = 2.0 * sys.W().topRows(n);
  const Matrix half =
      step_map(augmented_generator(sys.A(), sys.B_tilde()), 0.5 * hs,
               sol.ode.disc);
  AdjointResult res;
  res.lambda.resize(n, N + 1);
  res.lambda.col(N) = -sys.Q * tr.x.col(N) - sol.terminal_multiplier;
  std::vector<Vector> f(2 * substeps + 1);
  for (int k = N - 1; k >= 0; --k) {
    Vector z(n + m);
    z << tr.x.col(k), tr.u.col(k);
    for (int j = 0; j <= 2 * substeps; ++j) {
      f[j] = src * z;
      z = half * z;
    }
    // s = t_{k+1} − t, dλ/ds = Aᵀλ − f
    Vector l = res.lambda.col(k + 1);
    for (int j = substeps - 1; j >= 0; --j) {
      const Vector& fr = f[2 * j + 2];
      const Vector& fm = f[2 * j + 1];
      const Vector& fl = f[2 * j];
      const Vector k1 = At * l - fr;
      const Vector k2 = At * (l + 0.5 * hs * k1) - fm;
      const Vector k3 = At * (l + 0.5 * hs * k2) - fm;
      const Vector k4 = At * (l + hs * k3) - fl;
      l += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    res.lambda.col(k) = l;
  }
  res.stationarity = Vector::Constant(N + 1, std::nan(""));
  const Matrix Bt = sys.B_tilde();
  const Matrix PtQ = sys.W().bottomLeftCorner(m, n);
  const Matrix S = sys.W().bottomRightCorner(m, m);
  for (int k = 0; k <= N; ++k) {
    const Vector uk = tr.u.col(k);
    if (!sol.ode.control.interior(uk, interior_margin)) continue;
    res.stationarity(k) =
        (Bt.transpose() * res.lambda.col(k) -
         2.0 * (PtQ * tr.x.col(k) + S * uk))
            .norm();
  }
  return res;
}

}  // namespace phtp
