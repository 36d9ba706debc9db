#pragma once

// Turnpike diagnostics: distance profiles, integral/measure statistics,
// the a-priori bound F(x⁰) and the adjoint bound, multi-horizon reports.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phtp/control.hpp"
#include "phtp/ocp.hpp"

namespace phtp {

/// dist((x_k, u_k), S) (joint) or dist(x_k, S) per grid point.
inline Vector distance_profile(const Trajectory& tr, const SubspaceBasis& S,
                               bool joint) {
  const Eigen::Index n = tr.x.rows(), m = tr.u.rows();
  const Eigen::Index amb = joint ? n + m : n;
  if (S.ambient_dim() != amb) {
    throw DimensionError("distance_profile: ambient dimension mismatch");
  }
  const Eigen::Index K = tr.t.size();
  Vector d(K);
  Vector v(amb);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (joint) {
      v << tr.x.col(k), tr.u.col(k);
    } else {
      v = tr.x.col(k);
    }
    d(k) = dist_to_subspace(v, S);
  }
  return d;
}

/// Σ_{k<N} h·dist²(t_k)
inline double integral_turnpike_stat(const Vector& profile, double h) {
  double s = 0.0;
  for (Eigen::Index k = 0; k + 1 < profile.size(); ++k) {
    s += h * profile(k) * profile(k);
  }
  return s;
}

/// h·#{k < N : dist(t_k) > ε}
inline double measure_turnpike_stat(const Vector& profile, double h,
                                    double eps) {
  if (!(eps > 0.0)) throw ValidationError("measure_turnpike_stat: eps <= 0");
  double s = 0.0;
  for (Eigen::Index k = 0; k + 1 < profile.size(); ++k) {
    if (profile(k) > eps) s += h;
  }
  return s;
}

inline double fraction_within(const Vector& profile, double eps) {
  if (profile.size() == 0) return 0.0;
  return static_cast<double>((profile.array() <= eps).count()) /
         static_cast<double>(profile.size());
}

// ---------------------------------------------------------------------------
// A-priori bound

struct TurnpikeBound {
  double F = 0.0;
  double T_threshold = 0.0;  // T0 + T1
  double G0 = 0.0, G1 = 0.0, G2 = 0.0;
  double G1_displayed = 0.0, G1_proof = 0.0;
  double M = 0.0;
  double lambda_min = 0.0;
  double u_max = 0.0;   // set-wide
  double u1_max = 0.0;  // used in G1 and G2
  double T0 = 0.0, T1 = 0.0;
  double T0_lower = 0.0, T1_lower = 0.0;
};

/// Constants for given steering times. G1 is the larger of the displayed
/// formula and the one that follows from the state estimate used in the proof
/// (T1 inside the state bound, one u_max² per unit time).
inline TurnpikeBound turnpike_constants(const LqModel& sys,
                                        const Vector& x0,
                                        const SteadyState& ss, double u_max,
                                        double u1_max, double T0, double T1,
                                        double M) {
  const Matrix W = sys.W();
  if (norm2(W) == 0.0) {
    throw ValidationError("turnpike_bound: W = 0 is excluded");
  }
  Vector z(ss.x.size() + ss.u.size());
  z << ss.x, ss.u;
  if ((W * z).norm() > 1e-9 * std::max(1.0, z.norm()) ||
      (sys.A() * ss.x + sys.B_tilde() * ss.u).norm() >
          1e-9 * std::max(1.0, z.norm())) {
    throw ValidationError("turnpike_bound: steady state is not optimal");
  }
  TurnpikeBound b;
  const double nW = norm2(W), nB = norm2(sys.B_tilde()), nQ = norm2(sys.Q);
  const double xe = ss.x.norm();
  const double u1 = std::min(u_max, u1_max);
  b.M = M;
  b.u_max = u_max;
  b.u1_max = u1;
  b.T0 = T0;
  b.T1 = T1;
  b.lambda_min = min_positive_eigenvalue(W);
  const double s0 = (1.0 + M * T0) * (x0.norm() + nB * T0 * u_max);
  b.G0 = nW * T0 * (s0 * s0 + u_max * u_max);
  const double gm = 1.0 + M * T1;
  const double sd = gm * (xe + nB * u1);
  b.G1_displayed = nW * T1 * (sd * sd + T1 * u1 * u1);
  const double sp = gm * (xe + nB * T1 * u1);
  b.G1_proof = nW * T1 * (sp * sp + u1 * u1);
  b.G1 = std::max(b.G1_displayed, b.G1_proof);
  b.G2 = 0.5 * nQ * sp * sp;
  b.F = (b.G0 + b.G1 + b.G2) / b.lambda_min;
  b.T_threshold = T0 + T1;
  return b;
}

/// Full bound: T0 (x⁰ → x̄_e) and T1 (x̄_e → target) by bisection on [0, T_hi],
/// upper endpoints used; M from exp_growth_bound on [0, max(T0, T1)].
inline TurnpikeBound turnpike_bound(const OdeProblem& pr, const SteadyState& ss,
                                    double T_hi, const SolverOptions& opt = {}) {
  const TimeEstimate t0 = minimal_time_estimate(
      pr.sys, pr.x0, TargetSet::at(ss.x), pr.control, T_hi, 100, opt);
  TimeEstimate t1;
  if (pr.target.kind == TargetSet::Kind::Free) {
    t1 = TimeEstimate{};
  } else {
    t1 = minimal_time_estimate(pr.sys, ss.x, pr.target, pr.control, T_hi, 100,
                               opt);
  }
  const double M =
      exp_growth_bound(pr.sys.A(), std::max({t0.upper, t1.upper, 1e-3}));
  TurnpikeBound b = turnpike_constants(
      pr.sys, pr.x0, ss, pr.control.u_max(),
      t1.upper > 0.0 ? t1.control_peak : 0.0, t0.upper, t1.upper, M);
  b.T0_lower = t0.lower;
  b.T1_lower = t1.lower;
  return b;
}

// ---------------------------------------------------------------------------
// Adjoint bound

struct AdjointStat {
  double lhs = 0.0;  // ∫_{2tc}^{T−tc} ‖λ‖²
  double rhs = 0.0;  // tc·C(tc)·∫_{tc}^{T−tc} ‖W(x;u)‖²
  double C = 0.0, alpha = 0.0, M = 0.0, tc = 0.0;
  bool precondition_met = false;
  std::string note;
};

/// Trapezoid integral of samples f over grid points with t in [a, b].
inline double window_integral(const Vector& t, const Vector& f, double a,
                              double b) {
  double s = 0.0;
  const double eps = 1e-9 * (t(t.size() - 1) - t(0));
  for (Eigen::Index k = 0; k + 1 < t.size(); ++k) {
    if (t(k) >= a - eps && t(k + 1) <= b + eps) {
      s += 0.5 * (t(k + 1) - t(k)) * (f(k) + f(k + 1));
    }
  }
  return s;
}

inline AdjointStat adjoint_turnpike_stat(const Matrix& lambda,
                                         const Trajectory& tr, double tc,
                                         const LqModel& sys,
                                         const ControlSet& U,
                                         double margin = 1e-6) {
  AdjointStat st;
  st.tc = tc;
  const double T = tr.t(tr.t.size() - 1) - tr.t(0);
  if (!(tc > 0.0) || !(tc < T / 4.0)) {
    st.note = "precondition unmet: t_c must lie in (0, T/4)";
    return st;
  }
  const Eigen::Index K = tr.t.size();
  st.precondition_met = true;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double t = tr.t(k);
    if (t >= tc - 1e-12 && t <= T - tc + 1e-12 &&
        !U.interior(tr.u.col(k), margin)) {
      st.precondition_met = false;
      st.note = "precondition unmet: control touches the boundary of U";
    }
  }
  const GramianResult g = controllability_gramian(sys.A(), sys.B_tilde(), tc);
  st.alpha = g.alpha;
  if (!(st.alpha > 0.0)) {
    throw ValidationError("adjoint_turnpike_stat: pair is not controllable");
  }
  st.M = exp_growth_bound(sys.A(), tc);
  const double nb = norm2(sys.B_tilde());
  const double gr = (1.0 + st.M * tc) * tc;
  st.C = 8.0 / st.alpha * std::max(1.0, nb * nb * gr * gr);  // λ₀ = −1
  const Matrix W = sys.W();
  Vector l2(K), w2(K);
  Vector z(sys.n() + sys.m());
  for (Eigen::Index k = 0; k < K; ++k) {
    l2(k) = lambda.col(k).squaredNorm();
    z << tr.x.col(k), tr.u.col(k);
    w2(k) = (W * z).squaredNorm();
  }
  st.lhs = window_integral(tr.t, l2, 2.0 * tc, T - tc);
  st.rhs = tc * st.C * window_integral(tr.t, w2, tc, T - tc);
  return st;
}

// ---------------------------------------------------------------------------
// Multi-horizon report

struct HorizonRecord {
  double T = 0.0;
  int N = 0;
  bool solved = false;
  std::string error;
  double integral_stat = 0.0;
  std::vector<std::pair<double, double>> measure_stats;  // (ε, value)
  double fraction_within_01 = 0.0;
  TurnpikeBound bound;
  double F = 0.0;  // bound for this record's statistic (DAE: lifted form)
  bool bound_holds = false;
  bool bound_precondition = false;  // T > T0 + T1
  AdjointStat adjoint;
  double cost = 0.0, supplied_energy = 0.0, kkt_residual = 0.0;
  double energy_balance_residual = 0.0, terminal_error = 0.0;
  Vector profile;      // distance per grid point
  Vector lambda_norm;  // ‖λ(t_k)‖
  std::optional<OcpSolution> solution;
};

struct TurnpikeReport {
  bool dae = false;
  SubspaceBasis subspace;  // ker W (ODE, joint) or ker(RQ) (DAE, state)
  bool joint = true;
  double lambda_min = 0.0;  // of W, or of QᵀRQ for DAE input
  double W_hat_norm = 0.0;  // DAE only
  SteadyState steady_state;  // reachable optimal steady state used by the bound
  Vector steady_state_original;  // its state in the input coordinates
  std::vector<double> eps_grid;
  std::vector<HorizonRecord> records;
  std::string bound_note;  // why no bound was computed, if so
};

struct ReportOptions {
  std::vector<double> eps_grid{0.01, 0.05, 0.1, 0.5};
  double tc = -1.0;  // ≤ 0: T/10
  bool keep_solutions = true;
  bool compute_bound = true;
};

inline TurnpikeReport multi_horizon_report(
    const OcpSpec& base, const std::vector<std::pair<double, int>>& horizons,
    const ReportOptions& ro = {}) {
  TurnpikeReport rep;
  rep.dae = base.is_dae();
  rep.eps_grid = ro.eps_grid;
  const Eigen::Index n = base.n();
  if (rep.dae) {
    const auto& s = std::get<PhDaeSystem>(base.system);
    const Matrix rq = s.R * s.Q;
    rep.subspace = nullspace(rq);
    rep.joint = false;
    rep.lambda_min = min_positive_eigenvalue(s.Q.transpose() * s.R * s.Q);
  } else {
    const auto& s = std::get<PhOdeSystem>(base.system);
    rep.subspace = nullspace(s.W());
    rep.joint = true;
    rep.lambda_min = min_positive_eigenvalue(s.W());
  }
  (void)n;
  // The bound depends on the horizon only through T_hi (largest horizon).
  std::optional<TurnpikeBound> bound;
  if (ro.compute_bound && !horizons.empty()) {
    OcpSpec spec = base;
    spec.T = std::max_element(horizons.begin(), horizons.end())->first;
    try {
      DaeReduction red;
      const OdeProblem pr = ode_problem(spec, &red);
      if (red.active()) rep.W_hat_norm = norm2(pr.sys.W());
      rep.steady_state = reachable_steady_state(pr.sys, pr.x0);
      rep.steady_state_original =
          red.active() ? Vector(red.lift(rep.steady_state.x, rep.steady_state.u))
                       : rep.steady_state.x;
      bound = turnpike_bound(pr, rep.steady_state, spec.T, spec.options);
    } catch (const std::exception& e) {
      rep.bound_note = e.what();
    }
  }
  for (const auto& [T, N] : horizons) {
    HorizonRecord rec;
    rec.T = T;
    rec.N = N;
    OcpSpec spec = base;
    spec.T = T;
    spec.N = N;
    try {
      OcpSolution sol = solve_ocp(spec);
      rec.solved = true;
      rec.cost = sol.cost;
      rec.supplied_energy = sol.supplied_energy;
      rec.kkt_residual = sol.kkt_residual;
      rec.energy_balance_residual = sol.energy_balance_residual;
      rec.terminal_error = sol.terminal_error;
      rec.profile = distance_profile(sol.traj, rep.subspace, rep.joint);
      const double h = sol.traj.h();
      rec.integral_stat = integral_turnpike_stat(rec.profile, h);
      for (double e : ro.eps_grid) {
        rec.measure_stats.emplace_back(e,
                                       measure_turnpike_stat(rec.profile, h, e));
      }
      rec.fraction_within_01 = fraction_within(rec.profile, 0.1);
      const AdjointResult adj = adjoint_trajectory(sol);
      rec.lambda_norm = adj.lambda.colwise().norm().transpose();
      const double tc = ro.tc > 0.0 ? ro.tc : T / 10.0;
      try {
        rec.adjoint = adjoint_turnpike_stat(adj.lambda, sol.ode_traj, tc,
                                            sol.ode.sys, sol.ode.control);
      } catch (const std::exception& e) {
        rec.adjoint.note = e.what();
      }
      if (bound) {
        rec.bound = *bound;
        rec.bound_precondition = T > rec.bound.T_threshold;
        if (rep.dae) {
          rec.F = rep.W_hat_norm / rep.lambda_min * rec.bound.F;
        } else {
          rec.F = rec.bound.F;
        }
        rec.bound_holds = rec.integral_stat <= rec.F;
      }
      if (ro.keep_solutions) rec.solution = std::move(sol);
    } catch (const InfeasibleError& e) {
      rec.error = std::string("infeasible: ") + e.what();
    } catch (const NumericalError& e) {
      rec.error = std::string("numerical failure: ") + e.what();
    }
    rep.records.push_back(std::move(rec));
  }
  std::sort(rep.records.begin(), rep.records.end(),
            [](const HorizonRecord& a, const HorizonRecord& b) {
              return a.T < b.T;
            });
  return rep;
}

}  // namespace phtp
