// Reachability, transcription, OCP solutions and turnpike diagnostics.

#include <gtest/gtest.h>

#include <cmath>

#include "phtp/control.hpp"
#include "phtp/examples.hpp"
#include "phtp/ocp.hpp"
#include "phtp/turnpike.hpp"
#include "support/random_systems.hpp"

using namespace phtp;
using namespace phtp::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d;
}

/// ẋ = u on ℝ, or ẋ = Au + Bu with the given data and P = D = 0.
PhOdeSystem ode(const Matrix& J, const Matrix& R, const Matrix& Q,
                const Matrix& B) {
  PhOdeSystem s;
  s.J = J;
  s.R = R;
  s.Q = Q;
  s.B = B;
  s.P = Matrix::Zero(B.rows(), B.cols());
  s.D = Matrix::Zero(B.cols(), B.cols());
  return s;
}

PhOdeSystem integrator() {
  return ode(Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Identity(1, 1),
             Matrix::Identity(1, 1));
}

// One msd report shared by several tests (solving it is the slow part).
const TurnpikeReport& msd_report() {
  static const TurnpikeReport r =
      multi_horizon_report(examples::msd_spec(), examples::msd_horizons());
  return r;
}

const OcpSolution& msd_solution() {
  static const OcpSolution s = solve_ocp(examples::msd_spec());
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// control

TEST(Kalman, Examples) {
  EXPECT_TRUE(kalman_subspace(Matrix::Identity(3, 3), Matrix::Zero(3, 1)).is_trivial());
  EXPECT_EQ(kalman_subspace(Matrix::Zero(3, 3), Matrix::Identity(3, 3)).dim(), 3);
  const PhOdeSystem m = examples::msd_system();
  EXPECT_EQ(kalman_subspace(m.A(), m.B_tilde()).dim(), 3);
  EXPECT_TRUE(is_controllable(m.A(), m.B_tilde()));
}

TEST(RControllability, Examples) {
  PhDaeSystem s;
  s.E = Matrix::Identity(2, 2);
  s.J = s.R = Matrix::Zero(2, 2);
  s.Q = Matrix::Identity(2, 2);
  s.B = Matrix::Identity(2, 2);
  EXPECT_TRUE(is_r_controllable(s));
  s.R = Matrix::Identity(2, 2);
  s.B = Matrix::Zero(2, 1);
  EXPECT_FALSE(is_r_controllable(s));
}

TEST(RControllability, RobotSpringSumIsConserved) {
  // cᵀ(sE − A) = s·cᵀE with c = (1,1,1,0,0) since E₃₃ = 0: x₁ + x₂ never
  // moves, whatever the input.
  const PhDaeSystem r = examples::robot_system();
  const Vector c = vec({1, 1, 1, 0, 0});
  EXPECT_LE((c.transpose() * r.A()).norm(), 1e-15);
  EXPECT_LE((c.transpose() * r.B).norm(), 1e-15);
  EXPECT_FALSE(is_r_controllable(r));
  const QwReduction q = qw_reduce(r);
  EXPECT_FALSE(is_controllable(q.model.A(), q.model.B_tilde()));
}

TEST(RControllability, MatchesReducedPair) {
  Rng rng(51);
  for (int c = 0; c < 20; ++c) {
    const PhDaeSystem d = random_index1_dae(rng, 3, 2, 1, c % 2 == 0);
    const BeattieReduction r = beattie_reduce(d);
    EXPECT_EQ(is_r_controllable(d),
              is_controllable(r.reduced.A(), r.reduced.B_tilde()));
  }
}

TEST(SteadyStates, ZeroIsAlwaysOptimal) {
  const PhOdeSystem m = examples::msd_system();
  const OptimalSteadyStates o = optimal_steady_states(m, ControlSet::default_box(1));
  EXPECT_TRUE(o.representative.optimal);
  // For the msd, W(x;u) = 0 forces x₁ = −x₂ and the dynamics then force 0.
  EXPECT_TRUE(o.basis.is_trivial());
  EXPECT_EQ(o.representative.x.norm(), 0.0);
}

TEST(SteadyStates, KernelOfQTimesZeroIsIncluded) {
  Rng rng(52);
  const PhOdeSystem s = random_ph_ode(rng, 4, 1, {.q_rank = 2, .feedthrough = false});
  const OptimalSteadyStates o = optimal_steady_states(s, ControlSet::default_box(1));
  const SubspaceBasis kq = nullspace(s.Q);
  ASSERT_EQ(kq.dim(), 2);
  for (Eigen::Index j = 0; j < kq.dim(); ++j) {
    Vector v(5);
    v << kq.basis().col(j), 0.0;
    EXPECT_LE(dist_to_subspace(v, o.basis), 1e-9);
  }
}

TEST(SteadyStates, MatchesBruteForceNullspace) {
  Rng rng(53);
  for (int c = 0; c < 20; ++c) {
    const Eigen::Index n = uniform_int(rng, 2, 5), m = uniform_int(rng, 1, 2);
    const PhOdeSystem s =
        random_ph_ode(rng, n, m, {.q_rank = uniform_int(rng, 1, static_cast<int>(n)),
                                  .w_rank = 1});
    Matrix stacked(n + n + m, n + m);
    stacked << s.A(), s.B_tilde(), s.W();
    const SubspaceBasis ref = nullspace(stacked);
    const OptimalSteadyStates o = optimal_steady_states(s, ControlSet::default_box(m));
    ASSERT_EQ(o.basis.dim(), ref.dim());
    if (ref.dim() > 0) {
      EXPECT_LE((o.basis.projector() - ref.projector()).norm(), 1e-8);
    }
  }
}

TEST(SteadyStates, DaeLift) {
  const PhDaeSystem r = examples::robot_system();
  EXPECT_LE(dae_steady_state_lift(r, Vector::Zero(5), Vector::Zero(1)).norm(), 1e-14);
  // Spring elongations (a, b) with no motion: x₃ = 0 is forced by x₄ = x₅ = 0.
  const Vector w = r.E * vec({2, 0, 0, 0, 0});
  const Vector x = dae_steady_state_lift(r, w, Vector::Zero(1));
  EXPECT_NEAR(x(0), 2.0, 1e-10);
  EXPECT_NEAR(x(3), 0.0, 1e-10);
  EXPECT_NEAR(x(4), 0.0, 1e-10);
  EXPECT_LE((r.A() * x).norm(), 1e-10);
}

TEST(SteadyStates, RobotReachableSteadyState) {
  const QwReduction q = qw_reduce(examples::robot_system());
  const Vector xi0 = q.to_xi(vec({1, 1, 0, 1, 0}));
  const SteadyState ss = reachable_steady_state(q.model, xi0, 1e-9);
  const Vector x = q.lift_state(ss.x, ss.u);
  // The conserved sum x₁ + x₂ = 2 must be kept; the cheapest rest point puts
  // it all on the first spring, which carries no energy (k₁ = 0).
  EXPECT_NEAR(x(0) + x(1), 2.0, 1e-9);
  EXPECT_NEAR(x(1), 0.0, 1e-9);
  EXPECT_NEAR(ss.u.norm(), 0.0, 1e-9);
}

TEST(Gramian, Examples) {
  const GramianResult g =
      controllability_gramian(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 1.0);
  EXPECT_LE((g.G - Matrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_NEAR(g.alpha, 1.0, 1e-12);
  const GramianResult z =
      controllability_gramian(Matrix::Identity(2, 2), Matrix::Zero(2, 1), 1.0);
  EXPECT_EQ(z.alpha, 0.0);
  const PhOdeSystem m = examples::msd_system();
  const GramianResult a = controllability_gramian(m.A(), m.B_tilde(), 1.0);
  EXPECT_GT(a.alpha, 0.0);
  const Matrix fine = gramian_simpson(m.A(), m.B_tilde(), 1.0, 10 * a.steps);
  EXPECT_LE((a.G - fine).norm(), 1e-6 * fine.norm());
}

TEST(Gramian, MatchesLyapunovOnStableSystem) {
  // For Hurwitz A: G_t = X − e^{tA} X e^{tAᵀ} with AX + XAᵀ = −BBᵀ.
  Rng rng(54);
  const Matrix A = randn(rng, 3, 3) - 3.0 * Matrix::Identity(3, 3);
  const Matrix B = randn(rng, 3, 1);
  const Matrix X = solve_lyapunov(A, -B * B.transpose());
  const Matrix e = expm(A, 0.8);
  const Matrix ref = X - e * X * e.transpose();
  const GramianResult g = controllability_gramian(A, B, 0.8);
  EXPECT_LE((g.G - ref).norm(), 1e-7 * ref.norm());
}

TEST(GrowthBound, Examples) {
  EXPECT_NEAR(exp_growth_bound(Matrix::Zero(2, 2), 5.0), 1e-6, 1e-18);
  Rng rng(55);
  EXPECT_NEAR(exp_growth_bound(random_skew(rng, 3), 5.0), 1e-6, 1e-9);
  const PhOdeSystem m = examples::msd_system();
  const GrowthBound g = exp_growth_bound_report(m.A(), 20.0);
  EXPECT_TRUE(g.verified);
  EXPECT_TRUE(std::isfinite(g.M));
  for (double t : {0.01, 0.3, 1.0, 5.0, 20.0}) {
    EXPECT_LE(norm2(expm(m.A(), t)), 1.0 + g.M * t + 1e-12);
  }
}

TEST(MinimalTime, Examples) {
  const ControlSet unit = ControlSet::box(vec({-1}), vec({1}));
  const TimeEstimate a = minimal_time_estimate(integrator(), vec({0}),
                                               TargetSet::at(vec({0})), unit, 5.0);
  EXPECT_NEAR(a.upper, 0.0, 0.02);
  const TimeEstimate b = minimal_time_estimate(integrator(), vec({0}),
                                               TargetSet::at(vec({1})), unit, 5.0);
  EXPECT_NEAR(b.upper, 1.0, 0.02);
  EXPECT_LE(b.lower, 1.0 + 1e-9);
  const OcpSpec s = examples::msd_spec();
  const TimeEstimate c = minimal_time_estimate(std::get<PhOdeSystem>(s.system),
                                               s.initial, s.target, s.control, 20.0);
  EXPECT_LE(c.upper, 10.0);
}

// ---------------------------------------------------------------------------
// ocp

TEST(Feasibility, Examples) {
  OcpSpec s;
  s.system = integrator();
  s.T = 1.0;
  s.N = 10;
  s.initial = vec({0});
  s.target = TargetSet::at(vec({0}));
  s.control = ControlSet::default_box(1);
  const FeasibilityResult a = feasibility_check(s);
  EXPECT_TRUE(a.feasible);
  EXPECT_NEAR(a.distance, 0.0, 1e-8);

  OcpSpec b = s;
  b.system = ode(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                 Matrix::Zero(2, 1));
  b.initial = Vector::Zero(2);
  b.target = TargetSet::at(vec({2, 2}));
  const FeasibilityResult r = feasibility_check(b);
  EXPECT_FALSE(r.feasible);
  EXPECT_NEAR(r.distance, std::sqrt(8.0), 1e-6);
  EXPECT_THROW(solve_ocp(b), InfeasibleError);

  EXPECT_TRUE(feasibility_check(examples::msd_spec()).feasible);
}

TEST(Transcription, HandAssembledToy) {
  // ẋ = −x + u (J = 0, R = 1, Q = 1, B = 1), N = 2, exact ZOH.
  OdeProblem pr;
  pr.sys = LqModel::of(ode(Matrix::Zero(1, 1), Matrix::Identity(1, 1),
                           Matrix::Identity(1, 1), Matrix::Identity(1, 1)));
  pr.T = 1.0;
  pr.N = 2;
  pr.x0 = vec({1});
  pr.target = TargetSet::free();
  pr.control = ControlSet::default_box(1);
  const TranscribedQp t = transcribe(pr);
  ASSERT_EQ(t.qp.num_vars(), 2 + 3);
  const double h = 0.5, e = std::exp(-h);
  const Matrix A = Matrix(t.qp.A);
  // Defect rows: x_{k+1} − e^{−h}x_k − (1 − e^{−h})u_k = 0 (up to sign).
  for (int k = 0; k < 2; ++k) {
    const Eigen::Index row = t.defect_row0 + k;
    const double s = A(row, t.x_index(k + 1));
    ASSERT_NEAR(std::abs(s), 1.0, 1e-14);
    EXPECT_NEAR(A(row, t.x_index(k)) / s, -e, 1e-14);
    EXPECT_NEAR(A(row, t.u_index(k)) / s, -(1.0 - e), 1e-14);
  }
  // Cost ∫ x² dt on [0, h] with x = e^{−t}x₀ + (1 − e^{−t})u:
  // ∫e^{−2t} = (1 − e^{−2h})/2, coefficient of x₀² in ½zᵀHz.
  const Matrix H = Matrix(t.qp.H);
  EXPECT_NEAR(0.5 * H(t.x_index(0), t.x_index(0)), (1.0 - std::exp(-2 * h)) / 2.0,
              1e-12);
  // Terminal ½x_N²
  EXPECT_NEAR(0.5 * H(t.x_index(2), t.x_index(2)), 0.5, 1e-12);
}

TEST(Transcription, MsdVariableCount) {
  const OdeProblem pr = ode_problem(examples::msd_spec(10.0, 100), nullptr);
  const TranscribedQp t = transcribe(pr);
  EXPECT_EQ(t.qp.num_vars(), 100 * 1 + 101 * 3);
}

TEST(Solve, StayingPutCostsNothing) {
  Rng rng(61);
  PhOdeSystem s = random_ph_ode(rng, 3, 1, {.feedthrough = false});
  OcpSpec spec;
  spec.system = s;
  spec.T = 2.0;
  spec.N = 40;
  spec.initial = Vector::Zero(3);
  spec.target = TargetSet::at(Vector::Zero(3));
  spec.control = ControlSet::default_box(1);
  const OcpSolution sol = solve_ocp(spec);
  EXPECT_LE(sol.traj.u.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(sol.cost, 0.0, 1e-9);
}

TEST(Solve, MsdSolution) {
  const OcpSolution& sol = msd_solution();
  EXPECT_LE(sol.terminal_error, 1e-6);
  EXPECT_GT(sol.supplied_energy, 0.0);
  EXPECT_LE(sol.kkt_residual, 1e-8);
  // cost = H(x(T)) + dissipation = H(x⁰) + supplied energy
  const PhOdeSystem m = examples::msd_system();
  EXPECT_NEAR(sol.cost, hamiltonian(m, Vector::Ones(3)) + sol.supplied_energy,
              1e-6 * (1.0 + sol.cost));
  EXPECT_LE(sol.energy_balance_residual, 1e-6 * (1.0 + std::abs(sol.supplied_energy)));
  for (Eigen::Index k = 0; k < sol.traj.u.cols(); ++k) {
    EXPECT_TRUE(sol.ode.control.contains(sol.traj.u.col(k)));
  }
}

TEST(Solve, MsdDiscretizationsAgree) {
  OcpSpec spec = examples::msd_spec();
  spec.options.discretization = Discretization::Rk4;
  const OcpSolution rk = solve_ocp(spec);
  EXPECT_NEAR(rk.cost, msd_solution().cost, 1e-4 * msd_solution().cost);
}

TEST(Solve, RobotReachesTarget) {
  const OcpSolution sol = solve_ocp(examples::robot_spec(15.0, 1500));
  const PhDaeSystem r = examples::robot_system();
  const Eigen::Index N = sol.traj.steps();
  EXPECT_LE((r.E * sol.traj.x.col(N) - vec({1, 1, 0, 2, 0})).norm(), 1e-6);
  // Lifted states satisfy the algebraic constraint x₃ = x₄/m_A − x₅/m_B… via
  // the DAE: the E-singular row of (J − R)Qx + Bu vanishes.
  for (Eigen::Index k = 0; k < N; k += 100) {
    const Vector res = r.A() * sol.traj.x.col(k) + r.B * sol.traj.u.col(k);
    EXPECT_LE(std::abs(res(2)), 1e-8);
  }
  const double mid = std::hypot(sol.traj.x(3, N / 2), sol.traj.x(4, N / 2));
  EXPECT_LE(mid, 1e-2);
}

TEST(Energy, UnforcedDissipationOnly) {
  Rng rng(62);
  const PhOdeSystem s = random_ph_ode(rng, 4, 2);
  const Trajectory t = simulate_ode(s, Matrix::Zero(2, 200), randn(rng, 4, 1), 2.0);
  const EnergyAudit e = energy_audit(s, t.t, t.x, t.u, Discretization::Rk4);
  EXPECT_LE(e.residual, 1e-8);
  EXPECT_NEAR(e.supplied, 0.0, 1e-14);
  for (Eigen::Index k = 0; k + 1 < t.t.size(); ++k) {
    EXPECT_LE(hamiltonian(s, t.x.col(k + 1)), hamiltonian(s, t.x.col(k)) + 1e-12);
  }
}

TEST(Energy, MsdRandomControlConverges) {
  Rng rng(63);
  const PhOdeSystem s = examples::msd_system();
  const Matrix u = randn(rng, 1, 400);
  const Trajectory t = simulate_ode(s, u, Vector::Ones(3), 4.0);
  const EnergyAudit e = energy_audit(s, t.t, t.x, t.u, Discretization::Rk4);
  EXPECT_LE(e.residual, 1e-6 * (1.0 + std::abs(e.supplied)));
}

TEST(Energy, RobotDaeTrajectory) {
  const PhDaeSystem r = examples::robot_system();
  Matrix u(1, 400);
  for (int k = 0; k < 400; ++k) u(0, k) = std::sin(0.05 * k);
  // h = 1e-3 keeps RK4 accurate on the fast damper mode (about −270).
  const Trajectory t = solve_dae_ivp(r, u, vec({1, 1, 0, 1, 0}), 0.4);
  const EnergyAudit e = energy_audit(r, t, Discretization::Rk4);
  EXPECT_LE(e.residual, 1e-6 * (1.0 + std::abs(e.supplied)));
}

TEST(Adjoint, FreeEndpointMatchesDiscreteMultipliers) {
  OcpSpec spec = examples::msd_spec(5.0, 200);
  spec.target = TargetSet::free();
  const OcpSolution sol = solve_ocp(spec);
  const AdjointResult adj = adjoint_trajectory(sol);
  const Eigen::Index N = sol.traj.steps();
  // λ(T) = −Qx(T) without a terminal constraint
  EXPECT_LE((adj.lambda.col(N) + sol.traj.x.col(N)).norm(), 1e-9);
  const double scale = adj.lambda.cwiseAbs().maxCoeff();
  EXPECT_LE((adj.lambda - sol.lambda_discrete).cwiseAbs().maxCoeff(),
            1e-5 * std::max(1.0, scale));
}

TEST(Adjoint, StationarityOnInteriorArcs) {
  // Next to the saturated end intervals the residual decays geometrically
  // over a few grid points (about 4x per step), so only the middle 80% of
  // the horizon is checked.
  const AdjointResult adj = adjoint_trajectory(msd_solution());
  const auto& st = adj.stationarity;
  const Eigen::Index N = st.size() - 1;
  double worst = 0.0;
  int checked = 0;
  for (Eigen::Index k = N / 10; k <= N - N / 10; ++k) {
    if (std::isfinite(st(k))) {
      worst = std::max(worst, st(k));
      ++checked;
    }
  }
  EXPECT_GT(checked, N / 2);
  EXPECT_LE(worst, 1e-5);
  EXPECT_GT(st(1), st(4));
}

TEST(Adjoint, MsdTurnpikeShape) {
  const AdjointResult adj = adjoint_trajectory(msd_solution());
  const Eigen::Index N = adj.lambda.cols() - 1;
  const double mid = adj.lambda.col(N / 2).norm();
  const double ends = std::max(adj.lambda.col(0).norm(), adj.lambda.col(N).norm());
  EXPECT_LT(mid, 0.1 * ends);
}

// ---------------------------------------------------------------------------
// turnpike

TEST(Profile, Examples) {
  Trajectory t;
  t.t = uniform_grid(1.0, 4);
  t.x = Matrix::Zero(3, 5);
  t.x.row(2).setLinSpaced(5, 0.0, 1.0);
  t.u = Matrix::Zero(1, 5);
  const PhOdeSystem m = examples::msd_system();
  EXPECT_EQ(distance_profile(t, nullspace(m.W()), true).norm(), 0.0);

  const OcpSolution& sol = msd_solution();
  const Vector d = distance_profile(sol.traj, nullspace(m.W()), true);
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    EXPECT_NEAR(d(k), std::abs(sol.traj.x(0, k) + sol.traj.x(1, k)) / std::sqrt(2.0),
                1e-12);
  }
}

TEST(Stats, ClosedForms) {
  const Vector z = Vector::Zero(11);
  EXPECT_EQ(integral_turnpike_stat(z, 0.1), 0.0);
  EXPECT_EQ(measure_turnpike_stat(z, 0.1, 0.05), 0.0);
  const Vector c = Vector::Constant(11, 0.3);
  EXPECT_NEAR(integral_turnpike_stat(c, 0.1), 0.09 * 1.0, 1e-14);
  const Vector e = Vector::Constant(11, 0.2);
  EXPECT_NEAR(measure_turnpike_stat(e, 0.1, 0.1), 1.0, 1e-14);
  EXPECT_THROW(measure_turnpike_stat(e, 0.1, 0.0), ValidationError);
}

TEST(Bound, ZeroStartGivesNoApproachTerm) {
  const PhOdeSystem m = examples::msd_system();
  SteadyState ss;
  ss.x = Vector::Zero(3);
  ss.u = Vector::Zero(1);
  const TurnpikeBound b = turnpike_constants(LqModel::of(m), Vector::Zero(3), ss,
                                             10.0, 10.0, 0.0, 3.0, 0.5);
  EXPECT_EQ(b.G0, 0.0);
  EXPECT_NEAR(b.F, (b.G1 + b.G2) / b.lambda_min, 1e-12 * b.F);
  EXPECT_NEAR(b.lambda_min, 2.0, 1e-12);
}

TEST(Bound, MonotoneInControlBound) {
  const LqModel m = LqModel::of(examples::msd_system());
  SteadyState ss;
  ss.x = Vector::Zero(3);
  ss.u = Vector::Zero(1);
  const Vector x0 = Vector::Ones(3);
  const TurnpikeBound a = turnpike_constants(m, x0, ss, 5.0, 5.0, 2.0, 3.0, 0.5);
  const TurnpikeBound b = turnpike_constants(m, x0, ss, 10.0, 10.0, 2.0, 3.0, 0.5);
  EXPECT_LE(a.G0, b.G0);
  EXPECT_LE(a.G1, b.G1);
  EXPECT_LE(a.G2, b.G2);
}

TEST(Bound, RejectsNonOptimalSteadyState) {
  const LqModel m = LqModel::of(examples::msd_system());
  SteadyState ss;
  ss.x = vec({1, 0, 0});
  ss.u = Vector::Zero(1);
  EXPECT_THROW(turnpike_constants(m, Vector::Ones(3), ss, 10, 10, 1, 1, 1),
               ValidationError);
}

TEST(AdjointStatTest, ZeroAdjoint) {
  const OcpSolution& sol = msd_solution();
  const Matrix zero = Matrix::Zero(3, sol.ode_traj.t.size());
  const AdjointStat st =
      adjoint_turnpike_stat(zero, sol.ode_traj, 2.0, sol.ode.sys, sol.ode.control);
  EXPECT_EQ(st.lhs, 0.0);
  EXPECT_LE(st.lhs, st.rhs);
}

TEST(AdjointStatTest, MsdBoundHolds) {
  const OcpSolution& sol = msd_solution();
  const AdjointResult adj = adjoint_trajectory(sol);
  const AdjointStat st =
      adjoint_turnpike_stat(adj.lambda, sol.ode_traj, 2.0, sol.ode.sys, sol.ode.control);
  EXPECT_TRUE(st.precondition_met) << st.note;
  EXPECT_LE(st.lhs, st.rhs);
  EXPECT_GT(st.alpha, 0.0);
}

TEST(AdjointStatTest, RejectsWideCutoff) {
  const OcpSolution& sol = msd_solution();
  const AdjointStat st = adjoint_turnpike_stat(sol.lambda_discrete, sol.ode_traj, 6.0,
                                               sol.ode.sys, sol.ode.control);
  EXPECT_FALSE(st.precondition_met);
}

TEST(Report, TrivialSpecHasZeroStatistics) {
  OcpSpec spec = examples::msd_spec(5.0, 50);
  spec.initial = Vector::Zero(3);
  spec.target = TargetSet::at(Vector::Zero(3));
  const TurnpikeReport r = multi_horizon_report(spec, {{5.0, 50}});
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_TRUE(r.records[0].solved) << r.records[0].error;
  EXPECT_NEAR(r.records[0].integral_stat, 0.0, 1e-12);
  EXPECT_NEAR(r.records[0].cost, 0.0, 1e-9);
}

TEST(Report, MsdHorizonsShareOneBound) {
  const TurnpikeReport& r = msd_report();
  ASSERT_EQ(r.records.size(), 3u);
  const double F = r.records.front().F;
  for (const auto& rec : r.records) {
    ASSERT_TRUE(rec.solved) << rec.error;
    EXPECT_NEAR(rec.F, F, 1e-9 * F);
    EXPECT_LE(rec.integral_stat, F);
    EXPECT_TRUE(rec.bound_holds);
  }
  // majority of the longest horizon spent near ker W
  const auto& last = r.records.back();
  for (const auto& [eps, v] : last.measure_stats) {
    if (std::abs(eps - 0.1) < 1e-12) EXPECT_LT(v, 0.5 * last.T);
  }
  EXPECT_GE(last.fraction_within_01, 0.6);
}

TEST(Report, MsdGridRefinementConverges) {
  // The saturated first interval has length h, so the statistic moves by
  // O(h) under refinement (about 10% from N = 200 to 400). Check that the
  // increments shrink and that the refined values stay below the bound.
  std::vector<double> s;
  for (int N : {200, 400, 800}) {
    const TurnpikeReport r =
        multi_horizon_report(examples::msd_spec(20.0, N), {{20.0, N}});
    ASSERT_TRUE(r.records[0].solved);
    EXPECT_LE(r.records[0].integral_stat, r.records[0].F);
    s.push_back(r.records[0].integral_stat);
  }
  EXPECT_LT(std::abs(s[2] - s[1]), 0.5 * std::abs(s[1] - s[0]));
  EXPECT_LT(s[2], s[1]);
  EXPECT_LT(s[1], s[0]);
}

TEST(Report, RobotHorizonsStayOffTheDampers) {
  const TurnpikeReport r =
      multi_horizon_report(examples::robot_spec(), {{5.0, 1000}, {10.0, 2000}});
  EXPECT_TRUE(r.dae);
  for (const auto& rec : r.records) {
    ASSERT_TRUE(rec.solved) << rec.error;
    const Eigen::Index N = rec.profile.size() - 1;
    const Trajectory& t = rec.solution->traj;
    for (Eigen::Index k = 0; k <= N; k += N / 10) {
      EXPECT_NEAR(rec.profile(k), std::hypot(t.x(3, k), t.x(4, k)), 1e-9);
    }
    EXPECT_LE(rec.profile(N / 2), 0.05 * rec.profile.maxCoeff());
  }
}
