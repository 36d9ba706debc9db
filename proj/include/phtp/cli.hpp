#pragma once

// Subcommand dispatch for the phtp command-line tool. Argument parsing lives
// in tools/main.cpp; everything here is callable from tests.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "phtp/control.hpp"
#include "phtp/decomp.hpp"
#include "phtp/examples.hpp"
#include "phtp/io.hpp"
#include "phtp/ocp.hpp"
#include "phtp/pencil.hpp"
#include "phtp/turnpike.hpp"

namespace phtp::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kValidation = 2,
  kInfeasible = 3,
  kNumerical = 4,
};

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string out = "out";
  std::string example;             // reproduce: msd | robot
  std::optional<double> tol;       // QP tolerance override
  std::optional<double> horizon;   // T override
  std::optional<int> steps;        // N override
  std::vector<double> eps_grid;    // empty: default grid

  /// Throws ValidationError on bad combinations.
  void check() const {
    static const std::vector<std::string> known{
        "validate", "analyze-pencil", "analyze-control", "reduce",
        "solve",    "turnpike",       "reproduce"};
    if (std::find(known.begin(), known.end(), subcommand) == known.end()) {
      throw ValidationError("unknown subcommand '" + subcommand + "'");
    }
    if (subcommand == "reproduce") {
      if (example != "msd" && example != "robot") {
        throw ValidationError("reproduce needs --example msd|robot");
      }
    } else if (input.empty()) {
      throw ValidationError(subcommand + " needs --input");
    }
    if (tol && !(*tol > 0.0)) throw ValidationError("--tol must be positive");
    if (horizon && !(*horizon > 0.0)) {
      throw ValidationError("--horizon must be positive");
    }
    if (steps && *steps < 2) throw ValidationError("--steps must be at least 2");
    for (double e : eps_grid) {
      if (!(e > 0.0)) throw ValidationError("--eps-grid entries must be positive");
    }
  }
};

namespace detail {

using io::Json;
namespace fs = std::filesystem;

inline Json basis_json(const SubspaceBasis& s) {
  Json cols = Json::array();
  for (Eigen::Index j = 0; j < s.dim(); ++j) {
    cols.push_back(io::to_json(Vector(s.basis().col(j))));
  }
  return cols;
}

inline Json violations_json(const std::vector<Violation>& v) {
  Json a = Json::array();
  for (const auto& x : v) {
    a.push_back({{"condition", x.condition}, {"residual", x.residual}});
  }
  return a;
}

inline Json complex_json(const std::vector<Complex>& ev) {
  Json a = Json::array();
  for (const auto& z : ev) a.push_back({z.real(), z.imag()});
  return a;
}

inline OcpSpec apply_overrides(OcpSpec spec, const RunConfig& cfg) {
  if (cfg.horizon) spec.T = *cfg.horizon;
  if (cfg.steps) spec.N = *cfg.steps;
  if (cfg.tol) spec.options.qp_tol = *cfg.tol;
  return spec;
}

inline io::LoadedSystem load_system(const RunConfig& cfg) {
  return io::system_from_json(io::load_json(cfg.input));
}

/// The joint (ODE) or state-only (DAE) turnpike subspace of a spec.
inline std::pair<SubspaceBasis, bool> turnpike_subspace(const OcpSpec& spec) {
  if (spec.is_dae()) {
    const auto& s = std::get<PhDaeSystem>(spec.system);
    return {nullspace(s.R * s.Q), false};
  }
  return {nullspace(std::get<PhOdeSystem>(spec.system).W()), true};
}

inline std::string trajectory_csv(const OcpSolution& sol, const Matrix& lambda,
                                  const Vector& dist) {
  const Trajectory& tr = sol.traj;
  std::vector<std::string> names{"t"};
  std::vector<Vector> cols{tr.t};
  auto add = [&](const char* p, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      names.push_back(p + std::to_string(i + 1));
      cols.push_back(m.row(i).transpose());
    }
  };
  add("x", tr.x);
  add("u", tr.u);
  add("y", tr.y);
  add("lambda", lambda);
  names.push_back("distW");
  cols.push_back(dist);
  return io::csv(names, cols);
}

inline Json solution_json(const OcpSolution& sol) {
  return {{"cost", sol.cost},
          {"supplied_energy", sol.supplied_energy},
          {"dissipated_energy", sol.dissipated_energy},
          {"kkt_residual", sol.kkt_residual},
          {"energy_balance_residual", sol.energy_balance_residual},
          {"terminal_error", sol.terminal_error},
          {"iterations", sol.iterations},
          {"control_set_default", sol.control_set_default}};
}

inline Json bound_json(const TurnpikeBound& b) {
  return {{"F", b.F},           {"T_threshold", b.T_threshold},
          {"G0", b.G0},         {"G1", b.G1},
          {"G1_displayed", b.G1_displayed},
          {"G1_proof", b.G1_proof},
          {"G2", b.G2},         {"M", b.M},
          {"lambda_min", b.lambda_min},
          {"u_max", b.u_max},   {"u1_max", b.u1_max},
          {"T0", b.T0},         {"T1", b.T1},
          {"T0_lower", b.T0_lower},
          {"T1_lower", b.T1_lower}};
}

inline std::string tag(double T) {
  std::ostringstream s;
  s << T;
  return s.str();
}

inline Json report_json(const TurnpikeReport& rep) {
  Json j;
  j["dae"] = rep.dae;
  j["subspace"] = {{"kind", rep.dae ? "ker(RQ)" : "ker W"},
                   {"joint", rep.joint},
                   {"basis", basis_json(rep.subspace)}};
  j["lambda_min"] = rep.lambda_min;
  if (rep.dae) j["W_hat_norm"] = rep.W_hat_norm;
  j["steady_state"] = {{"x", io::to_json(rep.steady_state.x)},
                       {"u", io::to_json(rep.steady_state.u)},
                       {"x_original", io::to_json(rep.steady_state_original)}};
  j["eps_grid"] = rep.eps_grid;
  if (!rep.bound_note.empty()) j["bound_note"] = rep.bound_note;
  Json recs = Json::array();
  for (const auto& r : rep.records) {
    Json x = {{"T", r.T}, {"N", r.N}, {"solved", r.solved}};
    if (!r.solved) {
      x["error"] = r.error;
      recs.push_back(std::move(x));
      continue;
    }
    x["integral_stat"] = r.integral_stat;
    Json ms = Json::array();
    for (const auto& [e, v] : r.measure_stats) {
      ms.push_back({{"eps", e},
                    {"value", v},
                    {"bound", r.F > 0.0 ? r.F / (e * e) : 0.0}});
    }
    x["measure_stat"] = ms;
    x["fraction_within_0.1"] = r.fraction_within_01;
    x["F"] = r.F;
    x["bound_holds"] = r.bound_holds;
    x["bound_precondition"] = r.bound_precondition;
    x["constants"] = bound_json(r.bound);
    x["adjoint"] = {{"lhs", r.adjoint.lhs},
                    {"rhs", r.adjoint.rhs},
                    {"C", r.adjoint.C},
                    {"alpha", r.adjoint.alpha},
                    {"M", r.adjoint.M},
                    {"tc", r.adjoint.tc},
                    {"precondition_met", r.adjoint.precondition_met},
                    {"note", r.adjoint.note}};
    x["cost"] = r.cost;
    x["supplied_energy"] = r.supplied_energy;
    x["kkt_residual"] = r.kkt_residual;
    x["energy_balance_residual"] = r.energy_balance_residual;
    x["terminal_error"] = r.terminal_error;
    recs.push_back(std::move(x));
  }
  j["records"] = recs;
  return j;
}

inline void write_profiles(const TurnpikeReport& rep, const fs::path& out) {
  for (const auto& r : rep.records) {
    if (!r.solved) continue;
    const Vector t = uniform_grid(r.T, r.N);
    io::write_atomic(out / ("profile_T" + tag(r.T) + ".csv"),
                     io::csv({"t", "dist", "lambda_norm"},
                             {t, r.profile, r.lambda_norm}));
  }
}

/// Whitespace-separated columns for gnuplot, one file per horizon.
inline void write_plot_data(const TurnpikeReport& rep, const fs::path& out) {
  std::string script = "# run inside this directory: gnuplot -p figures.gp\n";
  std::string states, controls, dists, adj;
  for (const auto& r : rep.records) {
    if (!r.solved || !r.solution) continue;
    const Trajectory& tr = r.solution->traj;
    std::vector<std::string> names{"#t"};
    std::vector<Vector> cols{tr.t};
    for (Eigen::Index i = 0; i < tr.x.rows(); ++i) {
      names.push_back("x" + std::to_string(i + 1));
      cols.push_back(tr.x.row(i).transpose());
    }
    for (Eigen::Index i = 0; i < tr.u.rows(); ++i) {
      names.push_back("u" + std::to_string(i + 1));
      cols.push_back(tr.u.row(i).transpose());
    }
    names.push_back("dist");
    cols.push_back(r.profile);
    names.push_back("lambda_norm");
    cols.push_back(r.lambda_norm);
    const std::string file = "plot_T" + tag(r.T) + ".dat";
    io::write_atomic(out / file, io::csv(names, cols, ' '));
    const std::string q = "'" + file + "'";
    const std::string sep = states.empty() ? "plot " : ", ";
    const Eigen::Index n = tr.x.rows(), m = tr.u.rows();
    states += sep + q + " using 1:2 with lines title 'x1, T=" + tag(r.T) + "'";
    controls += sep + q + " using 1:" + std::to_string(n + 2) +
                " with lines title 'u1, T=" + tag(r.T) + "'";
    dists += sep + q + " using 1:" + std::to_string(n + m + 2) +
             " with lines title 'dist, T=" + tag(r.T) + "'";
    adj += sep + q + " using 1:" + std::to_string(n + m + 3) +
           " with lines title '|lambda|, T=" + tag(r.T) + "'";
  }
  script += "set multiplot layout 2,2\n" + states + "\n" + controls + "\n" +
            dists + "\n" + adj + "\nunset multiplot\n";
  io::write_atomic(out / "figures.gp", script);
}

// --- subcommands ------------------------------------------------------------

inline int cmd_validate(const RunConfig& cfg, Json& rep) {
  const io::LoadedSystem ls = load_system(cfg);
  rep["kind"] = ls.dae ? "pH-DAE" : "pH-ODE";
  rep["valid"] = ls.ok();
  rep["violations"] = violations_json(ls.violations);
  return ls.ok() ? kOk : kValidation;
}

inline int cmd_analyze_pencil(const RunConfig& cfg, Json& rep) {
  const io::LoadedSystem ls = load_system(cfg);
  if (!ls.ok()) {
    rep["violations"] = violations_json(ls.violations);
    return kValidation;
  }
  PhDaeSystem d;
  if (ls.dae) {
    d = std::get<PhDaeSystem>(ls.system);
  } else {
    const auto& o = std::get<PhOdeSystem>(ls.system);
    d = PhDaeSystem{Matrix::Identity(o.n(), o.n()), o.J, o.R, o.Q,
                    o.B - o.P};
  }
  const Matrix A = d.A();
  const RegularityResult reg = is_regular(d.E, A);
  rep["regular"] = reg.regular;
  rep["dh_regularity_condition"] = dh_regularity_check(d);
  rep["dh_index_le1_condition"] = dh_index_le1_check(d);
  if (!reg.regular) return kOk;
  const QuasiWeierstrass q = quasi_weierstrass(d.E, A);
  rep["index"] = q.index;
  rep["n1"] = q.n1();
  rep["n2"] = q.n2();
  rep["qw_residual"] = q.residual;
  rep["finite_eigenvalues"] = complex_json(eigenvalues(q.C));
  const DhCertificate c = is_dh_pencil(d.E, A);
  rep["dh_pencil"] = c.dh;
  rep["dh_conditions"] = c.conditions;
  return kOk;
}

inline int cmd_analyze_control(const RunConfig& cfg, Json& rep) {
  const io::LoadedSystem ls = load_system(cfg);
  if (!ls.ok()) {
    rep["violations"] = violations_json(ls.violations);
    return kValidation;
  }
  LqModel model;
  if (ls.dae) {
    const auto& d = std::get<PhDaeSystem>(ls.system);
    rep["r_controllable"] = is_r_controllable(d);
    if (dh_regularity_check(d) && dh_index_le1_check(d)) {
      model = LqModel::of(beattie_reduce(d).reduced);
      rep["reduction"] = "structured";
    } else {
      model = qw_reduce(d).model;
      rep["reduction"] = "quasi-weierstrass";
    }
  } else {
    model = LqModel::of(std::get<PhOdeSystem>(ls.system));
  }
  const SubspaceBasis k = kalman_subspace(model.A(), model.B_tilde());
  rep["kalman_dim"] = k.dim();
  rep["n"] = model.n();
  rep["controllable"] = k.dim() == model.n();
  rep["kalman_basis"] = basis_json(k);
  const SubspaceBasis ss = nullspace(steady_state_matrix(model));
  rep["optimal_steady_state_basis"] = basis_json(ss);
  rep["W_lambda_min"] = min_positive_eigenvalue(model.W());
  rep["W_kernel_basis"] = basis_json(nullspace(model.W()));
  return kOk;
}

inline int cmd_reduce(const RunConfig& cfg, Json& rep) {
  const io::LoadedSystem ls = load_system(cfg);
  if (!ls.ok()) {
    rep["violations"] = violations_json(ls.violations);
    return kValidation;
  }
  if (!ls.dae) throw ValidationError("reduce needs a pH-DAE (key \"E\")");
  const auto& d = std::get<PhDaeSystem>(ls.system);
  if (dh_regularity_check(d) && dh_index_le1_check(d)) {
    const BeattieReduction r = beattie_reduce(d);
    rep["route"] = "structured";
    rep["n1"] = r.n1;
    rep["residual"] = r.residual;
    rep["U"] = io::to_json(r.U);
    rep["V"] = io::to_json(r.V);
    rep["W_hat"] = io::to_json(r.W_hat);
    io::write_json(fs::path(cfg.out) / "reduced.json",
                   io::system_to_json(r.reduced));
  } else {
    const QwReduction r = qw_reduce(d);
    rep["route"] = "quasi-weierstrass";
    rep["index"] = r.q.index;
    rep["n1"] = r.n1();
    rep["A"] = io::to_json(r.model.A());
    rep["B_tilde"] = io::to_json(r.model.B_tilde());
    rep["W"] = io::to_json(r.model.W());
    rep["Q"] = io::to_json(r.model.Q);
    rep["C_out"] = io::to_json(r.model.c);
    rep["D_out"] = io::to_json(r.model.d);
    rep["Vb"] = io::to_json(r.q.Vb);
  }
  return kOk;
}

inline int cmd_solve(const RunConfig& cfg, Json& rep) {
  const OcpSpec spec = apply_overrides(io::spec_from_json(io::load_json(cfg.input)), cfg);
  const OcpSolution sol = solve_ocp(spec);
  const AdjointResult adj = adjoint_trajectory(sol);
  const auto [sub, joint] = turnpike_subspace(spec);
  const Vector dist = distance_profile(sol.traj, sub, joint);
  const fs::path out(cfg.out);
  io::write_atomic(out / "trajectory.csv", trajectory_csv(sol, adj.lambda, dist));
  const Json sj = solution_json(sol);
  io::write_json(out / "solution.json", sj);
  rep["solution"] = sj;
  return kOk;
}

inline int run_report(const OcpSpec& base,
                      const std::vector<std::pair<double, int>>& horizons,
                      const RunConfig& cfg, Json& rep, bool plots) {
  ReportOptions ro;
  if (!cfg.eps_grid.empty()) ro.eps_grid = cfg.eps_grid;
  ro.keep_solutions = true;
  const TurnpikeReport tr = multi_horizon_report(base, horizons, ro);
  const fs::path out(cfg.out);
  Json rj = report_json(tr);
  if (base.is_dae()) {
    const auto& d = std::get<PhDaeSystem>(base.system);
    rj["state_subspace"] = {{"kind", "ker(RQ)"},
                            {"basis", basis_json(nullspace(d.R * d.Q))}};
  } else {
    const auto& s = std::get<PhOdeSystem>(base.system);
    rj["state_subspace"] = {{"kind", "ker(RQ)"},
                            {"basis", basis_json(nullspace(s.R * s.Q))}};
  }
  rj["control_set_default"] = base.control.is_default;
  io::write_json(out / "report.json", rj);
  write_profiles(tr, out);
  for (const auto& r : tr.records) {
    if (!r.solved || !r.solution) continue;
    const AdjointResult adj = adjoint_trajectory(*r.solution);
    io::write_atomic(out / ("trajectory_T" + tag(r.T) + ".csv"),
                     trajectory_csv(*r.solution, adj.lambda, r.profile));
  }
  if (plots) write_plot_data(tr, out);
  rep["records"] = rj["records"];
  for (const auto& r : tr.records) {
    if (!r.solved) {
      rep["failed_horizon"] = r.T;
      rep["error"] = r.error;
      return r.error.rfind("infeasible", 0) == 0 ? kInfeasible : kNumerical;
    }
  }
  return kOk;
}

inline int cmd_turnpike(const RunConfig& cfg, Json& rep) {
  const OcpSpec spec = apply_overrides(io::spec_from_json(io::load_json(cfg.input)), cfg);
  return run_report(spec, {{spec.T, spec.N}}, cfg, rep, false);
}

inline int cmd_reproduce(const RunConfig& cfg, Json& rep) {
  const bool msd = cfg.example == "msd";
  OcpSpec base = msd ? examples::msd_spec() : examples::robot_spec();
  if (cfg.tol) base.options.qp_tol = *cfg.tol;
  std::vector<std::pair<double, int>> hz =
      msd ? examples::msd_horizons() : examples::robot_horizons();
  if (cfg.horizon || cfg.steps) {
    // A single overridden run; N scales with T when only T is given.
    const double T = cfg.horizon.value_or(hz.back().first);
    const double rate = hz.back().second / hz.back().first;
    const int N = cfg.steps.value_or(static_cast<int>(std::lround(rate * T)));
    hz = {{T, N}};
  }
  const fs::path out(cfg.out);
  io::write_json(out / "spec.json", io::spec_to_json(base));
  if (!msd) {
    const auto& d = std::get<PhDaeSystem>(base.system);
    rep["pencil_index"] = pencil_index(d.E, d.A());
    rep["r_controllable"] = is_r_controllable(d);
  }
  return run_report(base, hz, cfg, rep, true);
}

inline std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

/// Runs one subcommand. Always writes meta.json; other files per subcommand.
/// Diagnostics go to `err`, a short JSON summary to `out`.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  using detail::Json;
  const auto t0 = std::chrono::steady_clock::now();
  Json rep = Json::object();
  int code = kOk;
  std::string message;
  try {
    cfg.check();
    if (cfg.subcommand == "validate") code = detail::cmd_validate(cfg, rep);
    if (cfg.subcommand == "analyze-pencil") code = detail::cmd_analyze_pencil(cfg, rep);
    if (cfg.subcommand == "analyze-control") code = detail::cmd_analyze_control(cfg, rep);
    if (cfg.subcommand == "reduce") code = detail::cmd_reduce(cfg, rep);
    if (cfg.subcommand == "solve") code = detail::cmd_solve(cfg, rep);
    if (cfg.subcommand == "turnpike") code = detail::cmd_turnpike(cfg, rep);
    if (cfg.subcommand == "reproduce") code = detail::cmd_reproduce(cfg, rep);
  } catch (const io::FormatError& e) {
    code = kIoError;
    message = e.what();
  } catch (const InfeasibleError& e) {
    code = kInfeasible;
    message = e.what();
  } catch (const ValidationError& e) {
    code = kValidation;
    message = e.what();
  } catch (const DimensionError& e) {
    code = kValidation;
    message = e.what();
  } catch (const NumericalError& e) {
    code = kNumerical;
    message = e.what();
  } catch (const std::exception& e) {
    code = kIoError;
    message = e.what();
  }
  if (!message.empty()) {
    rep["error"] = message;
    err << "phtp " << cfg.subcommand << ": " << message << "\n";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json meta = {{"tool", "phtp"},
               {"version", kVersion},
               {"subcommand", cfg.subcommand},
               {"input", cfg.input},
               {"example", cfg.example},
               {"exit_code", code},
               {"started_utc", detail::now_utc()},
               {"seconds", secs},
               {"tolerances",
                {{"qp_tol", cfg.tol.value_or(SolverOptions{}.qp_tol)},
                 {"feasibility_tol", SolverOptions{}.feasibility_tol},
                 {"rank_tol", kRankTol},
                 {"struct_tol", kStructTol}}}};
  try {
    const std::filesystem::path dir(cfg.out);
    io::write_json(dir / "meta.json", meta);
    if (cfg.subcommand != "solve" && cfg.subcommand != "turnpike" &&
        cfg.subcommand != "reproduce") {
      io::write_json(dir / (cfg.subcommand + ".json"), rep);
    }
  } catch (const std::exception& e) {
    err << "phtp: cannot write output: " << e.what() << "\n";
    if (code == kOk) code = kIoError;
  }
  rep["exit_code"] = code;
  out << rep.dump(2) << "\n";
  return code;
}

}  // namespace phtp::cli
