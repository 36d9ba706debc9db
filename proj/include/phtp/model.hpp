#pragma once

// Port-Hamiltonian system types, control/target sets, OCP statements and
// trajectories, with structural validation.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "phtp/numerics.hpp"

namespace phtp {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural tolerance used by the validators (relative to max(1, ‖M‖)).
inline constexpr double kStructTol = 1e-10;

struct Violation {
  std::string condition;
  double residual = 0.0;
};

/// d/dt Ex = (J−R)Qx + Bu,  y = BᵀQx.
struct PhDaeSystem {
  Matrix E, J, R, Q, B;

  Eigen::Index n() const { return E.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Matrix A() const { return (J - R) * Q; }
};

/// ẋ = (J−R)Qx + (B−P)u,  y = (B+P)ᵀQx + Du.
struct PhOdeSystem {
  Matrix J, R, Q, B, P, D;

  Eigen::Index n() const { return J.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Matrix A() const { return (J - R) * Q; }
  Matrix B_tilde() const { return B - P; }
  Matrix S() const { return 0.5 * (D + D.transpose()); }
  Matrix N_skew() const { return 0.5 * (D - D.transpose()); }
  /// W = [[QRQ, QP], [PᵀQ, S]].
  Matrix W() const {
    const Eigen::Index n_ = n(), m_ = m();
    Matrix w(n_ + m_, n_ + m_);
    w.topLeftCorner(n_, n_) = Q * R * Q;
    w.topRightCorner(n_, m_) = Q * P;
    w.bottomLeftCorner(m_, n_) = P.transpose() * Q;
    w.bottomRightCorner(m_, m_) = S();
    return w;
  }
};

template <class Sys>
struct Validated {
  std::optional<Sys> system;
  std::vector<Violation> violations;
  bool ok() const { return system.has_value(); }
};

namespace detail {

inline double scale_of(const Matrix& m) {
  return std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
}

inline void check_skew(const Matrix& m, const char* name, double tol,
                       std::vector<Violation>& out) {
  const double r = skew_residual(m);
  if (r > tol * scale_of(m)) {
    out.push_back({std::string(name) + " not skew-symmetric", r});
  }
}

inline void check_symmetric(const Matrix& m, const char* name, double tol,
                            std::vector<Violation>& out) {
  const double r = symmetry_residual(m);
  if (r > tol * scale_of(m)) {
    out.push_back({std::string(name) + " not symmetric", r});
  }
}

inline void check_psd(const Matrix& m, const char* name, double tol,
                      std::vector<Violation>& out) {
  const double r = psd_deficit(m);
  if (r > tol * scale_of(m)) {
    out.push_back({std::string(name) + " not PSD", r});
  }
}

inline bool check_finite(const Matrix& m, const char* name,
                         std::vector<Violation>& out) {
  if (m.allFinite()) return true;
  out.push_back({std::string(name) + " has non-finite entries",
                 std::numeric_limits<double>::infinity()});
  return false;
}

inline void check_shape(const Matrix& m, Eigen::Index r, Eigen::Index c,
                        const char* name, std::vector<Violation>& out) {
  if (m.rows() != r || m.cols() != c) {
    out.push_back({std::string(name) + " has shape " +
                       std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected " +
                       std::to_string(r) + "x" + std::to_string(c),
                   0.0});
  }
}

}  // namespace detail

inline Validated<PhDaeSystem> validate_ph_dae(const Matrix& E, const Matrix& J,
                                              const Matrix& R, const Matrix& Q,
                                              const Matrix& B,
                                              double tol = kStructTol) {
  Validated<PhDaeSystem> out;
  auto& v = out.violations;
  const Eigen::Index n = E.rows();
  detail::check_shape(E, n, n, "E", v);
  detail::check_shape(J, n, n, "J", v);
  detail::check_shape(R, n, n, "R", v);
  detail::check_shape(Q, n, n, "Q", v);
  if (B.rows() != n) detail::check_shape(B, n, B.cols(), "B", v);
  if (!v.empty()) return out;
  bool finite = true;
  for (auto [m, name] : {std::pair{&E, "E"}, {&J, "J"}, {&R, "R"}, {&Q, "Q"},
                         {&B, "B"}}) {
    finite = detail::check_finite(*m, name, v) && finite;
  }
  if (!finite) return out;
  detail::check_skew(J, "J", tol, v);
  detail::check_symmetric(R, "R", tol, v);
  detail::check_psd(R, "R", tol, v);
  const Matrix qte = Q.transpose() * E;
  detail::check_symmetric(qte, "Q^T E", tol, v);
  detail::check_psd(qte, "Q^T E", tol, v);
  if (v.empty()) out.system = PhDaeSystem{E, J, R, Q, B};
  return out;
}

inline Validated<PhOdeSystem> validate_ph_ode(const Matrix& J, const Matrix& R,
                                              const Matrix& Q, const Matrix& B,
                                              const Matrix& P, const Matrix& D,
                                              double tol = kStructTol) {
  Validated<PhOdeSystem> out;
  auto& v = out.violations;
  const Eigen::Index n = J.rows(), m = B.cols();
  detail::check_shape(J, n, n, "J", v);
  detail::check_shape(R, n, n, "R", v);
  detail::check_shape(Q, n, n, "Q", v);
  detail::check_shape(B, n, m, "B", v);
  detail::check_shape(P, n, m, "P", v);
  detail::check_shape(D, m, m, "D", v);
  if (!v.empty()) return out;
  bool finite = true;
  for (auto [mat, name] : {std::pair{&J, "J"}, {&R, "R"}, {&Q, "Q"},
                           {&B, "B"}, {&P, "P"}, {&D, "D"}}) {
    finite = detail::check_finite(*mat, name, v) && finite;
  }
  if (!finite) return out;
  detail::check_skew(J, "J", tol, v);
  detail::check_symmetric(R, "R", tol, v);
  detail::check_psd(R, "R", tol, v);
  detail::check_symmetric(Q, "Q", tol, v);
  detail::check_psd(Q, "Q", tol, v);
  const Matrix S = 0.5 * (D + D.transpose());
  detail::check_psd(S, "S", tol, v);
  PhOdeSystem sys{J, R, Q, B, P, D};
  if (v.empty()) {
    detail::check_psd(sys.W(), "W", tol, v);
  }
  if (v.empty()) out.system = std::move(sys);
  return out;
}

/// Throwing variants for callers that cannot proceed on violations.
inline std::string describe(const std::vector<Violation>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += "; ";
    s += x.condition + " (residual " + std::to_string(x.residual) + ")";
  }
  return s;
}

inline PhDaeSystem require_valid(const Validated<PhDaeSystem>& v) {
  if (!v.ok()) throw ValidationError(describe(v.violations));
  return *v.system;
}

inline PhOdeSystem require_valid(const Validated<PhOdeSystem>& v) {
  if (!v.ok()) throw ValidationError(describe(v.violations));
  return *v.system;
}

/// A pH-ODE is also a pH-DAE with E = I when P = 0 and D = 0.
inline PhOdeSystem as_ode(const PhDaeSystem& s) {
  const Eigen::Index n = s.n(), m = s.m();
  if ((s.E - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 0.0) {
    throw ValidationError("as_ode: E is not the identity");
  }
  return PhOdeSystem{s.J, s.R, s.Q, s.B, Matrix::Zero(n, m),
                     Matrix::Zero(m, m)};
}

inline Vector output_of(const PhOdeSystem& sys, const Vector& x,
                        const Vector& u) {
  if (x.size() != sys.n() || u.size() != sys.m()) {
    throw DimensionError("output_of: dimension mismatch");
  }
  return (sys.B + sys.P).transpose() * (sys.Q * x) + sys.D * u;
}

inline Vector output_of(const PhDaeSystem& sys, const Vector& x) {
  if (x.size() != sys.n()) throw DimensionError("output_of: dimension mismatch");
  return sys.B.transpose() * (sys.Q * x);
}

inline double hamiltonian(const PhOdeSystem& sys, const Vector& x) {
  if (x.size() != sys.n()) {
    throw DimensionError("hamiltonian: dimension mismatch");
  }
  return 0.5 * x.dot(sys.Q * x);
}

inline double hamiltonian(const PhDaeSystem& sys, const Vector& x) {
  if (x.size() != sys.n()) {
    throw DimensionError("hamiltonian: dimension mismatch");
  }
  return 0.5 * x.dot(sys.E.transpose() * (sys.Q * x));
}

/// ‖W^{1/2}(x;u)‖² = (x;u)ᵀW(x;u).
inline double dissipation_rate(const PhOdeSystem& sys, const Vector& x,
                               const Vector& u) {
  Vector xu(x.size() + u.size());
  xu << x, u;
  return xu.dot(sys.W() * xu);
}

/// Linear-quadratic view of a passive ODE used by the optimal-control layer:
/// ż = Az + B̃u, H = ½zᵀQz, dissipation (z;u)ᵀW(z;u), y = Cz + Du.
/// Built from a pH-ODE or from the ODE part of a descriptor system.
struct LqModel {
  Matrix a, bt, w, Q, c, d;

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index m() const { return bt.cols(); }
  const Matrix& A() const { return a; }
  const Matrix& B_tilde() const { return bt; }
  const Matrix& W() const { return w; }

  static LqModel of(const PhOdeSystem& s) {
    LqModel l;
    l.a = s.A();
    l.bt = s.B_tilde();
    l.w = s.W();
    l.Q = 0.5 * (s.Q + s.Q.transpose());
    l.c = (s.B + s.P).transpose() * s.Q;
    l.d = s.D;
    return l;
  }
};

inline Vector output_of(const LqModel& sys, const Vector& x, const Vector& u) {
  if (x.size() != sys.n() || u.size() != sys.m()) {
    throw DimensionError("output_of: dimension mismatch");
  }
  return sys.c * x + sys.d * u;
}

inline double hamiltonian(const LqModel& sys, const Vector& x) {
  if (x.size() != sys.n()) {
    throw DimensionError("hamiltonian: dimension mismatch");
  }
  return 0.5 * x.dot(sys.Q * x);
}

// ---------------------------------------------------------------------------

struct ControlSet {
  enum class Kind { Box, Ball };
  Kind kind = Kind::Box;
  Vector lower, upper;  // box
  double radius = 0.0;  // ball
  Eigen::Index dim = 0;
  bool is_default = false;

  static ControlSet box(Vector lo, Vector hi) {
    if (lo.size() != hi.size()) {
      throw ValidationError("control box: bound sizes differ");
    }
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!(lo(i) < 0.0 && 0.0 < hi(i)) || !std::isfinite(lo(i)) ||
          !std::isfinite(hi(i))) {
        throw ValidationError("control box must contain 0 in its interior");
      }
    }
    ControlSet c;
    c.kind = Kind::Box;
    c.dim = lo.size();
    c.lower = std::move(lo);
    c.upper = std::move(hi);
    return c;
  }

  static ControlSet ball(Eigen::Index m, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ValidationError("control ball radius must be positive");
    }
    ControlSet c;
    c.kind = Kind::Ball;
    c.dim = m;
    c.radius = r;
    return c;
  }

  /// Box [−10, 10]^m, used when an input does not specify a control set.
  static ControlSet default_box(Eigen::Index m) {
    ControlSet c = box(Vector::Constant(m, -10.0), Vector::Constant(m, 10.0));
    c.is_default = true;
    return c;
  }

  /// max{‖u‖ : u ∈ 𝕌}.
  double u_max() const {
    if (kind == Kind::Ball) return radius;
    return lower.cwiseAbs().cwiseMax(upper.cwiseAbs()).norm();
  }

  bool contains(const Vector& u, double tol = 1e-8) const {
    if (u.size() != dim) return false;
    if (kind == Kind::Ball) return u.norm() <= radius * (1.0 + tol) + tol;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double slack = tol * std::max(1.0, upper(i) - lower(i));
      if (u(i) < lower(i) - slack || u(i) > upper(i) + slack) return false;
    }
    return true;
  }

  /// True when u lies in 𝕌 with at least `margin` distance to its boundary.
  bool interior(const Vector& u, double margin) const {
    if (kind == Kind::Ball) return u.norm() <= radius - margin;
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (u(i) < lower(i) + margin || u(i) > upper(i) - margin) return false;
    }
    return true;
  }

  /// Largest s ≥ 0 with s·d ∈ 𝕌 (d ≠ 0).
  double ray_exit(const Vector& d) const {
    if (kind == Kind::Ball) return radius / d.norm();
    double s = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (d(i) > 0) s = std::min(s, upper(i) / d(i));
      if (d(i) < 0) s = std::min(s, lower(i) / d(i));
    }
    return s;
  }
};

struct TargetSet {
  enum class Kind { Free, Point, AffineBox };
  Kind kind = Kind::Free;
  Vector point;
  Matrix G;
  Vector l, u;

  static TargetSet free() { return TargetSet{}; }
  static TargetSet at(Vector p) {
    if (!p.allFinite()) throw ValidationError("target point is not finite");
    TargetSet t;
    t.kind = Kind::Point;
    t.point = std::move(p);
    return t;
  }
  static TargetSet affine_box(Matrix G, Vector l, Vector u) {
    if (G.rows() != l.size() || G.rows() != u.size()) {
      throw ValidationError("target box: row counts differ");
    }
    if ((l.array() > u.array()).any()) {
      throw ValidationError("target box: lower bound exceeds upper bound");
    }
    TargetSet t;
    t.kind = Kind::AffineBox;
    t.G = std::move(G);
    t.l = std::move(l);
    t.u = std::move(u);
    return t;
  }

  bool contains(const Vector& x, double tol) const {
    switch (kind) {
      case Kind::Free:
        return true;
      case Kind::Point:
        return (x - point).norm() <= tol;
      case Kind::AffineBox: {
        const Vector gx = G * x;
        return ((gx - u).array() <= tol).all() &&
               ((l - gx).array() <= tol).all();
      }
    }
    return false;
  }
};

/// Exact: zero-order-hold exponentials and exact interval integrals.
/// Rk4: classical RK4 defects with Simpson quadrature of the running cost.
enum class Discretization { Exact, Rk4 };

struct SolverOptions {
  Discretization discretization = Discretization::Exact;
  double qp_tol = 1e-9;
  int max_iterations = 200;
  double feasibility_tol = 1e-6;  // scaled by (1 + ‖x⁰‖)
};

struct OcpSpec {
  std::variant<PhOdeSystem, PhDaeSystem> system;
  double T = 1.0;
  int N = 100;
  Vector initial;  // x⁰ (ODE) or w⁰ (DAE)
  TargetSet target;
  ControlSet control;
  SolverOptions options;

  bool is_dae() const { return std::holds_alternative<PhDaeSystem>(system); }
  Eigen::Index n() const {
    return std::visit([](const auto& s) { return s.n(); }, system);
  }
  Eigen::Index m() const {
    return std::visit([](const auto& s) { return s.m(); }, system);
  }
  double h() const { return T / N; }

  /// Checks the OCP invariants; throws ValidationError.
  void check() const {
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw ValidationError("horizon T must be positive");
    }
    if (N < 2) throw ValidationError("grid size N must be at least 2");
    if (initial.size() != n()) {
      throw ValidationError("initial datum has wrong dimension");
    }
    if (control.dim != m()) {
      throw ValidationError("control set has wrong dimension");
    }
    if (target.kind == TargetSet::Kind::Point && target.point.size() != n()) {
      throw ValidationError("target point has wrong dimension");
    }
    if (target.kind == TargetSet::Kind::AffineBox && target.G.cols() != n()) {
      throw ValidationError("target box has wrong column count");
    }
    if (is_dae()) {
      const auto& s = std::get<PhDaeSystem>(system);
      const SubspaceBasis imE = SubspaceBasis::span_of(s.E);
      const double tol = 1e-8 * (1.0 + initial.norm());
      if (dist_to_subspace(initial, imE) > tol) {
        throw ValidationError("w0 is not in im E");
      }
      if (target.kind == TargetSet::Kind::Point &&
          dist_to_subspace(target.point, imE) > 1e-8 * (1.0 + target.point.norm())) {
        throw ValidationError("target point is not in im E");
      }
    }
  }
};

/// Samples on a uniform grid; column k is the sample at t_k. Controls are
/// piecewise constant, u.col(N) repeats u.col(N−1).
struct Trajectory {
  Vector t;
  Matrix x, u, y;

  Eigen::Index steps() const { return t.size() - 1; }
  double h() const { return steps() > 0 ? t(1) - t(0) : 0.0; }
};

inline Vector uniform_grid(double T, int N) {
  Vector t(N + 1);
  for (int k = 0; k <= N; ++k) t(k) = T * static_cast<double>(k) / N;
  return t;
}

/// Pads an m×N piecewise-constant control matrix to m×(N+1).
inline Matrix pad_controls(const Matrix& u) {
  Matrix out(u.rows(), u.cols() + 1);
  out.leftCols(u.cols()) = u;
  out.col(u.cols()) = u.cols() > 0 ? Vector(u.col(u.cols() - 1))
                                   : Vector::Zero(u.rows());
  return out;
}

}  // namespace phtp
