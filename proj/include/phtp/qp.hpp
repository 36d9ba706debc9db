#pragma once

// Sparse convex QP:  min ½zᵀHz + gᵀz + c0  s.t.  Az = b,  Gz ≤ h.
// Mehrotra predictor-corrector interior point on the reduced KKT system.

#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "phtp/numerics.hpp"

namespace phtp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct QpProblem {
  SparseMatrix H;  // symmetric PSD
  Vector g;
  double c0 = 0.0;
  SparseMatrix A;
  Vector b;
  SparseMatrix G;
  Vector h;

  Eigen::Index num_vars() const { return g.size(); }
};

struct QpOptions {
  double tol = 1e-9;
  int max_iterations = 200;
  double reg_primal = 1e-10;
  double reg_dual = 1e-10;
  int refinement_steps = 3;
};

struct QpResult {
  Vector z, y, lambda, s;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double complementarity = 0.0;
  /// max of the four scaled residuals above
  double kkt_residual = 0.0;
};

namespace detail {

inline double inf_norm(const Vector& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

inline double max_step(const Vector& v, const Vector& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

/// Reduced KKT matrix [[H + GᵀDG + ρI, Aᵀ], [A, −δI]] with its LDLᵀ factor.
class KktSystem {
 public:
  KktSystem(const QpProblem& p, const QpOptions& o) : p_(p), o_(o) {
    nz_ = p.num_vars();
    ne_ = p.A.rows();
  }

  void factor(const Vector& d) {
    SparseMatrix gdg = p_.G.transpose() * d.asDiagonal() * p_.G;
    std::vector<Triplet> t;
    t.reserve(p_.H.nonZeros() + gdg.nonZeros() + 2 * p_.A.nonZeros() + nz_ +
              ne_);
    auto push = [&](const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0) {
      for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
          t.emplace_back(it.row() + r0, it.col() + c0, it.value());
        }
      }
    };
    push(p_.H, 0, 0);
    push(gdg, 0, 0);
    push(p_.A, nz_, 0);
    SparseMatrix at = p_.A.transpose();
    push(at, 0, nz_);
    // True matrix (for refinement) and the regularized one (for the factor).
    true_.resize(nz_ + ne_, nz_ + ne_);
    true_.setFromTriplets(t.begin(), t.end());
    // Exact zero pivots can survive tiny regularization when H is rank
    // deficient; retry with stronger shifts, refinement recovers accuracy.
    const size_t base = t.size();
    double scale = 1.0;
    for (int attempt = 0; attempt < 6; ++attempt, scale *= 100.0) {
      t.resize(base);
      for (Eigen::Index i = 0; i < nz_; ++i) {
        t.emplace_back(i, i, scale * o_.reg_primal);
      }
      for (Eigen::Index i = 0; i < ne_; ++i) {
        t.emplace_back(nz_ + i, nz_ + i, -scale * o_.reg_dual);
      }
      SparseMatrix k(nz_ + ne_, nz_ + ne_);
      k.setFromTriplets(t.begin(), t.end());
      if (!analyzed_) {
        ldlt_.analyzePattern(k);
        analyzed_ = true;
      }
      ldlt_.factorize(k);
      if (ldlt_.info() == Eigen::Success) return;
    }
    throw NumericalError("qp: KKT factorization failed");
  }

  Vector solve(const Vector& rhs) const {
    Vector x = ldlt_.solve(rhs);
    for (int i = 0; i < o_.refinement_steps; ++i) {
      const Vector r = rhs - true_ * x;
      x += ldlt_.solve(r);
    }
    return x;
  }

 private:
  const QpProblem& p_;
  const QpOptions& o_;
  Eigen::Index nz_ = 0, ne_ = 0;
  SparseMatrix true_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>
      ldlt_;
  bool analyzed_ = false;
};

}  // namespace detail

inline QpResult solve_qp(const QpProblem& p, const QpOptions& o = QpOptions{}) {
  const Eigen::Index nz = p.num_vars(), ne = p.A.rows(), ni = p.G.rows();
  if (p.H.rows() != nz || p.H.cols() != nz || p.A.cols() != nz ||
      p.b.size() != ne || p.G.cols() != nz || p.h.size() != ni) {
    throw DimensionError("solve_qp: inconsistent problem dimensions");
  }
  detail::KktSystem kkt(p, o);
  QpResult res;

  // Initial point: least-squares start with unit slack shift.
  Vector z = Vector::Zero(nz), y = Vector::Zero(ne);
  Vector s = Vector::Ones(ni), lam = Vector::Ones(ni);
  {
    kkt.factor(Vector::Ones(ni));
    Vector rhs(nz + ne);
    rhs.head(nz) = -p.g + p.G.transpose() * p.h;
    rhs.tail(ne) = p.b;
    const Vector sol = kkt.solve(rhs);
    z = sol.head(nz);
    if (ni > 0) {
      s = p.h - p.G * z;
      const double shift = -s.minCoeff();
      if (shift >= -1e-8) s.array() += 1.0 + std::max(shift, 0.0);
      lam = Vector::Ones(ni);
    }
  }

  const double scale_d = 1.0 + detail::inf_norm(p.g);
  const double scale_e = 1.0 + detail::inf_norm(p.b);
  const double scale_i = 1.0 + detail::inf_norm(p.h);

  for (int it = 0; it <= o.max_iterations; ++it) {
    const Vector hz = p.H * z;
    const Vector rd = hz + p.g + p.A.transpose() * y + p.G.transpose() * lam;
    const Vector rp = p.A * z - p.b;
    const Vector ri = p.G * z + s - p.h;
    const double mu = ni > 0 ? s.dot(lam) / ni : 0.0;
    const double obj = 0.5 * z.dot(hz) + p.g.dot(z);
    res.stationarity = detail::inf_norm(rd) / scale_d;
    res.primal_eq = detail::inf_norm(rp) / scale_e;
    res.primal_ineq = detail::inf_norm(ri) / scale_i;
    res.complementarity = mu / (1.0 + std::abs(obj));
    res.kkt_residual = std::max({res.stationarity, res.primal_eq,
                                 res.primal_ineq, res.complementarity});
    res.iterations = it;
    if (!z.allFinite() || detail::inf_norm(z) > 1e14) {
      res.status = "diverged";
      break;
    }
    if (res.kkt_residual <= o.tol) {
      res.converged = true;
      res.status = "optimal";
      break;
    }
    if (it == o.max_iterations) {
      res.status = "iteration limit";
      break;
    }

    const Vector d = lam.cwiseQuotient(s);
    kkt.factor(d);
    auto direction = [&](const Vector& rc, Vector& dz, Vector& dy, Vector& dl,
                         Vector& ds) {
      Vector rhs(nz + ne);
      const Vector w = d.cwiseProduct(ri) - rc.cwiseQuotient(s);
      rhs.head(nz) = -rd - p.G.transpose() * w;
      rhs.tail(ne) = -rp;
      const Vector sol = kkt.solve(rhs);
      dz = sol.head(nz);
      dy = sol.tail(ne);
      dl = d.cwiseProduct(p.G * dz + ri) - rc.cwiseQuotient(s);
      ds = (-rc - s.cwiseProduct(dl)).cwiseQuotient(lam);
    };

    Vector dz, dy, dl, ds;
    const Vector rc_aff = s.cwiseProduct(lam);
    direction(rc_aff, dz, dy, dl, ds);
    double sigma = 0.0;
    Vector rc = rc_aff;
    if (ni > 0) {
      const double a_aff =
          std::min(detail::max_step(s, ds), detail::max_step(lam, dl));
      const double mu_aff =
          (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(ni);
      sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
      rc = rc_aff + ds.cwiseProduct(dl) -
           Vector::Constant(ni, sigma * mu);
      direction(rc, dz, dy, dl, ds);
    }
    double alpha = 1.0;
    if (ni > 0) {
      alpha = std::min(1.0, 0.99 * std::min(detail::max_step(s, ds),
                                            detail::max_step(lam, dl)));
    }
    z += alpha * dz;
    y += alpha * dy;
    if (ni > 0) {
      s += alpha * ds;
      lam += alpha * dl;
    }
  }
  res.z = z;
  res.y = y;
  res.lambda = lam;
  res.s = s;
  res.objective = 0.5 * z.dot(p.H * z) + p.g.dot(z) + p.c0;
  return res;
}

}  // namespace phtp
