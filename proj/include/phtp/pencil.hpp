#pragma once

// Matrix pencils sE − A: Wong sequences, quasi-Weierstrass form, regularity,
// index, dissipative-Hamiltonian certificates and index ≤ 1 simulation.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "phtp/model.hpp"
#include "phtp/numerics.hpp"

namespace phtp {

/// Thrown when μE − A is singular at the probed μ.
class SingularProbe : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Quasi-Weierstrass data of a regular pencil. With X = [Vb, Wb]:
///   E·X = S·(I ⊕ N),  A·X = S·(C ⊕ I).
struct QuasiWeierstrass {
  Matrix S;   // n×n invertible, equals [E·Vb, A·Wb]
  Matrix C;   // n1×n1 ODE part
  Matrix N;   // n2×n2 nilpotent part
  Matrix Vb;  // orthonormal basis of V = im T^m
  Matrix Wb;  // orthonormal basis of W = ker T^m
  Matrix PV, PW;  // projectors onto V along W and onto W along V
  int index = 0;
  double mu = 0.0;
  double residual = 0.0;  // relative reconstruction residual

  Eigen::Index n1() const { return Vb.cols(); }
  Eigen::Index n2() const { return Wb.cols(); }
  Matrix X() const {
    Matrix x(Vb.rows(), Vb.cols() + Wb.cols());
    x << Vb, Wb;
    return x;
  }
};

namespace detail {

inline Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

inline bool probe_singular(const Matrix& m) { return rcond(m) < 1e-12; }

}  // namespace detail

/// Wong sequences of T = (μE − A)^{-1}E and the resulting quasi-Weierstrass
/// form. Throws SingularProbe if μE − A is singular.
inline QuasiWeierstrass wong_sequences(const Matrix& E, const Matrix& A,
                                       double mu, double tol = kRankTol) {
  require_square(E, "wong_sequences");
  require_square(A, "wong_sequences");
  if (E.rows() != A.rows()) {
    throw DimensionError("wong_sequences: E and A differ in size");
  }
  require_finite(E, "wong_sequences");
  require_finite(A, "wong_sequences");
  const Eigen::Index n = E.rows();
  const Matrix pencil = mu * E - A;
  if (detail::probe_singular(pencil)) {
    throw SingularProbe("wong_sequences: muE - A is singular at mu = " +
                        std::to_string(mu));
  }
  Eigen::PartialPivLU<Matrix> lu(pencil);
  const Matrix T = lu.solve(E);

  // W_{k+1} = T^{-1}(W_k) = ker((I − Π_{W_k}) T), iterated to stationarity.
  SubspaceBasis W(n);
  int m = 0;
  for (; m <= n; ++m) {
    const Matrix proj = Matrix::Identity(n, n) - W.projector();
    SubspaceBasis next = nullspace(proj * T, tol);
    if (next.dim() == W.dim()) break;
    W = std::move(next);
  }
  if (m > n) throw NumericalError("wong_sequences: kernel chain did not settle");

  const Eigen::Index n2 = W.dim();
  const Eigen::Index n1 = n - n2;
  QuasiWeierstrass q;
  q.mu = mu;
  q.index = m;
  q.Wb = W.basis();
  {
    auto svd = detail::full_svd(matrix_power(T, m));
    q.Vb = svd.matrixU().leftCols(n1);
  }
  const Matrix X = q.X();
  if (rcond(X) < 1e-10) {
    throw NumericalError("wong_sequences: V and W are not complementary");
  }
  const Matrix TV = q.Vb.transpose() * T * q.Vb;
  const Matrix TW = q.Wb.transpose() * T * q.Wb;
  q.N = n2 > 0 ? Matrix(TW * (mu * TW - Matrix::Identity(n2, n2)).inverse())
               : Matrix(0, 0);
  q.C = n1 > 0 ? Matrix(mu * Matrix::Identity(n1, n1) - TV.inverse())
               : Matrix(0, 0);
  q.S.resize(n, n);
  q.S << E * q.Vb, A * q.Wb;
  const Matrix Xinv = X.inverse();
  q.PV = q.Vb * Xinv.topRows(n1);
  q.PW = q.Wb * Xinv.bottomRows(n2);

  const double scale = std::max(1e-300, norm2(A) + norm2(E));
  const Matrix I1 = Matrix::Identity(n1, n1), I2 = Matrix::Identity(n2, n2);
  const double rE = norm2(q.S * detail::block_diag(I1, q.N) - E * X);
  const double rA = norm2(q.S * detail::block_diag(q.C, I2) - A * X);
  q.residual = (rE + rA) / (scale * std::max(1.0, norm2(X)));
  return q;
}

/// Reconstruction residual of E = S(I ⊕ N)X^{-1}, A = S(C ⊕ I)X^{-1}.
inline double qw_reconstruction_residual(const QuasiWeierstrass& q,
                                         const Matrix& E, const Matrix& A) {
  const Matrix Xinv = q.X().inverse();
  const Matrix I1 = Matrix::Identity(q.n1(), q.n1());
  const Matrix I2 = Matrix::Identity(q.n2(), q.n2());
  const double rE = norm2(q.S * detail::block_diag(I1, q.N) * Xinv - E);
  const double rA = norm2(q.S * detail::block_diag(q.C, I2) * Xinv - A);
  return (rE + rA) / std::max(1e-300, norm2(A) + norm2(E));
}

/// Deterministic μ probes: 1 + ‖A‖/max(‖E‖,1), then n pseudo-random values.
inline std::vector<double> mu_probes(const Matrix& E, const Matrix& A) {
  const double ne = norm2(E), na = norm2(A);
  std::vector<double> mus{1.0 + na / std::max(ne, 1.0)};
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(1.0, 2.0 + na + ne);
  for (Eigen::Index i = 0; i < E.rows(); ++i) mus.push_back(dist(rng));
  return mus;
}

struct RegularityResult {
  bool regular = false;
  double mu = 0.0;  // witness
};

inline RegularityResult is_regular(const Matrix& E, const Matrix& A) {
  require_square(E, "is_regular");
  require_square(A, "is_regular");
  if (E.rows() != A.rows()) throw DimensionError("is_regular: size mismatch");
  for (double mu : mu_probes(E, A)) {
    if (!detail::probe_singular(mu * E - A)) return {true, mu};
  }
  return {false, 0.0};
}

/// Quasi-Weierstrass form at the first admissible probe.
inline QuasiWeierstrass quasi_weierstrass(const Matrix& E, const Matrix& A,
                                          double tol = kRankTol) {
  const auto reg = is_regular(E, A);
  if (!reg.regular) throw ValidationError("pencil is not regular");
  return wong_sequences(E, A, reg.mu, tol);
}

/// Index of a regular pencil, confirmed by two distinct μ probes.
inline int pencil_index(const Matrix& E, const Matrix& A,
                        double tol = kRankTol) {
  std::vector<int> found;
  for (double mu : mu_probes(E, A)) {
    try {
      found.push_back(wong_sequences(E, A, mu, tol).index);
    } catch (const SingularProbe&) {
      continue;
    }
    if (found.size() == 2) break;
  }
  if (found.empty()) throw ValidationError("pencil is not regular");
  if (found.size() == 2 && found[0] != found[1]) {
    throw NumericalError("pencil_index: index depends on the probe");
  }
  return found[0];
}

/// ker E ∩ ker(RQ) ∩ ker(QᵀJQ) = {0}.
inline bool dh_regularity_check(const PhDaeSystem& s, double tol = kRankTol) {
  const auto k = subspace_intersect({nullspace(s.E, tol),
                                     nullspace(s.R * s.Q, tol),
                                     nullspace(s.Q.transpose() * s.J * s.Q, tol)});
  return k.is_trivial();
}

/// ker E ∩ ker(RQ) ∩ (JQ)^{-1}(im E) = {0}.
inline bool dh_index_le1_check(const PhDaeSystem& s, double tol = kRankTol) {
  const Eigen::Index n = s.n();
  const SubspaceBasis imE = SubspaceBasis::span_of(s.E, tol);
  const Matrix off = (Matrix::Identity(n, n) - imE.projector()) * s.J * s.Q;
  const SubspaceBasis pre =
      off.cwiseAbs().maxCoeff() == 0.0 ? SubspaceBasis::full(n)
                                       : nullspace(off, tol);
  const auto k = subspace_intersect(
      {nullspace(s.E, tol), nullspace(s.R * s.Q, tol), pre});
  return k.is_trivial();
}

// ---------------------------------------------------------------------------
// Dissipative-Hamiltonian certificates

struct DhCertificate {
  bool dh = false;
  /// Names of the violated conditions ("i", "ii", "iii", "iv").
  std::vector<std::string> violated;
  /// Per-condition outcome.
  std::map<std::string, bool> conditions;
  /// Witness (matrices only): A = (J − R)Q.
  Matrix J, R, Q;
  double witness_residual = 0.0;
  double spectral_tol = kSpectralTol;
  double rank_tol = kRankTol;
};

struct DhOptions {
  double spectral_tol = kSpectralTol;
  double rank_tol = 1e-8;
  bool build_witness = true;
};

namespace detail {

struct SpectralClasses {
  std::vector<Complex> ev;     // all eigenvalues, zero cluster snapped to 0
  double rho = 0.0;            // spectral radius
  double norm = 0.0;           // ‖A‖₂
  int zero_mult = 0;           // algebraic multiplicity of 0
};

/// Eigenvalues with the zero cluster identified by the kernel chain of A.
inline SpectralClasses classify_spectrum(const Matrix& a, double rank_tol) {
  SpectralClasses c;
  const Eigen::Index n = a.rows();
  c.norm = norm2(a);
  if (n == 0) return c;
  c.ev = eigenvalues(a);
  if (c.norm == 0.0) {
    for (auto& z : c.ev) z = 0.0;
    c.zero_mult = static_cast<int>(n);
    return c;
  }
  const auto chain = kernel_chain(a, static_cast<int>(n), rank_tol);
  c.zero_mult = static_cast<int>(chain.back().dim());
  std::vector<std::size_t> order(c.ev.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(c.ev[i]) < std::abs(c.ev[j]);
  });
  for (int i = 0; i < c.zero_mult; ++i) c.ev[order[i]] = 0.0;
  c.rho = spectral_radius(c.ev);
  return c;
}

/// Distinct values among the given list (clustered within `tol`).
inline std::vector<Complex> distinct(const std::vector<Complex>& v,
                                     double tol) {
  std::vector<Complex> out;
  for (auto z : v) {
    bool seen = false;
    for (auto w : out) {
      if (std::abs(z - w) <= tol) seen = true;
    }
    if (!seen) out.push_back(z);
  }
  return out;
}

/// Checks conditions (i)–(iii) of the dH-matrix characterization.
inline std::map<std::string, bool> dh_matrix_conditions(
    const Matrix& a, const DhOptions& opt, SpectralClasses* out_classes) {
  std::map<std::string, bool> cond{{"i", true}, {"ii", true}, {"iii", true}};
  SpectralClasses cls = classify_spectrum(a, opt.rank_tol);
  const Eigen::Index n = a.rows();
  if (n > 0 && cls.norm > 0.0) {
    const double axis = opt.spectral_tol * std::max(cls.rho, 1e-300);
    for (auto z : cls.ev) {
      if (z.real() > axis) cond["i"] = false;
    }
    // (ii) semi-simplicity at each nonzero imaginary eigenvalue.
    std::vector<Complex> imag;
    for (auto z : cls.ev) {
      if (std::abs(z.real()) <= axis && z.imag() > axis) imag.push_back(z);
    }
    for (auto z : distinct(imag, 1e-6 * cls.rho)) {
      CMatrix shifted = a.cast<Complex>();
      shifted.diagonal().array() -= Complex(0.0, z.imag());
      const auto ch = kernel_chain(real_embedding(shifted), 2, opt.rank_tol);
      if (ch[0].dim() != ch[1].dim()) cond["ii"] = false;
    }
    // (iii) ker A³ = ker A² (index of the zero eigenvalue at most two).
    const auto ch = kernel_chain(a, 3, opt.rank_tol);
    if (ch[1].dim() != ch[2].dim()) cond["iii"] = false;
  }
  if (out_classes) *out_classes = std::move(cls);
  return cond;
}

/// Witness on a diagonalizable block with imaginary spectrum:
/// P = Re Σ Π_j Π_j^*, J = A·P, Q = P^{-1}.
inline void imaginary_block_witness(const Matrix& ai, Matrix& P) {
  const Eigen::Index k = ai.rows();
  const std::vector<Complex> ev = eigenvalues(ai);
  const double rho = std::max(spectral_radius(ev), 1e-300);
  const std::vector<Complex> lam = distinct(ev, 1e-6 * rho);
  const CMatrix ac = ai.cast<Complex>();
  CMatrix sum = CMatrix::Zero(k, k);
  for (std::size_t j = 0; j < lam.size(); ++j) {
    CMatrix pj = CMatrix::Identity(k, k);
    for (std::size_t l = 0; l < lam.size(); ++l) {
      if (l == j) continue;
      CMatrix f = ac;
      f.diagonal().array() -= lam[l];
      pj = pj * f / (lam[j] - lam[l]);
    }
    sum += pj * pj.adjoint();
  }
  P = sum.real();
  P = 0.5 * (P + P.transpose());
}

}  // namespace detail

/// Certifies A = (J − R)Q with J skew, R ⪰ 0, Q ⪰ 0, or names the violated
/// spectral condition.
inline DhCertificate is_dh_matrix(const Matrix& a,
                                  const DhOptions& opt = DhOptions{}) {
  require_square(a, "is_dh_matrix");
  require_finite(a, "is_dh_matrix");
  DhCertificate cert;
  cert.spectral_tol = opt.spectral_tol;
  cert.rank_tol = opt.rank_tol;
  detail::SpectralClasses cls;
  cert.conditions = detail::dh_matrix_conditions(a, opt, &cls);
  for (const auto& [name, ok] : cert.conditions) {
    if (!ok) cert.violated.push_back(name);
  }
  cert.dh = cert.violated.empty();
  if (!cert.dh || !opt.build_witness) return cert;

  const Eigen::Index n = a.rows();
  if (n == 0 || cls.norm == 0.0) {
    cert.J = Matrix::Zero(n, n);
    cert.R = Matrix::Zero(n, n);
    cert.Q = Matrix::Zero(n, n);
    return cert;
  }

  // Center / stable split.
  const double axis = std::max(opt.spectral_tol * cls.rho, 1e-7 * cls.norm);
  auto is_center = [&](Complex z) { return z.real() >= -axis; };
  auto is_stable = [&](Complex z) { return z.real() < -axis; };
  const SubspaceBasis bc = invariant_subspace(a, is_center);
  const SubspaceBasis bs = invariant_subspace(a, is_stable);
  if (bc.dim() + bs.dim() != n) {
    throw NumericalError("is_dh_matrix: spectral split lost dimensions");
  }

  // Within the center part: zero block ker(Ac²) and imaginary block im(Ac²).
  const Matrix ac = bc.basis().transpose() * a * bc.basis();
  Matrix zi, z0;
  if (bc.dim() > 0) {
    const Matrix ac2 = ac * ac / (cls.norm * cls.norm);
    const SubspaceBasis k0 = kernel_chain(ac, 2, opt.rank_tol)[1];
    z0 = bc.basis() * k0.basis();
    const Eigen::Index ri = bc.dim() - k0.dim();
    auto svd = detail::full_svd(ac2);
    zi = bc.basis() * svd.matrixU().leftCols(ri);
  } else {
    z0 = Matrix::Zero(n, 0);
    zi = Matrix::Zero(n, 0);
  }

  // Nilpotent block: pairs (x_i = A0 y_i, y_i) and a kernel complement.
  Matrix nil_basis(n, z0.cols());
  Matrix JD0 = Matrix::Zero(z0.cols(), z0.cols());
  Matrix QD0 = Matrix::Zero(z0.cols(), z0.cols());
  if (z0.cols() > 0) {
    const Matrix z0_orth = SubspaceBasis::span_of(z0).basis();
    const Matrix a0 = z0_orth.transpose() * a * z0_orth;
    auto svd = detail::full_svd(a0 / cls.norm);
    const int r = static_cast<int>(
        (svd.singularValues().array() > opt.rank_tol).count());
    const Eigen::Index k = a0.rows();
    Matrix coords(k, k);
    for (int i = 0; i < r; ++i) {
      const Vector y = svd.matrixV().col(i);
      coords.col(2 * i) = a0 * y;
      coords.col(2 * i + 1) = y;
      JD0(2 * i, 2 * i + 1) = 1.0;
      JD0(2 * i + 1, 2 * i) = -1.0;
      QD0(2 * i + 1, 2 * i + 1) = 1.0;
    }
    // ker A0 ∩ (im A0)^⊥
    Matrix stack(k + r, k);
    stack.topRows(k) = a0 / cls.norm;
    stack.bottomRows(r) = svd.matrixU().leftCols(r).transpose();
    const SubspaceBasis comp = nullspace_abs(stack, opt.rank_tol);
    if (comp.dim() != k - 2 * r) {
      throw NumericalError("is_dh_matrix: nilpotent chain basis is degenerate");
    }
    coords.rightCols(k - 2 * r) = comp.basis();
    nil_basis = z0_orth * coords;
  }

  // Full basis and block data.
  const Eigen::Index ni = zi.cols(), ns = bs.dim(), n0 = z0.cols();
  Matrix X(n, n);
  X << zi, bs.basis(), nil_basis;
  if (rcond(X) < 1e-12) {
    throw NumericalError("is_dh_matrix: block basis is ill-conditioned");
  }
  Eigen::PartialPivLU<Matrix> xlu(X);
  const Matrix D = xlu.solve(a * X);
  Matrix JD = Matrix::Zero(n, n), RD = Matrix::Zero(n, n),
         QD = Matrix::Zero(n, n);
  if (ni > 0) {
    const Matrix ai = D.topLeftCorner(ni, ni);
    Matrix P;
    detail::imaginary_block_witness(ai, P);
    const Matrix jb = ai * P;
    JD.topLeftCorner(ni, ni) = 0.5 * (jb - jb.transpose());
    Matrix qb = P.inverse();
    QD.topLeftCorner(ni, ni) = 0.5 * (qb + qb.transpose());
  }
  if (ns > 0) {
    const Matrix as = D.block(ni, ni, ns, ns);
    const Matrix P = solve_lyapunov(as, -Matrix::Identity(ns, ns));
    JD.block(ni, ni, ns, ns) = 0.5 * (as * P - P * as.transpose());
    RD.block(ni, ni, ns, ns) = 0.5 * Matrix::Identity(ns, ns);
    Matrix qb = P.inverse();
    QD.block(ni, ni, ns, ns) = 0.5 * (qb + qb.transpose());
  }
  if (n0 > 0) {
    JD.bottomRightCorner(n0, n0) = JD0;
    QD.bottomRightCorner(n0, n0) = QD0;
  }
  const Matrix Xinv = xlu.inverse();
  cert.J = X * JD * X.transpose();
  cert.J = 0.5 * (cert.J - cert.J.transpose());
  cert.R = X * RD * X.transpose();
  cert.R = 0.5 * (cert.R + cert.R.transpose());
  cert.Q = Xinv.transpose() * QD * Xinv;
  cert.Q = 0.5 * (cert.Q + cert.Q.transpose());
  cert.witness_residual =
      norm2((cert.J - cert.R) * cert.Q - a) / std::max(cls.norm, 1e-300);
  return cert;
}

/// Witness soundness: reconstruction and sign conditions within tolerance.
inline bool witness_is_sound(const DhCertificate& c, const Matrix& a,
                             double rec_tol = 1e-7, double sign_tol = 1e-8) {
  if (!c.dh) return false;
  const double sa = std::max(1.0, norm2(a));
  const double sj = std::max(1.0, c.J.size() ? c.J.cwiseAbs().maxCoeff() : 0.0);
  const double sr = std::max(1.0, c.R.size() ? c.R.cwiseAbs().maxCoeff() : 0.0);
  const double sq = std::max(1.0, c.Q.size() ? c.Q.cwiseAbs().maxCoeff() : 0.0);
  return norm2((c.J - c.R) * c.Q - a) <= rec_tol * sa &&
         skew_residual(c.J) <= sign_tol * sj &&
         psd_deficit(c.R) <= sign_tol * sr &&
         psd_deficit(c.Q) <= sign_tol * sq;
}

/// Pencil conditions: (i), (ii), (iv) on the ODE part C; (iii) index ≤ 2.
inline DhCertificate is_dh_pencil(const Matrix& E, const Matrix& A,
                                  const DhOptions& opt = DhOptions{}) {
  const QuasiWeierstrass q = quasi_weierstrass(E, A);
  DhOptions o = opt;
  o.build_witness = false;
  const auto c = detail::dh_matrix_conditions(q.C, o, nullptr);
  DhCertificate cert;
  cert.spectral_tol = opt.spectral_tol;
  cert.rank_tol = opt.rank_tol;
  cert.conditions["i"] = c.at("i");
  cert.conditions["ii"] = c.at("ii");
  cert.conditions["iii"] = q.index <= 2;
  cert.conditions["iv"] = c.at("iii");
  for (const auto& [name, ok] : cert.conditions) {
    if (!ok) cert.violated.push_back(name);
  }
  cert.dh = cert.violated.empty();
  return cert;
}

// ---------------------------------------------------------------------------
// DAE simulation

/// Simulates d/dt Ex = (J−R)Qx + Bu with Ex(0) = w⁰ on the uniform grid of
/// [0, T] with N = u.cols() steps; u is piecewise constant (m×N).
inline Trajectory solve_dae_ivp(const PhDaeSystem& sys, const Matrix& u,
                                const Vector& w0, double T) {
  const Eigen::Index n = sys.n(), m = sys.m();
  const int N = static_cast<int>(u.cols());
  if (u.rows() != m || N < 1) {
    throw DimensionError("solve_dae_ivp: control samples have wrong shape");
  }
  if (w0.size() != n) throw DimensionError("solve_dae_ivp: w0 size mismatch");
  if (!(T > 0.0)) throw ValidationError("solve_dae_ivp: T must be positive");
  const double h = T / N;
  const Matrix A = sys.A();
  Trajectory tr;
  tr.t = uniform_grid(T, N);
  tr.u = pad_controls(u);
  tr.x.resize(n, N + 1);

  Eigen::PartialPivLU<Matrix> elu;
  const bool invertible_E = rcond(sys.E) >= 1e-12;
  if (invertible_E) {
    elu.compute(sys.E);
    const Matrix aode = elu.solve(A);
    const Matrix bode = elu.solve(sys.B);
    tr.x.col(0) = elu.solve(w0);
    for (int k = 0; k < N; ++k) {
      tr.x.col(k + 1) = rk4_step(aode, bode, tr.x.col(k), u.col(k), h);
    }
  } else {
    const QuasiWeierstrass q = quasi_weierstrass(sys.E, A);
    Eigen::PartialPivLU<Matrix> slu(q.S);
    const Matrix sb = slu.solve(sys.B);
    const Eigen::Index n1 = q.n1(), n2 = q.n2();
    const Matrix bv = sb.topRows(n1), bw = sb.bottomRows(n2);
    // Higher index is fine as long as u is never differentiated (N b_W = 0).
    if (q.index > 1 &&
        norm2(q.N * bw) > 1e-9 * std::max(1.0, norm2(q.N)) *
                              std::max(1.0, norm2(bw))) {
      throw ValidationError("solve_dae_ivp: pencil index is " +
                            std::to_string(q.index) +
                            " and the input reaches the nilpotent chain");
    }
    const Matrix ev = sys.E * q.Vb;
    Vector xi = ev.colPivHouseholderQr().solve(w0);
    if ((ev * xi - w0).norm() > 1e-8 * (1.0 + w0.norm())) {
      throw ValidationError("solve_dae_ivp: w0 is not a consistent initial value");
    }
    for (int k = 0; k <= N; ++k) {
      const Vector uk = tr.u.col(k);
      tr.x.col(k) = q.Vb * xi - q.Wb * (bw * uk);
      if (k < N) xi = rk4_step(q.C, bv, xi, uk, h);
    }
  }
  tr.y.resize(m, N + 1);
  for (int k = 0; k <= N; ++k) tr.y.col(k) = output_of(sys, tr.x.col(k));
  return tr;
}

/// Plain RK4 for an ODE system with piecewise-constant u (m×N).
inline Trajectory simulate_ode(const PhOdeSystem& sys, const Matrix& u,
                               const Vector& x0, double T) {
  const int N = static_cast<int>(u.cols());
  if (u.rows() != sys.m() || N < 1 || x0.size() != sys.n()) {
    throw DimensionError("simulate_ode: shape mismatch");
  }
  const double h = T / N;
  const Matrix A = sys.A(), Bt = sys.B_tilde();
  Trajectory tr;
  tr.t = uniform_grid(T, N);
  tr.u = pad_controls(u);
  tr.x.resize(sys.n(), N + 1);
  tr.x.col(0) = x0;
  for (int k = 0; k < N; ++k) {
    tr.x.col(k + 1) = rk4_step(A, Bt, tr.x.col(k), u.col(k), h);
  }
  tr.y.resize(sys.m(), N + 1);
  for (int k = 0; k <= N; ++k) {
    tr.y.col(k) = output_of(sys, tr.x.col(k), tr.u.col(k));
  }
  return tr;
}

}  // namespace phtp
