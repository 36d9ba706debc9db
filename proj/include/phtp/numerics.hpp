#pragma once

// Dense real linear-algebra kernels shared by every other module.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace phtp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Default relative rank threshold (relative to the largest singular value).
inline constexpr double kRankTol = 1e-9;
/// Eigenvalues with |Re λ| ≤ kSpectralTol · ρ(A) count as imaginary.
inline constexpr double kSpectralTol = 1e-8;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

inline void require_finite(const Eigen::Ref<const Matrix>& m,
                           const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(what) + ": non-finite entries");
  }
}

inline void require_square(const Eigen::Ref<const Matrix>& m,
                           const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix is not square");
  }
}

/// Spectral norm (largest singular value).
inline double norm2(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

inline Vector singular_values(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

/// Threshold below which singular values count as zero.
inline double rank_threshold(const Vector& sv, double tol) {
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  return tol * (smax > 0.0 ? smax : 1.0);
}

/// Numerical rank: number of singular values above tol·σ_max (tol·1 for 0).
inline int rank(const Eigen::Ref<const Matrix>& m, double tol = kRankTol) {
  if (!(tol > 0.0)) throw std::invalid_argument("rank: tol must be positive");
  require_finite(m, "rank");
  if (m.size() == 0) return 0;
  const Vector sv = singular_values(m);
  const double thr = rank_threshold(sv, tol);
  return static_cast<int>((sv.array() > thr).count());
}

/// Orthonormal basis of a subspace of R^n. An empty basis represents {0}.
class SubspaceBasis {
 public:
  SubspaceBasis() = default;
  explicit SubspaceBasis(Eigen::Index ambient)
      : basis_(Matrix::Zero(ambient, 0)) {}

  /// Wraps columns that are already orthonormal (checked to 1e-10).
  static SubspaceBasis from_orthonormal(Matrix columns) {
    const Eigen::Index k = columns.cols();
    if (k > 0) {
      const Matrix gram = columns.transpose() * columns;
      if ((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
        throw NumericalError("SubspaceBasis: columns are not orthonormal");
      }
    }
    SubspaceBasis s;
    s.basis_ = std::move(columns);
    return s;
  }

  static SubspaceBasis full(Eigen::Index n) {
    return from_orthonormal(Matrix::Identity(n, n));
  }

  /// Orthonormal basis of the column span of m.
  static SubspaceBasis span_of(const Eigen::Ref<const Matrix>& m,
                               double tol = kRankTol);

  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  bool is_trivial() const { return basis_.cols() == 0; }
  const Matrix& basis() const { return basis_; }

  Matrix projector() const { return basis_ * basis_.transpose(); }

  Vector project(const Eigen::Ref<const Vector>& v) const {
    if (v.size() != ambient_dim()) {
      throw DimensionError("SubspaceBasis::project: dimension mismatch");
    }
    if (is_trivial()) return Vector::Zero(v.size());
    return basis_ * (basis_.transpose() * v);
  }

  /// Orthonormal basis of the orthogonal complement.
  SubspaceBasis complement() const;

 private:
  Matrix basis_;
};

namespace detail {

inline Eigen::JacobiSVD<Matrix> full_svd(const Eigen::Ref<const Matrix>& m) {
  return Eigen::JacobiSVD<Matrix>(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

}  // namespace detail

inline SubspaceBasis SubspaceBasis::span_of(const Eigen::Ref<const Matrix>& m,
                                            double tol) {
  require_finite(m, "span_of");
  if (m.cols() == 0 || m.rows() == 0) return SubspaceBasis(m.rows());
  auto svd = detail::full_svd(m);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (smax == 0.0) return SubspaceBasis(m.rows());
  const int r = static_cast<int>((sv.array() > tol * smax).count());
  SubspaceBasis s;
  s.basis_ = svd.matrixU().leftCols(r);
  return s;
}

/// Orthonormal basis of ker m: singular directions with σ ≤ tol·σ_max.
inline SubspaceBasis nullspace(const Eigen::Ref<const Matrix>& m,
                               double tol = kRankTol) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("nullspace: tol must be positive");
  }
  require_finite(m, "nullspace");
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return SubspaceBasis::full(n);
  if (n == 0) return SubspaceBasis(0);
  auto svd = detail::full_svd(m);
  const Vector& sv = svd.singularValues();
  const double thr = rank_threshold(sv, tol);
  const int r = static_cast<int>((sv.array() > thr).count());
  return SubspaceBasis::from_orthonormal(svd.matrixV().rightCols(n - r));
}

inline SubspaceBasis SubspaceBasis::complement() const {
  const Eigen::Index n = ambient_dim();
  if (is_trivial()) return full(n);
  if (dim() == n) return SubspaceBasis(n);
  return nullspace(basis_.transpose());
}

/// Intersection of subspaces: kernel of the stacked complement projectors.
inline SubspaceBasis subspace_intersect(const std::vector<SubspaceBasis>& bases,
                                        double tol = kRankTol) {
  if (bases.empty()) {
    throw std::invalid_argument("subspace_intersect: no subspaces given");
  }
  const Eigen::Index n = bases.front().ambient_dim();
  for (const auto& b : bases) {
    if (b.ambient_dim() != n) {
      throw DimensionError("subspace_intersect: ambient dimension mismatch");
    }
  }
  Matrix stacked(n * static_cast<Eigen::Index>(bases.size()), n);
  for (std::size_t i = 0; i < bases.size(); ++i) {
    stacked.middleRows(static_cast<Eigen::Index>(i) * n, n) =
        Matrix::Identity(n, n) - bases[i].projector();
  }
  // The stacked projectors have singular values in {0} ∪ [c, √k]; an absolute
  // threshold avoids treating an all-zero stack as rank deficient noise.
  auto svd = detail::full_svd(stacked);
  const Vector& sv = svd.singularValues();
  const int r = static_cast<int>((sv.array() > std::max(tol, 1e-8)).count());
  return SubspaceBasis::from_orthonormal(svd.matrixV().rightCols(n - r));
}

inline SubspaceBasis subspace_sum(const SubspaceBasis& a,
                                  const SubspaceBasis& b,
                                  double tol = kRankTol) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw DimensionError("subspace_sum: ambient dimension mismatch");
  }
  Matrix joined(a.ambient_dim(), a.dim() + b.dim());
  joined << a.basis(), b.basis();
  return SubspaceBasis::span_of(joined, tol);
}

/// ‖v − BBᵀv‖ for the orthonormal basis B of s.
inline double dist_to_subspace(const Eigen::Ref<const Vector>& v,
                               const SubspaceBasis& s) {
  if (v.size() != s.ambient_dim()) {
    throw DimensionError("dist_to_subspace: dimension mismatch");
  }
  return (v - s.project(v)).norm();
}

/// True when every column of `inner` lies in `outer` up to tol.
inline bool is_subspace_of(const SubspaceBasis& inner,
                           const SubspaceBasis& outer, double tol = 1e-8) {
  for (Eigen::Index j = 0; j < inner.dim(); ++j) {
    if (dist_to_subspace(inner.basis().col(j), outer) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Eigenvalues and Schur forms

inline void sort_by_real_part(std::vector<Complex>& ev) {
  std::stable_sort(ev.begin(), ev.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

struct RealSchur {
  Matrix Z;  // orthogonal
  Matrix T;  // quasi-upper-triangular, 1×1 and 2×2 diagonal blocks
  std::vector<Complex> eigenvalues;  // sorted by real part
};

/// M = Z T Zᵀ via Francis iterations; `max_sweeps_per_eigenvalue` bounds the
/// iteration budget.
inline RealSchur real_schur(const Eigen::Ref<const Matrix>& m,
                            int max_sweeps_per_eigenvalue = 40) {
  require_square(m, "real_schur");
  require_finite(m, "real_schur");
  RealSchur out;
  const Eigen::Index n = m.rows();
  if (n == 0) {
    out.Z = Matrix(0, 0);
    out.T = Matrix(0, 0);
    return out;
  }
  Eigen::RealSchur<Matrix> schur(n);
  schur.setMaxIterations(max_sweeps_per_eigenvalue * n);
  schur.compute(m);
  if (schur.info() != Eigen::Success) {
    throw NumericalError("real_schur: iteration did not converge");
  }
  out.Z = schur.matrixU();
  out.T = schur.matrixT();
  for (Eigen::Index i = 0; i < n;) {
    if (i + 1 < n && out.T(i + 1, i) != 0.0) {
      const double a = out.T(i, i), b = out.T(i, i + 1);
      const double c = out.T(i + 1, i), d = out.T(i + 1, i + 1);
      const double p = 0.5 * (a + d);
      const double disc = 0.25 * (a - d) * (a - d) + b * c;
      if (disc < 0.0) {
        const double q = std::sqrt(-disc);
        out.eigenvalues.emplace_back(p, q);
        out.eigenvalues.emplace_back(p, -q);
      } else {
        const double q = std::sqrt(disc);
        out.eigenvalues.emplace_back(p + q, 0.0);
        out.eigenvalues.emplace_back(p - q, 0.0);
      }
      i += 2;
    } else {
      out.eigenvalues.emplace_back(out.T(i, i), 0.0);
      i += 1;
    }
  }
  sort_by_real_part(out.eigenvalues);
  return out;
}

inline std::vector<Complex> eigenvalues(const Eigen::Ref<const Matrix>& m) {
  return real_schur(m).eigenvalues;
}

inline double spectral_radius(const std::vector<Complex>& ev) {
  double r = 0.0;
  for (auto z : ev) r = std::max(r, std::abs(z));
  return r;
}

inline double spectral_abscissa(const std::vector<Complex>& ev) {
  double a = -std::numeric_limits<double>::infinity();
  for (auto z : ev) a = std::max(a, z.real());
  return a;
}

/// Complex Schur form with the eigenvalues satisfying `select` moved to the
/// leading diagonal positions (adjacent swaps by Givens rotations).
struct OrderedSchur {
  CMatrix Z;
  CMatrix T;
  Eigen::Index selected = 0;
};

inline OrderedSchur ordered_complex_schur(
    const Eigen::Ref<const Matrix>& m,
    const std::function<bool(Complex)>& select) {
  require_square(m, "ordered_complex_schur");
  require_finite(m, "ordered_complex_schur");
  const Eigen::Index n = m.rows();
  OrderedSchur out;
  if (n == 0) {
    out.Z = CMatrix(0, 0);
    out.T = CMatrix(0, 0);
    return out;
  }
  Eigen::ComplexSchur<Matrix> schur(m);
  if (schur.info() != Eigen::Success) {
    throw NumericalError("ordered_complex_schur: iteration did not converge");
  }
  out.Z = schur.matrixU();
  out.T = schur.matrixT();
  CMatrix& T = out.T;
  CMatrix& Z = out.Z;

  Eigen::Index next = 0;  // first position not yet holding a selected value
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!select(T(i, i))) continue;
    for (Eigen::Index k = i; k > next; --k) {
      // Swap diagonal entries at k-1 and k.
      const Complex t11 = T(k - 1, k - 1);
      const Complex t22 = T(k, k);
      Eigen::Vector2cd v(T(k - 1, k), t22 - t11);
      const double nv = v.norm();
      if (nv == 0.0) continue;
      v /= nv;
      Eigen::Matrix2cd G;
      G << v(0), -std::conj(v(1)), v(1), std::conj(v(0));
      T.middleRows(k - 1, 2) = G.adjoint() * T.middleRows(k - 1, 2);
      T.middleCols(k - 1, 2) = T.middleCols(k - 1, 2) * G;
      Z.middleCols(k - 1, 2) = Z.middleCols(k - 1, 2) * G;
      T(k, k - 1) = 0.0;
    }
    ++next;
  }
  out.selected = next;
  return out;
}

/// Real orthonormal basis of the invariant subspace for the eigenvalues
/// chosen by `select`. The selection must be closed under conjugation.
inline SubspaceBasis invariant_subspace(
    const Eigen::Ref<const Matrix>& m,
    const std::function<bool(Complex)>& select) {
  const Eigen::Index n = m.rows();
  OrderedSchur os = ordered_complex_schur(m, select);
  const Eigen::Index k = os.selected;
  if (k == 0) return SubspaceBasis(n);
  if (k == n) return SubspaceBasis::full(n);
  Matrix parts(n, 2 * k);
  parts << os.Z.leftCols(k).real(), os.Z.leftCols(k).imag();
  auto svd = detail::full_svd(parts);
  const Vector& sv = svd.singularValues();
  // The real span has exactly k dimensions; a gap at position k confirms it.
  const double gap_lo = sv(k - 1);
  const double gap_hi = (2 * k - 1 < sv.size() && k < sv.size()) ? sv(k) : 0.0;
  if (gap_lo < 1e-6 || gap_hi > 1e-6 * std::max(1.0, gap_lo)) {
    throw NumericalError(
        "invariant_subspace: selection is not closed under conjugation");
  }
  return SubspaceBasis::from_orthonormal(svd.matrixU().leftCols(k));
}

// ---------------------------------------------------------------------------
// Matrix equations

/// Solves A X + X B = C by complex Schur (Bartels–Stewart). A and B must not
/// share an eigenvalue with opposite sign.
inline Matrix solve_sylvester(const Eigen::Ref<const Matrix>& a,
                              const Eigen::Ref<const Matrix>& b,
                              const Eigen::Ref<const Matrix>& c) {
  require_square(a, "solve_sylvester");
  require_square(b, "solve_sylvester");
  if (c.rows() != a.rows() || c.cols() != b.rows()) {
    throw DimensionError("solve_sylvester: shape mismatch");
  }
  const Eigen::Index p = a.rows(), q = b.rows();
  if (p == 0 || q == 0) return Matrix::Zero(p, q);
  Eigen::ComplexSchur<Matrix> sa(a), sb(b);
  if (sa.info() != Eigen::Success || sb.info() != Eigen::Success) {
    throw NumericalError("solve_sylvester: Schur iteration failed");
  }
  const CMatrix& ta = sa.matrixT();
  const CMatrix& tb = sb.matrixT();
  const CMatrix f = sa.matrixU().adjoint() * c.cast<Complex>() * sb.matrixU();
  CMatrix y(p, q);
  const double scale = std::max(1.0, ta.cwiseAbs().maxCoeff() +
                                         tb.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < q; ++j) {
    CVector rhs = f.col(j);
    if (j > 0) rhs -= y.leftCols(j) * tb.col(j).head(j);
    CMatrix lhs = ta;
    lhs.diagonal().array() += tb(j, j);
    for (Eigen::Index i = 0; i < p; ++i) {
      if (std::abs(lhs(i, i)) < 1e-14 * scale) {
        throw NumericalError("solve_sylvester: spectra are not separated");
      }
    }
    y.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  const CMatrix x = sa.matrixU() * y * sb.matrixU().adjoint();
  return x.real();
}

/// Solves A X + X Aᵀ = C.
inline Matrix solve_lyapunov(const Eigen::Ref<const Matrix>& a,
                             const Eigen::Ref<const Matrix>& c) {
  Matrix x = solve_sylvester(a, a.transpose(), c);
  return 0.5 * (x + x.transpose());
}

// ---------------------------------------------------------------------------
// Functions of matrices

/// e^{tM} by scaling and squaring with Padé approximants.
inline Matrix expm(const Eigen::Ref<const Matrix>& m, double t = 1.0) {
  require_square(m, "expm");
  require_finite(m, "expm");
  if (m.rows() == 0) return Matrix(0, 0);
  const Matrix scaled = t * m;
  if (scaled.lpNorm<1>() > 700.0 * static_cast<double>(m.rows())) {
    // Guard before the Padé step; the squarings would overflow anyway.
    const double growth = spectral_abscissa(eigenvalues(scaled));
    if (growth > 700.0) throw NumericalError("expm: overflow");
  }
  Matrix out = scaled.exp();
  if (!out.allFinite()) throw NumericalError("expm: overflow");
  return out;
}

inline double symmetry_residual(const Eigen::Ref<const Matrix>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline double skew_residual(const Eigen::Ref<const Matrix>& m) {
  return (m + m.transpose()).cwiseAbs().maxCoeff();
}

/// Largest negative eigenvalue deficit of the symmetric part (0 if PSD).
inline double psd_deficit(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() == 0) return 0.0;
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return std::max(0.0, -es.eigenvalues()(0));
}

/// Symmetric PSD square root via eigendecomposition.
inline Matrix psd_sqrt(const Eigen::Ref<const Matrix>& m, double tol = 1e-10) {
  require_square(m, "psd_sqrt");
  require_finite(m, "psd_sqrt");
  if (m.rows() == 0) return Matrix(0, 0);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (symmetry_residual(m) > tol * scale) {
    throw NumericalError("psd_sqrt: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector lam = es.eigenvalues();
  if (lam(0) < -tol * scale) {
    throw NumericalError("psd_sqrt: negative eigenvalue");
  }
  lam = lam.cwiseMax(0.0).cwiseSqrt();
  const Matrix& v = es.eigenvectors();
  Matrix r = v * lam.asDiagonal() * v.transpose();
  return 0.5 * (r + r.transpose());
}

namespace detail {

inline Vector positive_eigenvalues(const Eigen::Ref<const Matrix>& m,
                                   double tol) {
  require_square(m, "positive_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  const Vector& lam = es.eigenvalues();
  const double lmax = lam.size() > 0 ? lam(lam.size() - 1) : 0.0;
  if (!(lmax > 0.0)) {
    throw NumericalError("matrix has no positive eigenvalue (zero matrix)");
  }
  std::vector<double> pos;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) > tol * lmax) pos.push_back(lam(i));
  }
  return Eigen::Map<Vector>(pos.data(), static_cast<Eigen::Index>(pos.size()));
}

}  // namespace detail

/// Smallest eigenvalue above tol·λ_max of a symmetric PSD matrix.
inline double min_positive_eigenvalue(const Eigen::Ref<const Matrix>& m,
                                      double tol = kRankTol) {
  return detail::positive_eigenvalues(m, tol).minCoeff();
}

inline double max_positive_eigenvalue(const Eigen::Ref<const Matrix>& m,
                                      double tol = kRankTol) {
  return detail::positive_eigenvalues(m, tol).maxCoeff();
}

/// Real 2n×2n embedding [[X, −Y], [Y, X]] of the complex matrix X + iY.
inline Matrix real_embedding(const Eigen::Ref<const CMatrix>& m) {
  const Eigen::Index r = m.rows(), c = m.cols();
  Matrix out(2 * r, 2 * c);
  out << m.real(), -m.imag(), m.imag(), m.real();
  return out;
}

/// Rank of a complex matrix via its real embedding (halved).
inline int complex_rank(const Eigen::Ref<const CMatrix>& m,
                        double tol = kRankTol) {
  return rank(real_embedding(m), tol) / 2;
}

inline Matrix matrix_power(const Eigen::Ref<const Matrix>& m, int k) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) out = out * m;
  return out;
}

/// Rank counting singular values above an absolute threshold. Used where the
/// matrix may be pure roundoff (powers of nilpotent maps).
inline int rank_abs(const Eigen::Ref<const Matrix>& m, double threshold) {
  require_finite(m, "rank_abs");
  if (m.size() == 0) return 0;
  const Vector sv = singular_values(m);
  return static_cast<int>((sv.array() > threshold).count());
}

inline SubspaceBasis nullspace_abs(const Eigen::Ref<const Matrix>& m,
                                   double threshold) {
  require_finite(m, "nullspace_abs");
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return SubspaceBasis::full(n);
  if (n == 0) return SubspaceBasis(0);
  auto svd = detail::full_svd(m);
  const int r =
      static_cast<int>((svd.singularValues().array() > threshold).count());
  return SubspaceBasis::from_orthonormal(svd.matrixV().rightCols(n - r));
}

/// Kernels of M, M², …, M^k without forming powers:
/// ker M^{j+1} = ker((I − Π_{ker M^j}) M). Threshold tol·‖M‖.
inline std::vector<SubspaceBasis> kernel_chain(const Eigen::Ref<const Matrix>& m,
                                               int k, double tol = kRankTol) {
  require_square(m, "kernel_chain");
  const Eigen::Index n = m.rows();
  const double thr = tol * std::max(norm2(m), 1e-300);
  std::vector<SubspaceBasis> out;
  SubspaceBasis cur(n);
  for (int j = 0; j < k; ++j) {
    const Matrix proj = Matrix::Identity(n, n) - cur.projector();
    cur = nullspace_abs(proj * m, thr);
    out.push_back(cur);
  }
  return out;
}

/// Reciprocal 2-norm condition number (0 for singular or empty input).
inline double rcond(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 1.0;
  const Vector sv = singular_values(m);
  if (sv(0) == 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

// ---------------------------------------------------------------------------
// Classical RK4 for ẋ = Ax + Bu with u frozen over the step.

inline Vector rk4_step(const Matrix& a, const Matrix& b, const Vector& x,
                       const Vector& u, double h) {
  const Vector bu = b * u;
  const Vector k1 = a * x + bu;
  const Vector k2 = a * (x + 0.5 * h * k1) + bu;
  const Vector k3 = a * (x + 0.5 * h * k2) + bu;
  const Vector k4 = a * (x + h * k3) + bu;
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Step matrices with rk4_step(x, u) = Φx + Γu (up to rounding).
struct Rk4Maps {
  Matrix Phi, Gamma;
};

inline Rk4Maps rk4_maps(const Matrix& a, const Matrix& b, double h) {
  const Eigen::Index n = a.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix ha = h * a;
  const Matrix ha2 = ha * ha;
  const Matrix ha3 = ha2 * ha;
  Rk4Maps out;
  out.Phi = I + ha + ha2 / 2.0 + ha3 / 6.0 + ha3 * ha / 24.0;
  out.Gamma = h * (I + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) * b;
  return out;
}

}  // namespace phtp
