#include "ratstab/matops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ratstab/error.hpp"
#include "ratstab/simd/kernels.hpp"

namespace ratstab {
namespace {

void check_dim(std::size_t n) {
  if (n < 1 || n > kMaxDim)
    throw ConfigError("matrix dimension " + std::to_string(n) + " outside [1, 16]");
}

void check_same(const Matrix& a, const Matrix& b) {
  if (a.dim() != b.dim()) throw ContractViolation("matrix dimension mismatch");
}

}  // namespace

Matrix::Matrix(std::size_t n, double fill) : n_(n), a_(n * n, fill) { check_dim(n); }

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) : n_(rows.size()) {
  check_dim(n_);
  a_.reserve(n_ * n_);
  for (const auto& r : rows) {
    if (r.size() != n_) throw ConfigError("matrix rows must all have length " + std::to_string(n_));
    a_.insert(a_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::trace() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, i);
  return s;
}

double Matrix::max_abs() const noexcept {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::fabs(v));
  return m;
}

double Matrix::frobenius() const noexcept {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(a_.begin(), a_.end(), [](double v) { return std::isfinite(v); });
}

bool Matrix::is_symmetric(double rel_tol) const noexcept {
  const double scale = std::max(1.0, max_abs());
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (std::fabs((*this)(i, j) - (*this)(j, i)) > rel_tol * scale) return false;
  return true;
}

Vector Matrix::apply(std::span<const double> x) const {
  if (x.size() != n_) throw ContractViolation("matrix-vector dimension mismatch");
  Vector y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same(a, b);
  Matrix c = a;
  for (std::size_t k = 0; k < c.a_.size(); ++k) c.a_[k] += b.a_[k];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same(a, b);
  Matrix c = a;
  for (std::size_t k = 0; k < c.a_.size(); ++k) c.a_[k] -= b.a_[k];
  return c;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  check_same(a, b);
  const std::size_t n = a.n_;
  Matrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.a_) v *= s;
  return c;
}

Matrix outer(std::span<const double> col, std::span<const double> row) {
  if (col.size() != row.size()) throw ContractViolation("outer product dimension mismatch");
  Matrix m(col.size());
  for (std::size_t i = 0; i < col.size(); ++i)
    for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = col[i] * row[j];
  return m;
}

Companion build_companion(std::size_t n) {
  check_dim(n);
  Companion c{Matrix(n), Vector(n, 0.0), Vector(n, 0.0)};
  for (std::size_t i = 0; i + 1 < n; ++i) c.A(i, i + 1) = 1.0;
  c.B[n - 1] = 1.0;
  c.C[0] = 1.0;
  return c;
}

LyapunovCertificate solve_lyapunov(const Matrix& a) {
  const std::size_t n = a.dim();
  check_dim(n);
  if (!a.all_finite()) throw NotHurwitz("Lyapunov solve: matrix has non-finite entries");

  // Unknown x[i*n + j] = X(i,j). Row (i,j) of the system is
  //   sum_k A(k,i) X(k,j) + sum_k X(i,k) A(k,j) = -delta_ij.
  const std::size_t m = n * n;
  std::vector<double> sys(m * m, 0.0);
  Vector rhs(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double* row = sys.data() + (i * n + j) * m;
      for (std::size_t k = 0; k < n; ++k) {
        row[k * n + j] += a(k, i);
        row[i * n + k] += a(k, j);
      }
      rhs[i * n + j] = (i == j) ? -1.0 : 0.0;
    }

  double scale = 0.0;
  for (double v : sys) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) throw NotHurwitz("Lyapunov system is singular (zero matrix)");
  const double singular_tol = 1e-13 * scale;

  // Gaussian elimination with partial pivoting; row updates go through the
  // vector axpy kernel.
  const auto& kern = simd::active();
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    double best = std::fabs(sys[col * m + col]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double v = std::fabs(sys[r * m + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best <= singular_tol) throw NotHurwitz("Lyapunov system is singular");
    if (piv != col) {
      std::swap_ranges(sys.begin() + static_cast<std::ptrdiff_t>(col * m),
                       sys.begin() + static_cast<std::ptrdiff_t>((col + 1) * m),
                       sys.begin() + static_cast<std::ptrdiff_t>(piv * m));
      std::swap(rhs[col], rhs[piv]);
    }
    const double* prow = sys.data() + col * m;
    for (std::size_t r = col + 1; r < m; ++r) {
      double* rrow = sys.data() + r * m;
      const double f = rrow[col] / prow[col];
      if (f == 0.0) continue;
      kern.axpy(-f, prow + col, rrow + col, m - col);
      rhs[r] -= f * rhs[col];
    }
  }
  Vector x(m, 0.0);
  for (std::size_t r = m; r-- > 0;) {
    const double* row = sys.data() + r * m;
    double s = rhs[r];
    for (std::size_t c = r + 1; c < m; ++c) s -= row[c] * x[c];
    x[r] = s / row[r];
  }

  LyapunovCertificate cert{Matrix(n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cert.solution(i, j) = 0.5 * (x[i * n + j] + x[j * n + i]);
  if (!cert.solution.all_finite()) throw NotHurwitz("Lyapunov solution is not finite");

  const Matrix at = a.transpose();
  const Matrix res = at * cert.solution + cert.solution * a + Matrix::identity(n);
  cert.residual = res.frobenius();

  const Vector eig = symmetric_eigenvalues(cert.solution);
  cert.min_eig = eig.front();
  cert.spectral_norm = eig.back();
  if (!(cert.min_eig > 0.0))
    throw NotHurwitz("Lyapunov solution is not positive definite (min eigenvalue " +
                     std::to_string(cert.min_eig) + ")");
  return cert;
}

namespace detail {

Vector jacobi_eigenvalues(const Matrix& m) {
  const std::size_t n = m.dim();
  Matrix a = m;
  const double fro = std::max(m.frobenius(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-14 * fro) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::hypot(t, 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
  std::sort(d.begin(), d.end());
  return d;
}

}  // namespace detail

Vector symmetric_eigenvalues(const Matrix& m) {
  const std::size_t n = m.dim();
  if (n == 1) return {m(0, 0)};
  if (n == 2) {
    const double a = m(0, 0), b = 0.5 * (m(0, 1) + m(1, 0)), d = m(1, 1);
    const double mean = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), b);
    return {mean - rad, mean + rad};
  }
  return detail::jacobi_eigenvalues(m);
}

double spectral_norm_sym(const Matrix& m) {
  if (!m.is_symmetric(1e-9)) throw ContractViolation("spectral_norm_sym: matrix is not symmetric");
  const Vector eig = symmetric_eigenvalues(m);
  return std::max(std::fabs(eig.front()), std::fabs(eig.back()));
}

Vector characteristic_polynomial(const Matrix& a) {
  // Faddeev-LeVerrier: M_k = A M_{k-1} + c_{k-1} I, c_k = -tr(A M_k) / k.
  const std::size_t n = a.dim();
  Vector c(n + 1, 0.0);
  c[0] = 1.0;
  Matrix mk(n);
  const Matrix id = Matrix::identity(n);
  for (std::size_t k = 1; k <= n; ++k) {
    mk = a * mk + c[k - 1] * id;
    c[k] = -(a * mk).trace() / static_cast<double>(k);
  }
  return c;
}

bool routh_hurwitz(std::span<const double> coeffs) {
  if (coeffs.empty()) return false;
  const std::size_t deg = coeffs.size() - 1;
  if (!(coeffs[0] > 0.0)) return false;  // normalise sign expectations: leading coeff > 0
  if (deg == 0) return true;
  const std::size_t width = deg / 2 + 1;
  std::vector<double> prev(width, 0.0), cur(width, 0.0);
  for (std::size_t i = 0; i < width; ++i) {
    if (2 * i <= deg) prev[i] = coeffs[2 * i];
    if (2 * i + 1 <= deg) cur[i] = coeffs[2 * i + 1];
  }
  // First column must stay strictly positive through all deg+1 rows.
  for (std::size_t row = 1; row <= deg; ++row) {
    if (!(cur[0] > 0.0) || !std::isfinite(cur[0])) return false;
    std::vector<double> next(width, 0.0);
    for (std::size_t i = 0; i + 1 < width; ++i)
      next[i] = (cur[0] * prev[i + 1] - prev[0] * cur[i + 1]) / cur[0];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return true;
}

bool is_hurwitz(const Matrix& a) {
  if (a.dim() == 0 || !a.all_finite()) return false;
  // Real parts < -1e-9  <=>  A + 1e-9 I has all real parts < 0.
  const Matrix shifted = a + 1e-9 * Matrix::identity(a.dim());
  const Vector p = characteristic_polynomial(shifted);
  return routh_hurwitz(p);
}

Matrix delta_theta(double theta, std::size_t n) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw ConfigError("theta must be positive and finite");
  check_dim(n);
  Matrix d(n);
  double v = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    d(i, i) = v;
    v /= theta;
  }
  return d;
}

}  // namespace ratstab
