#pragma once

// Small dense square matrices (n <= 16) and the handful of operations the
// certification pipeline needs: companion form, Lyapunov solve, symmetric
// eigenvalue bounds, Hurwitz test and the high-gain scaling matrix.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ratstab {

using Vector = std::vector<double>;

inline constexpr std::size_t kMaxDim = 16;

/// Row-major square matrix, 1 <= dim <= kMaxDim.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t dim() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }
  std::span<const double> data() const noexcept { return a_; }
  std::span<const double> row(std::size_t i) const noexcept { return {a_.data() + i * n_, n_}; }

  Matrix transpose() const;
  double trace() const noexcept;
  double max_abs() const noexcept;
  double frobenius() const noexcept;
  bool all_finite() const noexcept;
  bool is_symmetric(double rel_tol) const noexcept;

  Vector apply(std::span<const double> x) const;

  friend Matrix operator+(const Matrix& a, const Matrix& b);
  friend Matrix operator-(const Matrix& a, const Matrix& b);
  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Matrix operator*(double s, const Matrix& a);
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// col * row^T as an n x n matrix.
Matrix outer(std::span<const double> col, std::span<const double> row);

struct Companion {
  Matrix A;  // chain of integrators: ones on the superdiagonal
  Vector B;  // e_n
  Vector C;  // e_1^T
};

Companion build_companion(std::size_t n);

struct LyapunovCertificate {
  Matrix solution;
  double residual = 0.0;       // ||A^T X + X A + I||_F
  double spectral_norm = 0.0;  // lambda_max(X)
  double min_eig = 0.0;        // lambda_min(X)
};

/// Solves A^T X + X A = -I through the n^2 x n^2 Kronecker system with
/// partial pivoting. Throws NotHurwitz when the system is singular or the
/// symmetrised solution is not positive definite.
LyapunovCertificate solve_lyapunov(const Matrix& a);

/// Eigenvalues of a symmetric matrix in ascending order. n = 2 uses the
/// trace/determinant quadratic, larger n cyclic Jacobi.
Vector symmetric_eigenvalues(const Matrix& m);

/// max |lambda| of a symmetric matrix. Throws ContractViolation if the input
/// is asymmetric beyond 1e-9 relative.
double spectral_norm_sym(const Matrix& m);

/// Every eigenvalue has real part < -1e-9. Characteristic polynomial by
/// Faddeev-LeVerrier, then a Routh table; a zero pivot counts as failure.
bool is_hurwitz(const Matrix& a);

/// Monic characteristic polynomial coefficients [1, c1, ..., cn].
Vector characteristic_polynomial(const Matrix& a);

/// Routh-Hurwitz test on a polynomial with coefficients in descending powers.
bool routh_hurwitz(std::span<const double> coeffs);

/// diag[1, 1/theta, ..., 1/theta^(n-1)]
Matrix delta_theta(double theta, std::size_t n);

namespace detail {
/// Cyclic Jacobi sweep to off-diagonal norm <= 1e-14 * ||M||_F, ascending order.
Vector jacobi_eigenvalues(const Matrix& m);
}  // namespace detail

}  // namespace ratstab
