#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace miaudit {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transpose() const;
  double trace() const;
  double frobenius_norm() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Vector operator*(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order and column j of `vectors` pairs with `values[j]`.
struct SymEig {
  Vector values;
  Matrix vectors;
};

// Householder tridiagonalization followed by implicit QL. Each eigenvector is
// sign-normalized so that its largest-magnitude entry is positive.
SymEig sym_eig(const Matrix& m);

inline constexpr double kDefaultClampTol = 1e-10;

// V·diag(sqrt(max(λ,0)))·Vᵀ. Throws kNotPsd when some eigenvalue falls below
// -clamp_tol·max(λ).
Matrix psd_sqrt(const Matrix& m, double clamp_tol = kDefaultClampTol);

// Sample mean and unbiased (n-1) covariance of the rows of x.
std::pair<Vector, Matrix> mean_and_cov(const Matrix& x);

Vector l2_normalize(std::span<const double> v);

// Cholesky factor L (lower) with a = L·Lᵀ. Throws kSingular when a pivot is
// not positive relative to the diagonal scale.
Matrix cholesky(const Matrix& a);

Vector solve_spd(const Matrix& a, std::span<const double> b);

// Symmetry check used by the eigensolver: |a_ij - a_ji| <= tol·max|a|.
bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);

}  // namespace miaudit
