#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace oselmq {

class Rng;

/// Dense row-major matrix of doubles.  Values produced by the free operations
/// below are freshly allocated; operations never alias their inputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// "RxC" rendering used in error messages.
std::string shape_string(const Matrix& m);

/// Product a*b.  Throws ShapeError when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Inverse of a square matrix by Gauss-Jordan elimination with partial
/// pivoting.  Throws ShapeError for non-square input and SingularError
/// (carrying the pivot column) when the best pivot magnitude falls
/// below 1e-12.
Matrix inverse(const Matrix& a);

/// Largest singular value.  Power iteration on a^T a from a fixed
/// pseudo-random start vector until the relative change of the Rayleigh
/// estimate drops below 1e-10, capped at 10,000 iterations.  Returns 0 for a
/// zero matrix; throws ShapeError for an empty one.
double sigma_max(const Matrix& a);

double frobenius_norm(const Matrix& a);

/// Componentwise clamp of v into [lo, hi].
double clip(double lo, double v, double hi);

/// Matrix with i.i.d. entries uniform in [lo, hi), drawn row-major.
Matrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng,
                      double lo = 0.0, double hi = 1.0);

Matrix operator*(const Matrix& a, const Matrix& b);  // matmul
Matrix operator*(double c, const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

}  // namespace oselmq
