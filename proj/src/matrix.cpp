#include "oselmq/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "oselmq/errors.hpp"
#include "oselmq/rng.hpp"

namespace oselmq {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged row " + std::to_string(i));
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a) + " * " + shape_string(b));
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.cols(), p = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i).data();
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < p; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix inverse(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("inverse: " + shape_string(a));
  const std::size_t n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::abs(work(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(work(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-12) {
      throw SingularError("inverse: singular at pivot column " + std::to_string(col), col);
    }
    if (pivot != col) {
      std::swap_ranges(work.row(col).begin(), work.row(col).end(), work.row(pivot).begin());
      std::swap_ranges(inv.row(col).begin(), inv.row(col).end(), inv.row(pivot).begin());
    }
    const double scale = 1.0 / work(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) *= scale;
      inv(col, j) *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(r, j) -= f * work(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

namespace {

// Fixed pseudo-random start vector so sigma_max is reproducible.
std::vector<double> start_vector(std::size_t n) {
  std::vector<double> v(n);
  std::uint64_t s = 0x2545f4914f6cdd1dULL;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s = splitmix64(s + i);
    v[i] = 2.0 * (static_cast<double>(s >> 11) * 0x1.0p-53) - 1.0;
    norm2 += v[i] * v[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

double sigma_max(const Matrix& a) {
  if (a.empty()) throw ShapeError("sigma_max: empty matrix");
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> v = start_vector(cols);
  std::vector<double> w(rows), u(cols);
  double lambda_prev = -1.0;
  double lambda = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    // w = A v ; u = A^T w ; lambda = v.u = |A v|^2 for unit v.
    for (std::size_t i = 0; i < rows; ++i) {
      const double* ai = a.row(i).data();
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += ai[j] * v[j];
      w[i] = s;
    }
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      const double wi = w[i];
      if (wi == 0.0) continue;
      const double* ai = a.row(i).data();
      for (std::size_t j = 0; j < cols; ++j) u[j] += ai[j] * wi;
    }
    lambda = 0.0;
    double unorm2 = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      lambda += v[j] * u[j];
      unorm2 += u[j] * u[j];
    }
    if (unorm2 == 0.0) return 0.0;  // A v = 0; handles the zero matrix
    const double inv = 1.0 / std::sqrt(unorm2);
    for (std::size_t j = 0; j < cols; ++j) v[j] = u[j] * inv;
    if (iter > 0 && std::abs(lambda - lambda_prev) <= 1e-10 * std::abs(lambda)) break;
    lambda_prev = lambda;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double clip(double lo, double v, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

Matrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }

Matrix operator*(double c, const Matrix& a) {
  Matrix r = a;
  for (double& v : r.data()) v *= c;
  return r;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: " + shape_string(a) + " + " + shape_string(b));
  }
  Matrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] += b.data()[i];
  return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("sub: " + shape_string(a) + " - " + shape_string(b));
  }
  Matrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= b.data()[i];
  return r;
}

}  // namespace oselmq
