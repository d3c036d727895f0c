#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace plumedial {

// Dense row-major matrix sized for parameter-space work (14x14 and friends).
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<double>& data() const { return data_; }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  void add_outer(const std::vector<double>& v, double scale) {
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) (*this)(i, j) += scale * v[i] * v[j];
  }

  std::vector<double> multiply(const std::vector<double>& v) const {
    std::vector<double> out(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < cols_; ++j) acc += (*this)(i, j) * v[j];
      out[i] = acc;
    }
    return out;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// In-place Cholesky of a symmetric positive-definite matrix; returns false
// if a non-positive pivot is met.
inline bool cholesky_factor(Matrix& a) {
  const int n = a.rows();
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) return false;
    const double s = std::sqrt(d);
    a(j, j) = s;
    for (int i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (int k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / s;
    }
  }
  return true;
}

inline std::vector<double> cholesky_solve(const Matrix& chol, const std::vector<double>& b) {
  const int n = chol.rows();
  std::vector<double> y(b);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) y[i] -= chol(i, k) * y[k];
    y[i] /= chol(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) y[i] -= chol(k, i) * y[k];
    y[i] /= chol(i, i);
  }
  return y;
}

// Solve a x = b for symmetric positive-definite a; throws if the
// factorisation fails.
inline std::vector<double> solve_spd(Matrix a, const std::vector<double>& b) {
  if (!cholesky_factor(a)) throw std::runtime_error("solve_spd: matrix not positive definite");
  return cholesky_solve(a, b);
}

inline Matrix inverse_spd(Matrix a) {
  if (!cholesky_factor(a)) throw std::runtime_error("inverse_spd: matrix not positive definite");
  const int n = a.rows();
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const std::vector<double> col = cholesky_solve(a, e);
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

}  // namespace plumedial
