#pragma once

#include <cassert>
#include <cmath>
#include <cstring>
#include <vector>

namespace retro {

// Dense row-major matrix of doubles. All model math runs in double; tensors
// are narrowed to f32 only at checkpoint boundaries.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return d.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return d.data() + static_cast<size_t>(r) * cols; }

  size_t size() const { return d.size(); }
  void zero() { std::memset(d.data(), 0, d.size() * sizeof(double)); }
  void fill(double v) { std::fill(d.begin(), d.end(), v); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B (+ C if accumulate)
inline void gemm_nn(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false) {
  assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
  if (!accumulate) C.zero();
  for (int i = 0; i < A.rows; ++i) {
    double* crow = C.row(i);
    const double* arow = A.row(i);
    for (int k = 0; k < A.cols; ++k) {
      double a = arow[k];
      if (a == 0.0) continue;
      const double* brow = B.row(k);
      for (int j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
    }
  }
}

// C = A * B^T
inline void gemm_nt(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false) {
  assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
  if (!accumulate) C.zero();
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = A.row(i);
    double* crow = C.row(i);
    for (int j = 0; j < B.rows; ++j) {
      const double* brow = B.row(j);
      double s = 0.0;
      for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
      crow[j] += s;
    }
  }
}

// C = A^T * B
inline void gemm_tn(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false) {
  assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
  if (!accumulate) C.zero();
  for (int k = 0; k < A.rows; ++k) {
    const double* arow = A.row(k);
    const double* brow = B.row(k);
    for (int i = 0; i < A.cols; ++i) {
      double a = arow[i];
      if (a == 0.0) continue;
      double* crow = C.row(i);
      for (int j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
    }
  }
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  assert(a.same_shape(b));
  for (size_t i = 0; i < a.d.size(); ++i) a.d[i] += b.d[i];
}

inline void scale_inplace(Matrix& a, double s) {
  for (double& v : a.d) v *= s;
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace retro
