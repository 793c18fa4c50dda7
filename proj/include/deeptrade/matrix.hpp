#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace deeptrade {

/// Dense row-major matrix of doubles. The multiply kernels below fix the
/// accumulation order per output element (k ascending), so results do not
/// depend on the batch width the computation was grouped into.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix zeros(std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols);
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, 0.0);
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// C = A * B, or C += A * B when accumulate is set.
inline void gemm(Matrix& c, const Matrix& a, const Matrix& b,
                 bool accumulate = false) {
  require(a.cols() == b.rows(), "gemm: inner dimensions differ");
  if (c.rows() != a.rows() || c.cols() != b.cols())
    c.resize(a.rows(), b.cols());
  if (!accumulate) c.fill(0.0);
  const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < kk; ++k) {
      const double aik = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

/// C = A^T * B (A is k x m, B is k x n), or += when accumulate is set.
inline void gemm_tn(Matrix& c, const Matrix& a, const Matrix& b,
                    bool accumulate = false) {
  require(a.rows() == b.rows(), "gemm_tn: inner dimensions differ");
  if (c.rows() != a.cols() || c.cols() != b.cols())
    c.resize(a.cols(), b.cols());
  if (!accumulate) c.fill(0.0);
  const std::size_t kk = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t k = 0; k < kk; ++k) {
    const double* ak = a.row(k);
    const double* bk = b.row(k);
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = ak[i];
      double* ci = c.row(i);
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  gemm(c, a, b);
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// M[i][j] += b[i] for every column j.
inline void add_bias(Matrix& m, const std::vector<double>& b) {
  require(b.size() == m.rows(), "add_bias: size mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* mi = m.row(i);
    const double bi = b[i];
    for (std::size_t j = 0; j < m.cols(); ++j) mi[j] += bi;
  }
}

/// M[i][j] += w[i] * s[i][j] (element-wise peephole terms).
inline void add_rowscale(Matrix& m, const std::vector<double>& w,
                         const Matrix& s) {
  require(w.size() == m.rows() && s.rows() == m.rows() && s.cols() == m.cols(),
          "add_rowscale: shape mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* mi = m.row(i);
    const double* si = s.row(i);
    const double wi = w[i];
    for (std::size_t j = 0; j < m.cols(); ++j) mi[j] += wi * si[j];
  }
}

/// Solves A x = b for small symmetric positive-definite A via Cholesky.
/// Returns false if A is not positive definite (singular regression matrix).
inline bool cholesky_solve(Matrix a, std::vector<double> b,
                           std::vector<double>& x) {
  const std::size_t n = a.rows();
  require(a.cols() == n && b.size() == n, "cholesky_solve: shape mismatch");
  // In-place Cholesky, lower triangle.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  // Forward then backward substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
    b[i] = s / a(i, i);
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a(k, ii) * x[k];
    x[ii] = s / a(ii, ii);
  }
  return true;
}

/// Named view of one parameter tensor. Models expose their parameters as a
/// flat list of these; the optimizer, serializer and finite-difference
/// checks all iterate the same list.
struct TensorRef {
  std::string name;
  std::vector<double>* data = nullptr;
  std::size_t rows = 0, cols = 0;
};

inline TensorRef ref(std::string name, Matrix& m) {
  return TensorRef{std::move(name), &m.storage(), m.rows(), m.cols()};
}

inline TensorRef ref(std::string name, std::vector<double>& v) {
  return TensorRef{std::move(name), &v, v.size(), 1};
}

}  // namespace deeptrade
