#pragma once

#include <cmath>

#include "deeptrade/matrix.hpp"

namespace deeptrade {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void sigmoid_inplace(Matrix& m) {
  for (double& v : m.storage()) v = sigmoid(v);
}

inline void tanh_inplace(Matrix& m) {
  for (double& v : m.storage()) v = std::tanh(v);
}

inline void relu_inplace(Matrix& m) {
  for (double& v : m.storage())
    if (v < 0.0) v = 0.0;
}

/// out[i][j] += a[i][j] * b[i][j]
inline void add_hadamard(Matrix& out, const Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out.storage()[i] += a.storage()[i] * b.storage()[i];
}

inline void hadamard_inplace(Matrix& out, const Matrix& a) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out.storage()[i] *= a.storage()[i];
}

/// Column-wise log-softmax: logits (A, B) -> log-probabilities (A, B).
/// Numerically stable; exp() of the result is a valid distribution.
inline Matrix log_softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  const std::size_t a = logits.rows(), b = logits.cols();
  for (std::size_t j = 0; j < b; ++j) {
    double mx = logits(0, j);
    for (std::size_t i = 1; i < a; ++i) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < a; ++i) sum += std::exp(logits(i, j) - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t i = 0; i < a; ++i) out(i, j) = logits(i, j) - lse;
  }
  return out;
}

}  // namespace deeptrade
