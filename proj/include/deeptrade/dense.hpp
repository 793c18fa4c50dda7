#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "deeptrade/activations.hpp"
#include "deeptrade/matrix.hpp"
#include "deeptrade/rng.hpp"

namespace deeptrade {

enum class Activation { linear, relu, tanh, sigmoid, softmax };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "linear";
}

struct DenseParams {
  Matrix W;                // (out, in)
  std::vector<double> b;   // (out)
  Activation activation = Activation::linear;

  std::size_t in_dim() const { return W.cols(); }
  std::size_t out_dim() const { return W.rows(); }
};

struct DenseGrads {
  Matrix W;
  std::vector<double> b;
};

inline DenseParams make_dense(std::size_t out, std::size_t in, Activation act) {
  DenseParams p;
  p.W.resize(out, in);
  p.b.assign(out, 0.0);
  p.activation = act;
  return p;
}

inline DenseGrads make_dense_grads(const DenseParams& p) {
  DenseGrads g;
  g.W.resize(p.W.rows(), p.W.cols());
  g.b.assign(p.b.size(), 0.0);
  return g;
}

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline void init_dense(DenseParams& p, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.in_dim()));
  for (double& w : p.W.storage()) w = rng.uniform(-bound, bound);
  for (double& b : p.b) b = 0.0;
}

struct DenseCache {
  Matrix x;  // (in, B)
  Matrix y;  // (out, B) post-activation
};

/// y = activation(W x + b), columns are samples. Softmax columns sum to 1.
inline Matrix dense_forward(const DenseParams& p, const Matrix& x,
                            DenseCache* cache = nullptr) {
  require(x.rows() == p.in_dim(), "dense_forward: input dim mismatch");
  Matrix y;
  gemm(y, p.W, x);
  add_bias(y, p.b);
  switch (p.activation) {
    case Activation::linear:
      break;
    case Activation::relu:
      relu_inplace(y);
      break;
    case Activation::tanh:
      tanh_inplace(y);
      break;
    case Activation::sigmoid:
      sigmoid_inplace(y);
      break;
    case Activation::softmax: {
      Matrix logp = log_softmax_columns(y);
      for (std::size_t i = 0; i < y.size(); ++i)
        y.storage()[i] = std::exp(logp.storage()[i]);
      break;
    }
  }
  if (cache) {
    cache->x = x;
    cache->y = y;
  }
  return y;
}

/// Accumulates parameter gradients into `grads` and returns dL/dx.
inline Matrix dense_backward(const DenseParams& p, const DenseCache& cache,
                             const Matrix& dy, DenseGrads& grads) {
  require(dy.rows() == p.out_dim() && dy.cols() == cache.x.cols(),
          "dense_backward: gradient shape mismatch");
  Matrix dz = dy;
  const Matrix& y = cache.y;
  switch (p.activation) {
    case Activation::linear:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < dz.size(); ++i)
        if (y.storage()[i] <= 0.0) dz.storage()[i] = 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < dz.size(); ++i)
        dz.storage()[i] *= 1.0 - y.storage()[i] * y.storage()[i];
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < dz.size(); ++i)
        dz.storage()[i] *= y.storage()[i] * (1.0 - y.storage()[i]);
      break;
    case Activation::softmax: {
      // dz_i = y_i * (dy_i - sum_k dy_k y_k), per column.
      for (std::size_t j = 0; j < dz.cols(); ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dz.rows(); ++i) dot += dy(i, j) * y(i, j);
        for (std::size_t i = 0; i < dz.rows(); ++i)
          dz(i, j) = y(i, j) * (dy(i, j) - dot);
      }
      break;
    }
  }
  gemm(grads.W, dz, transpose(cache.x), /*accumulate=*/true);
  for (std::size_t i = 0; i < dz.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dz.cols(); ++j) s += dz(i, j);
    grads.b[i] += s;
  }
  Matrix dx;
  gemm_tn(dx, p.W, dz);
  return dx;
}

}  // namespace deeptrade
