#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "deeptrade/matrix.hpp"

namespace deeptrade {

/// Adam with bias correction. Moments are laid out parallel to the tensor
/// list the model exposes; the same list order must be used on every step.
struct AdamState {
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  void init(const std::vector<TensorRef>& params) {
    step_count = 0;
    first_moment.clear();
    second_moment.clear();
    for (const TensorRef& t : params) {
      first_moment.emplace_back(t.data->size(), 0.0);
      second_moment.emplace_back(t.data->size(), 0.0);
    }
  }
};

inline void adam_step(const std::vector<TensorRef>& params,
                      const std::vector<TensorRef>& grads, AdamState& state,
                      double lr) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_step: parameter/gradient list mismatch");

  state.step_count += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));

  for (std::size_t t = 0; t < params.size(); ++t) {
    std::vector<double>& p = *params[t].data;
    const std::vector<double>& g = *grads[t].data;
    if (p.size() != g.size())
      throw std::invalid_argument("adam_step: tensor size mismatch at " +
                                  params[t].name);
    std::vector<double>& m = state.first_moment[t];
    std::vector<double>& v = state.second_moment[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam_step: non-finite gradient in " +
                                 params[t].name);
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

inline void zero_tensors(const std::vector<TensorRef>& tensors) {
  for (const TensorRef& t : tensors)
    for (double& v : *t.data) v = 0.0;
}

}  // namespace deeptrade
