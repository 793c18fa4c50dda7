#pragma once

#include <stdexcept>

#include "deeptrade/matrix.hpp"
#include "deeptrade/rng.hpp"

namespace deeptrade {

enum class DropoutMode { train, eval };

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); eval mode is the identity.
/// The returned mask holds the applied per-element scale so the backward
/// pass can reuse it.
inline Matrix dropout(Matrix& x, double rate, DropoutMode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  Matrix mask(x.rows(), x.cols());
  if (mode == DropoutMode::eval || rate == 0.0) {
    mask.fill(1.0);
    return mask;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = rng.bernoulli(rate) ? 0.0 : keep_scale;
    mask.storage()[i] = s;
    x.storage()[i] *= s;
  }
  return mask;
}

}  // namespace deeptrade
