#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "deeptrade/matrix.hpp"

namespace deeptrade {

/// State needed to undo differencing: the first raw value the diff dropped.
struct DiffState {
  double seed_value = 0.0;
};

/// Reversible min-max map: the affine transform taking [origin_min,
/// origin_max] onto [y_min, y_max].
struct NormalizationParams {
  double origin_min = 0.0;
  double origin_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
};

struct SplitSpec {
  double train_fraction = 0.7;
  double valid_fraction = 0.1;
  double test_fraction = 0.2;

  bool valid() const {
    auto in01 = [](double f) { return f > 0.0 && f < 1.0; };
    return in01(train_fraction) && in01(valid_fraction) &&
           in01(test_fraction) &&
           std::abs(train_fraction + valid_fraction + test_fraction - 1.0) <
               1e-9;
  }
};

inline std::pair<std::vector<double>, DiffState> difference(
    const std::vector<double>& values) {
  if (values.size() < 2)
    throw std::invalid_argument("difference: need at least 2 values");
  std::vector<double> diffs(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    diffs[i] = values[i + 1] - values[i];
  return {std::move(diffs), DiffState{values[0]}};
}

inline std::vector<double> invert_difference(const std::vector<double>& diffs,
                                             const DiffState& state) {
  if (!std::isfinite(state.seed_value))
    throw std::invalid_argument("invert_difference: non-finite seed");
  std::vector<double> values(diffs.size() + 1);
  values[0] = state.seed_value;
  for (std::size_t i = 0; i < diffs.size(); ++i)
    values[i + 1] = values[i] + diffs[i];
  return values;
}

/// Fits the map on `values` (the "unprocessed data set" extrema) and leaves
/// application to normalize_with so the same params can transform held-out
/// splits.
inline NormalizationParams minmax_fit(const std::vector<double>& values,
                                      double y_min = 0.0, double y_max = 1.0) {
  if (values.empty()) throw std::invalid_argument("minmax_fit: empty input");
  if (!(y_max > y_min))
    throw std::invalid_argument("minmax_fit: y_max must exceed y_min");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo))
    throw std::invalid_argument(
        "minmax_fit: constant input, normalization undefined");
  return NormalizationParams{*lo, *hi, y_min, y_max};
}

inline double normalize_value(double v, const NormalizationParams& p) {
  return (p.y_max - p.y_min) * (v - p.origin_min) /
             (p.origin_max - p.origin_min) +
         p.y_min;
}

inline double denormalize_value(double y, const NormalizationParams& p) {
  return (y - p.y_min) * (p.origin_max - p.origin_min) /
             (p.y_max - p.y_min) +
         p.origin_min;
}

inline std::vector<double> normalize_with(const std::vector<double>& values,
                                          const NormalizationParams& p) {
  if (!(p.origin_max > p.origin_min))
    throw std::invalid_argument("normalize_with: degenerate origin range");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = normalize_value(values[i], p);
  return out;
}

inline std::pair<std::vector<double>, NormalizationParams> minmax_normalize(
    const std::vector<double>& values, double y_min = 0.0,
    double y_max = 1.0) {
  NormalizationParams p = minmax_fit(values, y_min, y_max);
  return {normalize_with(values, p), p};
}

inline std::vector<double> denormalize(const std::vector<double>& values,
                                       const NormalizationParams& p) {
  if (!(p.y_max > p.y_min))
    throw std::invalid_argument("denormalize: degenerate target range");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = denormalize_value(values[i], p);
  return out;
}

struct SplitSizes {
  std::size_t train = 0, valid = 0, test = 0;
};

inline SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  if (!spec.valid())
    throw std::invalid_argument("split fractions must lie in (0,1) and sum to 1");
  if (n < 10) throw std::invalid_argument("split: series too short");
  SplitSizes s;
  s.train = static_cast<std::size_t>(
      std::floor(spec.train_fraction * static_cast<double>(n)));
  s.valid = static_cast<std::size_t>(
      std::floor(spec.valid_fraction * static_cast<double>(n)));
  s.test = n - s.train - s.valid;
  return s;
}

template <class T>
struct Split {
  std::vector<T> train, valid, test;
};

/// Contiguous prefix/middle/suffix in the original order; never shuffles.
template <class T>
Split<T> chronological_split(const std::vector<T>& series,
                             const SplitSpec& spec) {
  const SplitSizes s = split_sizes(series.size(), spec);
  Split<T> out;
  out.train.assign(series.begin(), series.begin() + s.train);
  out.valid.assign(series.begin() + s.train,
                   series.begin() + s.train + s.valid);
  out.test.assign(series.begin() + s.train + s.valid, series.end());
  return out;
}

/// Sliding windows paired with the value that follows each window. Row i of
/// `inputs` is values[i .. i+step), target[i] = values[i+step].
struct WindowSet {
  Matrix inputs;  // (count, step)
  std::vector<double> targets;

  std::size_t count() const { return targets.size(); }
  std::size_t step() const { return inputs.cols(); }
};

inline WindowSet make_windows(const std::vector<double>& values,
                              std::size_t step) {
  if (step == 0) throw std::invalid_argument("make_windows: step must be > 0");
  if (values.size() <= step)
    throw std::invalid_argument(
        "make_windows: need more values than the window length");
  const std::size_t n = values.size() - step;
  WindowSet ws;
  ws.inputs.resize(n, step);
  ws.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < step; ++j) ws.inputs(i, j) = values[i + j];
    ws.targets[i] = values[i + step];
  }
  return ws;
}

}  // namespace deeptrade
