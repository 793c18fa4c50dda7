#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "deeptrade/matrix.hpp"

namespace deeptrade {

struct AdfResult {
  double t_statistic = 0.0;
  double critical_value_5pct = 0.0;
  bool reject_unit_root = false;
};

namespace detail {
// MacKinnon asymptotic critical values, constant-only case.
inline constexpr double kAdfCrit1pct = -3.43035;
inline constexpr double kAdfCrit5pct = -2.86154;
inline constexpr double kAdfCrit10pct = -2.56677;
}  // namespace detail

/// Augmented Dickey-Fuller test, constant and no trend:
///   dy_t = alpha + rho * y_{t-1} + sum_i phi_i * dy_{t-i} + eps
/// fitted by ordinary least squares; the unit root is rejected at 5% when
/// t = rho_hat / stderr(rho_hat) falls below the tabulated critical value.
inline AdfResult adf_test(const std::vector<double>& values,
                          std::size_t lag_order = 0) {
  const std::size_t n = values.size();
  if (n < 25 + lag_order)
    throw std::invalid_argument("adf_test: series too short");

  std::vector<double> dy(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) dy[i] = values[i + 1] - values[i];

  // Regression rows t = lag_order+1 .. n-1 (indices into `values`).
  const std::size_t k = 2 + lag_order;  // constant, level, lagged diffs
  const std::size_t rows = n - 1 - lag_order;
  Matrix x(rows, k);
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = r + lag_order + 1;  // target is dy at index t-1
    y[r] = dy[t - 1];
    x(r, 0) = 1.0;
    x(r, 1) = values[t - 1];
    for (std::size_t i = 0; i < lag_order; ++i) x(r, 2 + i) = dy[t - 2 - i];
  }

  // Normal equations.
  Matrix xtx(k, k);
  std::vector<double> xty(k, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.row(r);
    for (std::size_t i = 0; i < k; ++i) {
      xty[i] += xr[i] * y[r];
      for (std::size_t j = i; j < k; ++j) xtx(i, j) += xr[i] * xr[j];
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j) xtx(i, j) = xtx(j, i);

  std::vector<double> beta;
  if (!cholesky_solve(xtx, xty, beta))
    throw std::runtime_error("adf_test: singular regression matrix");

  double rss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double fit = 0.0;
    const double* xr = x.row(r);
    for (std::size_t i = 0; i < k; ++i) fit += xr[i] * beta[i];
    const double e = y[r] - fit;
    rss += e * e;
  }
  if (rows <= k) throw std::runtime_error("adf_test: no residual degrees of freedom");
  const double sigma2 = rss / static_cast<double>(rows - k);

  // Var(beta) = sigma2 * (X'X)^-1; only the level coefficient's entry is
  // needed, via solving for the corresponding unit vector.
  std::vector<double> unit(k, 0.0);
  unit[1] = 1.0;
  std::vector<double> col;
  if (!cholesky_solve(xtx, unit, col))
    throw std::runtime_error("adf_test: singular regression matrix");
  const double se = std::sqrt(sigma2 * col[1]);
  if (!(se > 0.0) || !std::isfinite(se))
    throw std::runtime_error("adf_test: degenerate standard error");

  AdfResult res;
  res.t_statistic = beta[1] / se;
  res.critical_value_5pct = detail::kAdfCrit5pct;
  res.reject_unit_root = res.t_statistic < res.critical_value_5pct;
  return res;
}

}  // namespace deeptrade
