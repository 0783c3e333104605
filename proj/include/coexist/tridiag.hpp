#pragma once

#include <vector>

#include "coexist/errors.hpp"

namespace coexist {

/// Thomas algorithm for a tridiagonal system with lower diagonal `a`
/// (a[0] unused), diagonal `b` and upper diagonal `c` (c[n-1] unused).
/// Overwrites nothing; returns the solution.
inline std::vector<double> solve_tridiagonal(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             const std::vector<double>& c,
                                             const std::vector<double>& rhs) {
  const std::size_t n = b.size();
  if (a.size() != n || c.size() != n || rhs.size() != n)
    fail(errc::invalid_spec, "tridiagonal bands must have equal length");
  std::vector<double> cp(n), dp(n), x(n);
  double denom = b[0];
  if (denom == 0.0) fail(errc::singular_system, "zero pivot in tridiagonal solve");
  cp[0] = c[0] / denom;
  dp[0] = rhs[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = b[i] - a[i] * cp[i - 1];
    if (denom == 0.0) fail(errc::singular_system, "zero pivot in tridiagonal solve");
    cp[i] = c[i] / denom;
    dp[i] = (rhs[i] - a[i] * dp[i - 1]) / denom;
  }
  x[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
  return x;
}

}  // namespace coexist
