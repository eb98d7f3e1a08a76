#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kgate {

using Cx = std::complex<double>;
using CxMatrix = Eigen::MatrixXcd;
using CxVector = Eigen::VectorXcd;

/// Exponent vector of a monomial z^alpha.
using MultiIndex = std::vector<int>;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions or malformed shapes.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Input outside the domain of an operation (singular matrix, non-fixed point, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// A numerical postcondition could not be met (residuals, leakage, non-convergence).
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Gram-based operation requested on a non-Hilbert space descriptor.
class NotHilbertError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Thresholds shared across the pipelines. The defaults are the documented
/// contract values; `strict()` widens the indifferent band and tightens residuals.
struct Tolerances {
  double fixed_point = 1e-9;
  double stability_band = 1e-9;
  double rank_relative = 1e-10;
  double root_cluster = 1e-8;
  double orbit_dedup = 1e-6;
  double newton_residual = 1e-10;
  double relation = 1e-9;
  double leakage = 1e-9;

  static Tolerances standard() { return {}; }

  static Tolerances strict() {
    Tolerances t;
    t.fixed_point = 1e-11;
    t.stability_band = 1e-6;
    t.rank_relative = 1e-8;
    t.newton_residual = 1e-12;
    return t;
  }
};

inline bool is_finite(Cx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline int total_degree(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

/// Graded lexicographic order: lower total degree first, then the index with
/// the larger leading exponent first. (d=2: 1, t1, t2, t1^2, t1 t2, t2^2, ...)
struct GradedLexLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      if (a[i] != b[i]) return a[i] > b[i];
    }
    return a.size() < b.size();
  }
};

inline double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

/// n! / (n-k)!
inline double falling_factorial(int n, int k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (int j = 0; j < k; ++j) r *= (n - j);
  return r;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return falling_factorial(n, k) / factorial(k);
}

inline Cx ipow(Cx z, int k) {
  Cx r = 1.0;
  for (int j = 0; j < k; ++j) r *= z;
  return r;
}

} // namespace kgate
