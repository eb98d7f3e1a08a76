#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Eigenvalues>

#include "koopman_gate/algebra/roots.hpp"

namespace kgate {

/// Ascending coefficients of det(lambda I - M) by Faddeev-LeVerrier.
inline std::vector<Cx> characteristic_polynomial(const CxMatrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("characteristic_polynomial: matrix must be square");
  const int n = static_cast<int>(M.rows());
  std::vector<Cx> c(static_cast<std::size_t>(n) + 1);
  c[static_cast<std::size_t>(n)] = 1.0;
  CxMatrix Mk = CxMatrix::Zero(n, n);
  CxMatrix I = CxMatrix::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    Mk = M * Mk + c[static_cast<std::size_t>(n - k + 1)] * I;
    c[static_cast<std::size_t>(n - k)] = -(M * Mk).trace() / static_cast<double>(k);
  }
  return c;
}

/// Eigenvalues with algebraic multiplicity. Sizes up to 4 go through the
/// characteristic polynomial and the univariate root solver; larger ones use
/// a complex Schur (QR) iteration.
inline std::vector<Cx> eigenvalues(const CxMatrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("eigenvalues: matrix must be square");
  if (M.rows() > 64) throw DimensionError("eigenvalues: size exceeds 64");
  for (Eigen::Index i = 0; i < M.size(); ++i)
    if (!is_finite(M.data()[i])) throw DomainError("eigenvalues: non-finite entry");
  std::vector<Cx> out;
  if (M.rows() == 0) return out;
  if (M.rows() <= 4) {
    for (const Root& r : roots_from_coefficients(characteristic_polynomial(M)))
      for (int k = 0; k < r.multiplicity; ++k) out.push_back(r.value);
    return out;
  }
  Eigen::ComplexEigenSolver<CxMatrix> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalues: QR iteration failed");
  for (Eigen::Index i = 0; i < M.rows(); ++i) out.push_back(es.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](Cx a, Cx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

inline double spectral_radius(const CxMatrix& M) {
  double r = 0.0;
  for (Cx l : eigenvalues(M)) r = std::max(r, std::abs(l));
  return r;
}

inline double operator_norm(const CxMatrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<CxMatrix> svd(M);
  return svd.singularValues()(0);
}

/// Numerical rank with singular values compared against rel * sigma_max.
inline int numerical_rank(const CxMatrix& M, double rel) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<CxMatrix> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel * s(0)) ++r;
  return r;
}

} // namespace kgate
