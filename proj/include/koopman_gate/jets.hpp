#pragma once

// Jet filtration D_n at a fixed point and the action of the pushforward f_*
// on it.
//
// Convention: f_* acts on jets as columns. Column alpha of the pushforward
// matrix holds the coordinates of f_* delta_p(d^alpha) in the basis
// delta_p(d^beta), i.e. d^alpha (h o f)(p) = sum_beta M[beta, alpha] d^beta h(p).
// With this convention (f o g)_* = f_* g_*, so
//   pushforward_matrix(f o g) = pushforward_matrix(f) * pushforward_matrix(g).

#include <algorithm>
#include <map>
#include <vector>

#include "koopman_gate/algebra/poly.hpp"

namespace kgate {

/// All multi-indices of length d and total degree exactly k, graded-lex order.
inline std::vector<MultiIndex> homogeneous_indices(int d, int k) {
  std::vector<MultiIndex> out;
  MultiIndex a(static_cast<std::size_t>(d), 0);
  // Recursive fill: larger leading exponents first.
  auto fill = [&](auto&& self, int j, int remaining) -> void {
    if (j == d - 1) {
      a[static_cast<std::size_t>(j)] = remaining;
      out.push_back(a);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      a[static_cast<std::size_t>(j)] = v;
      self(self, j + 1, remaining - v);
    }
  };
  fill(fill, 0, k);
  return out;
}

/// Ordered basis d^alpha, |alpha| <= n, of D_n at a point.
struct JetBasis {
  int dim = 1;
  int order = 0;
  std::vector<MultiIndex> indices;
  /// grade_offsets[k] = position of the first index of degree k; size order + 2.
  std::vector<std::size_t> grade_offsets;

  std::size_t size() const { return indices.size(); }

  std::size_t grade_size(int k) const {
    return grade_offsets[static_cast<std::size_t>(k) + 1] - grade_offsets[static_cast<std::size_t>(k)];
  }

  std::size_t position(const MultiIndex& alpha) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), alpha, GradedLexLess{});
    if (it == indices.end() || *it != alpha) throw DimensionError("JetBasis: index not in basis");
    return static_cast<std::size_t>(it - indices.begin());
  }
};

inline JetBasis jet_basis(int d, int n) {
  if (d < 1) throw DimensionError("jet_basis: d must be >= 1");
  if (n < 0) throw DomainError("jet_basis: n must be >= 0");
  JetBasis b;
  b.dim = d;
  b.order = n;
  for (int k = 0; k <= n; ++k) {
    b.grade_offsets.push_back(b.indices.size());
    auto layer = homogeneous_indices(d, k);
    b.indices.insert(b.indices.end(), layer.begin(), layer.end());
  }
  b.grade_offsets.push_back(b.indices.size());
  return b;
}

struct PushforwardMatrix {
  JetBasis basis;
  CxMatrix matrix;
  CxVector point;
  PolyMap map;
};

/// Matrix of f_* on D_n at a fixed point p, computed exactly from the Taylor
/// coefficients of prod_m (f_m(p + u) - p_m)^{beta_m}:
///   M[beta, alpha] = alpha! / beta! * [u^alpha] prod_m (f_m(p+u) - p_m)^{beta_m}.
inline PushforwardMatrix pushforward_matrix(const PolyMap& f, const CxVector& p, int n,
                                            double fixed_point_tol = 1e-9) {
  if (!f.is_square()) throw DimensionError("pushforward_matrix: f must be a self-map");
  if (p.size() != f.dim_in()) throw DimensionError("pushforward_matrix: point dimension mismatch");
  if (n < 0) throw DomainError("pushforward_matrix: n must be >= 0");
  const int d = f.dim_in();
  CxVector fp = f(p);
  for (int j = 0; j < d; ++j) {
    if (std::abs(fp(j) - p(j)) > fixed_point_tol)
      throw DomainError("pushforward_matrix: point is not fixed (residual " +
                        std::to_string(std::abs(fp(j) - p(j))) + ")");
  }

  // g_m(u) = f_m(p + u) - p_m, truncated at degree n.
  std::vector<MultiPoly> g;
  for (int m = 0; m < d; ++m) {
    MultiPoly gm = translate(f[m], p) - MultiPoly::constant(d, p(m));
    g.push_back(gm.pruned(0.0));
  }

  JetBasis basis = jet_basis(d, n);
  const auto N = static_cast<Eigen::Index>(basis.size());
  CxMatrix M = CxMatrix::Zero(N, N);

  // Cached truncated powers g_m^k.
  std::vector<std::vector<MultiPoly>> powers(static_cast<std::size_t>(d));
  for (int m = 0; m < d; ++m) {
    powers[m].push_back(MultiPoly::constant(d, 1.0));
    for (int k = 1; k <= n; ++k)
      powers[m].push_back(MultiPoly::multiply_truncated(powers[m].back(), g[m], n));
  }

  for (std::size_t col_beta = 0; col_beta < basis.size(); ++col_beta) {
    const MultiIndex& beta = basis.indices[col_beta];
    MultiPoly prod = MultiPoly::constant(d, 1.0);
    for (int m = 0; m < d; ++m)
      if (beta[m] > 0) prod = MultiPoly::multiply_truncated(prod, powers[m][beta[m]], n);
    double beta_fact = 1.0;
    for (int v : beta) beta_fact *= factorial(v);
    for (const auto& [alpha, c] : prod.terms()) {
      if (total_degree(alpha) > n) continue;
      double alpha_fact = 1.0;
      for (int v : alpha) alpha_fact *= factorial(v);
      M(static_cast<Eigen::Index>(col_beta), static_cast<Eigen::Index>(basis.position(alpha))) =
          c * (alpha_fact / beta_fact);
    }
  }
  return {std::move(basis), std::move(M), p, f};
}

/// Matrix of t^alpha -> prod_i (sum_m A(m, i) t_m)^{alpha_i} on homogeneous
/// polynomials of degree n in d variables (graded-lex basis).
inline CxMatrix symmetric_power_matrix(const CxMatrix& A, int n) {
  if (A.rows() != A.cols()) throw DimensionError("symmetric_power_matrix: A must be square");
  if (n < 0) throw DomainError("symmetric_power_matrix: n must be >= 0");
  const int d = static_cast<int>(A.rows());
  auto idx = homogeneous_indices(d, n);
  std::map<MultiIndex, Eigen::Index, GradedLexLess> pos;
  for (std::size_t i = 0; i < idx.size(); ++i) pos[idx[i]] = static_cast<Eigen::Index>(i);

  std::vector<MultiPoly> images;
  for (int i = 0; i < d; ++i) {
    MultiPoly li(d);
    for (int m = 0; m < d; ++m) li += MultiPoly::variable(d, m) * A(m, i);
    images.push_back(std::move(li));
  }
  const auto N = static_cast<Eigen::Index>(idx.size());
  CxMatrix S = CxMatrix::Zero(N, N);
  for (std::size_t col = 0; col < idx.size(); ++col) {
    MultiPoly prod = MultiPoly::constant(d, 1.0);
    for (int i = 0; i < d; ++i)
      if (idx[col][i] > 0) prod = prod * pow(images[i], idx[col][i]);
    for (const auto& [beta, c] : prod.terms()) S(pos.at(beta), static_cast<Eigen::Index>(col)) = c;
  }
  return S;
}

struct GradedBlocks {
  std::vector<CxMatrix> blocks;
  /// Largest |M[beta, alpha]| with |beta| > |alpha| (below-grade entries).
  double leakage = 0.0;
};

/// Diagonal blocks of the pushforward along the grading. Throws when the
/// filtration is not preserved within `tol`.
inline GradedBlocks graded_blocks(const PushforwardMatrix& M, double tol = 1e-9) {
  const JetBasis& b = M.basis;
  GradedBlocks out;
  for (std::size_t col = 0; col < b.size(); ++col) {
    int dc = total_degree(b.indices[col]);
    for (std::size_t row = 0; row < b.size(); ++row) {
      if (total_degree(b.indices[row]) > dc)
        out.leakage = std::max(out.leakage,
                               std::abs(M.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col))));
    }
  }
  if (out.leakage > tol)
    throw NumericalError("graded_blocks: filtration leakage " + std::to_string(out.leakage) + " exceeds tolerance");
  for (int k = 0; k <= b.order; ++k) {
    auto off = static_cast<Eigen::Index>(b.grade_offsets[static_cast<std::size_t>(k)]);
    auto sz = static_cast<Eigen::Index>(b.grade_size(k));
    out.blocks.push_back(M.matrix.block(off, off, sz, sz));
  }
  return out;
}

} // namespace kgate
