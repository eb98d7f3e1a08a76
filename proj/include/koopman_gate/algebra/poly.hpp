#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "koopman_gate/common.hpp"

namespace kgate {

/// Sparse multivariate polynomial with complex coefficients in graded-lex order.
/// Exact zeros are never stored.
class MultiPoly {
public:
  using Terms = std::map<MultiIndex, Cx, GradedLexLess>;

  explicit MultiPoly(int dim) : dim_(dim) {
    if (dim < 1) throw DimensionError("MultiPoly: dim must be positive");
  }

  static MultiPoly constant(int dim, Cx c) {
    MultiPoly p(dim);
    p.add_term(MultiIndex(dim, 0), c);
    return p;
  }

  static MultiPoly variable(int dim, int j) {
    if (j < 0 || j >= dim) throw DimensionError("MultiPoly::variable: index out of range");
    MultiIndex a(dim, 0);
    a[j] = 1;
    MultiPoly p(dim);
    p.add_term(a, 1.0);
    return p;
  }

  static MultiPoly monomial(const MultiIndex& alpha, Cx c = 1.0) {
    MultiPoly p(static_cast<int>(alpha.size()));
    p.add_term(alpha, c);
    return p;
  }

  /// Univariate polynomial from ascending coefficients c[0] + c[1] z + ...
  static MultiPoly univariate(std::span<const Cx> coeffs) {
    MultiPoly p(1);
    for (std::size_t k = 0; k < coeffs.size(); ++k) p.add_term({static_cast<int>(k)}, coeffs[k]);
    return p;
  }

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  /// Total degree; the zero polynomial reports 0.
  int degree() const {
    return terms_.empty() ? 0 : total_degree(terms_.rbegin()->first);
  }

  Cx coeff(const MultiIndex& alpha) const {
    auto it = terms_.find(alpha);
    return it == terms_.end() ? Cx{} : it->second;
  }

  void add_term(const MultiIndex& alpha, Cx c) {
    if (static_cast<int>(alpha.size()) != dim_)
      throw DimensionError("MultiPoly::add_term: multi-index length mismatch");
    for (int v : alpha)
      if (v < 0) throw DimensionError("MultiPoly::add_term: negative exponent");
    if (c == Cx{}) return;
    auto [it, inserted] = terms_.try_emplace(alpha, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Cx{}) terms_.erase(it);
    }
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Copy without coefficients of modulus <= tol.
  MultiPoly pruned(double tol) const {
    MultiPoly r(dim_);
    for (const auto& [a, c] : terms_)
      if (std::abs(c) > tol) r.terms_.emplace(a, c);
    return r;
  }

  Cx operator()(std::span<const Cx> z) const {
    if (static_cast<int>(z.size()) != dim_) throw DimensionError("poly_eval: point dimension mismatch");
    int deg = degree();
    // powers[j][k] = z_j^k
    std::vector<std::vector<Cx>> powers(dim_, std::vector<Cx>(deg + 1, 1.0));
    for (int j = 0; j < dim_; ++j)
      for (int k = 1; k <= deg; ++k) powers[j][k] = powers[j][k - 1] * z[j];
    Cx sum{};
    for (const auto& [a, c] : terms_) {
      Cx m = c;
      for (int j = 0; j < dim_; ++j) m *= powers[j][a[j]];
      sum += m;
    }
    return sum;
  }

  Cx operator()(const CxVector& z) const {
    return (*this)(std::span<const Cx>(z.data(), static_cast<std::size_t>(z.size())));
  }

  MultiPoly& operator+=(const MultiPoly& o) {
    check_dim(o);
    for (const auto& [a, c] : o.terms_) add_term(a, c);
    return *this;
  }

  MultiPoly& operator-=(const MultiPoly& o) {
    check_dim(o);
    for (const auto& [a, c] : o.terms_) add_term(a, -c);
    return *this;
  }

  MultiPoly& operator*=(Cx s) {
    if (s == Cx{}) {
      terms_.clear();
      return *this;
    }
    for (auto& [a, c] : terms_) c *= s;
    return *this;
  }

  friend MultiPoly operator+(MultiPoly a, const MultiPoly& b) { return a += b; }
  friend MultiPoly operator-(MultiPoly a, const MultiPoly& b) { return a -= b; }
  friend MultiPoly operator*(MultiPoly a, Cx s) { return a *= s; }
  friend MultiPoly operator*(Cx s, MultiPoly a) { return a *= s; }

  friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b) {
    return multiply_truncated(a, b, -1);
  }

  /// Product keeping only terms of total degree <= max_degree (no cut when negative).
  static MultiPoly multiply_truncated(const MultiPoly& a, const MultiPoly& b, int max_degree) {
    a.check_dim(b);
    MultiPoly r(a.dim_);
    MultiIndex g(a.dim_);
    for (const auto& [ia, ca] : a.terms_) {
      int da = total_degree(ia);
      if (max_degree >= 0 && da > max_degree) break;
      for (const auto& [ib, cb] : b.terms_) {
        if (max_degree >= 0 && da + total_degree(ib) > max_degree) break;
        for (int j = 0; j < a.dim_; ++j) g[j] = ia[j] + ib[j];
        r.add_term(g, ca * cb);
      }
    }
    return r;
  }

  friend bool operator==(const MultiPoly& a, const MultiPoly& b) {
    return a.dim_ == b.dim_ && a.terms_ == b.terms_;
  }

private:
  void check_dim(const MultiPoly& o) const {
    if (o.dim_ != dim_) throw DimensionError("MultiPoly: dimension mismatch");
  }

  int dim_;
  Terms terms_;
};

inline MultiPoly pow(const MultiPoly& p, int k, int max_degree = -1) {
  MultiPoly r = MultiPoly::constant(p.dim(), 1.0);
  MultiPoly base = p;
  while (k > 0) {
    if (k & 1) r = MultiPoly::multiply_truncated(r, base, max_degree);
    k >>= 1;
    if (k) base = MultiPoly::multiply_truncated(base, base, max_degree);
  }
  return r;
}

/// Holomorphic partial derivative d/dz_j.
inline MultiPoly derivative(const MultiPoly& p, int j) {
  if (j < 0 || j >= p.dim()) throw DimensionError("derivative: variable index out of range");
  MultiPoly r(p.dim());
  for (const auto& [a, c] : p.terms()) {
    if (a[j] == 0) continue;
    MultiIndex b = a;
    b[j] -= 1;
    r.add_term(b, c * static_cast<double>(a[j]));
  }
  return r;
}

/// Ascending coefficient vector of a univariate polynomial.
inline std::vector<Cx> univariate_coefficients(const MultiPoly& p) {
  if (p.dim() != 1) throw DimensionError("univariate_coefficients: polynomial is not univariate");
  std::vector<Cx> c(static_cast<std::size_t>(p.degree()) + 1);
  for (const auto& [a, v] : p.terms()) c[static_cast<std::size_t>(a[0])] = v;
  return c;
}

/// Polynomial map C^dim_in -> C^dim_out.
class PolyMap {
public:
  PolyMap(int dim_in, std::vector<MultiPoly> components)
      : dim_in_(dim_in), components_(std::move(components)) {
    if (dim_in < 1) throw DimensionError("PolyMap: dim_in must be positive");
    if (components_.empty()) throw DimensionError("PolyMap: at least one component required");
    for (const auto& c : components_)
      if (c.dim() != dim_in) throw DimensionError("PolyMap: component dimension mismatch");
  }

  static PolyMap identity(int d) {
    std::vector<MultiPoly> comps;
    for (int j = 0; j < d; ++j) comps.push_back(MultiPoly::variable(d, j));
    return PolyMap(d, std::move(comps));
  }

  /// z -> A z + b
  static PolyMap affine(const CxMatrix& A, const CxVector& b) {
    if (A.rows() != b.size()) throw DimensionError("PolyMap::affine: shape mismatch");
    int din = static_cast<int>(A.cols());
    std::vector<MultiPoly> comps;
    for (int m = 0; m < A.rows(); ++m) {
      MultiPoly p = MultiPoly::constant(din, b(m));
      for (int j = 0; j < din; ++j) p += MultiPoly::variable(din, j) * A(m, j);
      comps.push_back(std::move(p));
    }
    return PolyMap(din, std::move(comps));
  }

  int dim_in() const { return dim_in_; }
  int dim_out() const { return static_cast<int>(components_.size()); }
  const std::vector<MultiPoly>& components() const { return components_; }
  const MultiPoly& operator[](int m) const { return components_.at(static_cast<std::size_t>(m)); }

  int degree() const {
    int d = 0;
    for (const auto& c : components_) d = std::max(d, c.degree());
    return d;
  }

  bool is_square() const { return dim_in() == dim_out(); }

  CxVector operator()(const CxVector& z) const {
    if (z.size() != dim_in_) throw DimensionError("PolyMap: point dimension mismatch");
    CxVector out(dim_out());
    for (int m = 0; m < dim_out(); ++m) out(m) = components_[static_cast<std::size_t>(m)](z);
    return out;
  }

  PolyMap pruned(double tol) const {
    std::vector<MultiPoly> comps;
    for (const auto& c : components_) comps.push_back(c.pruned(tol));
    return PolyMap(dim_in_, std::move(comps));
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& c : components_) m = std::max(m, c.max_abs_coeff());
    return m;
  }

  friend bool operator==(const PolyMap& a, const PolyMap& b) {
    return a.dim_in_ == b.dim_in_ && a.components_ == b.components_;
  }

private:
  int dim_in_;
  std::vector<MultiPoly> components_;
};

inline Cx poly_eval(const MultiPoly& p, const CxVector& z) { return p(z); }

/// p(g(z)) for a scalar polynomial p on C^{g.dim_out}.
inline MultiPoly compose(const MultiPoly& p, const PolyMap& g, int max_degree = -1) {
  if (p.dim() != g.dim_out()) throw DimensionError("compose: g.dim_out must equal p.dim");
  const int d = p.dim();
  // Horner in the first variable, recursing through the remaining ones via
  // cached powers of each component of g.
  std::vector<std::vector<MultiPoly>> powers(static_cast<std::size_t>(d));
  std::vector<int> max_exp(static_cast<std::size_t>(d), 0);
  for (const auto& [a, c] : p.terms())
    for (int j = 0; j < d; ++j) max_exp[j] = std::max(max_exp[j], a[j]);
  for (int j = 0; j < d; ++j) {
    powers[j].push_back(MultiPoly::constant(g.dim_in(), 1.0));
    for (int k = 1; k <= max_exp[j]; ++k)
      powers[j].push_back(MultiPoly::multiply_truncated(powers[j].back(), g[j], max_degree));
  }
  // Group terms by the exponents of variables 1..d-1 so each distinct tail
  // product is formed once.
  std::map<MultiIndex, MultiPoly> by_tail;
  for (const auto& [a, c] : p.terms()) {
    MultiIndex tail(a.begin() + 1, a.end());
    auto it = by_tail.try_emplace(tail, g.dim_in()).first;
    it->second += powers[0][a[0]] * c;
  }
  MultiPoly result(g.dim_in());
  for (auto& [tail, head] : by_tail) {
    MultiPoly prod = head;
    for (int j = 1; j < d; ++j)
      if (tail[j - 1] > 0) prod = MultiPoly::multiply_truncated(prod, powers[j][tail[j - 1]], max_degree);
    result += prod;
  }
  return result;
}

/// f o g with exact coefficient expansion.
inline PolyMap poly_compose(const PolyMap& f, const PolyMap& g) {
  if (g.dim_out() != f.dim_in()) throw DimensionError("poly_compose: g.dim_out must equal f.dim_in");
  std::vector<MultiPoly> comps;
  for (const auto& c : f.components()) comps.push_back(compose(c, g));
  return PolyMap(g.dim_in(), std::move(comps));
}

/// f^r (r-fold self-composition).
inline PolyMap iterate(const PolyMap& f, int r) {
  if (!f.is_square()) throw DimensionError("iterate: map must be a self-map");
  if (r < 0) throw DomainError("iterate: negative count");
  PolyMap out = PolyMap::identity(f.dim_in());
  for (int k = 0; k < r; ++k) out = poly_compose(f, out);
  return out;
}

/// p(z + shift)
inline MultiPoly translate(const MultiPoly& p, const CxVector& shift) {
  CxMatrix I = CxMatrix::Identity(p.dim(), p.dim());
  return compose(p, PolyMap::affine(I, shift));
}

/// Symbolic Jacobian matrix of polynomials: entry (m, j) = d f_m / d z_j.
inline std::vector<std::vector<MultiPoly>> symbolic_jacobian(const PolyMap& f) {
  std::vector<std::vector<MultiPoly>> J;
  for (int m = 0; m < f.dim_out(); ++m) {
    std::vector<MultiPoly> row;
    for (int j = 0; j < f.dim_in(); ++j) row.push_back(derivative(f[m], j));
    J.push_back(std::move(row));
  }
  return J;
}

inline CxMatrix jacobian(const PolyMap& f, const CxVector& p) {
  if (p.size() != f.dim_in()) throw DimensionError("jacobian: point dimension mismatch");
  CxMatrix J(f.dim_out(), f.dim_in());
  for (int m = 0; m < f.dim_out(); ++m)
    for (int j = 0; j < f.dim_in(); ++j) J(m, j) = derivative(f[m], j)(p);
  return J;
}

/// Largest coefficient-wise deviation between two maps of equal shape.
inline double max_coeff_difference(const PolyMap& a, const PolyMap& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out())
    throw DimensionError("max_coeff_difference: shape mismatch");
  double m = 0.0;
  for (int k = 0; k < a.dim_out(); ++k) {
    MultiPoly diff = a[k] - b[k];
    m = std::max(m, diff.max_abs_coeff());
  }
  return m;
}

} // namespace kgate
