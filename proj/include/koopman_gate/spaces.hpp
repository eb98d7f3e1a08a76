#pragma once

// Function-space descriptors, dual jets, jet Gram matrices and the
// injectivity test for kappa_p^n.
//
// Riesz convention (the only place conjugations are fixed): the dual jet v_alpha
// at p is the element of H_k with <h, v_alpha> = d^alpha h(p) for every h in
// H_k, inner product linear in the first slot. Consequently
//   Gram[alpha, beta] = <v_alpha, v_beta> = (d^beta v_alpha)(p).
//
// Power-series kernels k(z, w) = Phi(conj(z) * w) (coordinatewise product):
//   v_alpha(w) = w^alpha (d^alpha Phi)(conj(p) * w)
//   Gram[alpha, beta] = d_u^alpha d_w^beta Phi(u * w) at u = conj(p), w = p.
// Shift-invariant kernels realized on L^2(mu), functions h(w) = int F(xi) e^{-i w.xi} dmu:
//   v_alpha <-> (i xi)^alpha e^{i conj(p).xi}
//   Gram[alpha, beta] = i^|alpha| (-i)^|beta| int xi^(alpha+beta) e^{2 Im(p).xi} dmu.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "koopman_gate/algebra/poly.hpp"
#include "koopman_gate/jets.hpp"

namespace kgate {

// ---------------------------------------------------------------- descriptors

/// Finite list of c_alpha. `complete = false` means the list is a truncation
/// whose tail is not specified; the Gram matrix still uses only the listed terms.
struct ExplicitSeries {
  std::map<MultiIndex, double, GradedLexLess> coeffs;
  bool complete = true;
};

enum class PhiRule { Exp, Geometric, Explicit };

/// Phi(z) = phi(z_1 + ... + z_d).
///   Exp:       phi(x) = scale * e^{rate x}
///   Geometric: phi(x) = scale / (1 - rate x)   (|rate x| < 1)
///   Explicit:  phi(x) = sum_m phi[m] x^m
struct CompositeSeries {
  PhiRule rule = PhiRule::Exp;
  double scale = 1.0;
  double rate = 1.0;
  std::vector<double> phi;
};

/// Phi(z) = scale * exp(sum_i rates[i] z_i).
struct ExponentialSeries {
  double scale = 1.0;
  std::vector<double> rates;
};

struct PowerSeriesSpace {
  int dim = 1;
  std::variant<ExplicitSeries, CompositeSeries, ExponentialSeries> family;
};

/// Fock space F^q_alpha on C^d, kernel (alpha/pi)^d e^{alpha <z, w>}. q = +inf allowed.
struct FockSpace {
  int dim = 1;
  double alpha = 1.0;
  double q = 2.0;
};

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct Atom {
  double weight = 1.0;
  Eigen::VectorXd location;
};

/// k(z, w) = int e^{i (conj(z) - w).xi} dmu(xi), mu a finite mixture of Gaussians and atoms.
/// Without strips the domain is R^d; with strips it is {|Im z_j| < a_j}.
struct ShiftInvariantSpace {
  int dim = 1;
  std::vector<GaussianComponent> gaussians;
  std::vector<Atom> atoms;
  std::optional<Eigen::VectorXd> strips;
};

using SpaceDescriptor = std::variant<PowerSeriesSpace, FockSpace, ShiftInvariantSpace>;

inline int space_dim(const SpaceDescriptor& s) {
  return std::visit([](const auto& v) { return v.dim; }, s);
}

inline bool is_hilbert(const SpaceDescriptor& s) {
  if (const auto* f = std::get_if<FockSpace>(&s)) return f->q == 2.0;
  return true;
}

inline std::string family_name(const SpaceDescriptor& s) {
  if (const auto* ps = std::get_if<PowerSeriesSpace>(&s)) {
    switch (ps->family.index()) {
      case 0: return std::get<ExplicitSeries>(ps->family).complete ? "explicit" : "explicit-truncated";
      case 1: return "composite";
      default: return "exponential";
    }
  }
  if (std::holds_alternative<FockSpace>(s)) return "fock";
  return "shift-invariant";
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

inline bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace detail

/// Throws DomainError / DimensionError for descriptors that cannot define a
/// positive-definite kernel of the stated family.
inline void validate(const SpaceDescriptor& s) {
  using detail::finite_positive;
  using detail::require;
  if (space_dim(s) < 1) throw DimensionError("space: dim must be >= 1");
  const int d = space_dim(s);
  if (const auto* ps = std::get_if<PowerSeriesSpace>(&s)) {
    if (const auto* e = std::get_if<ExplicitSeries>(&ps->family)) {
      require(!e->coeffs.empty(), "power series: empty coefficient list");
      for (const auto& [a, c] : e->coeffs) {
        if (static_cast<int>(a.size()) != d) throw DimensionError("power series: multi-index length mismatch");
        for (int v : a) require(v >= 0, "power series: negative exponent");
        require(std::isfinite(c) && c >= 0.0, "power series: coefficients must be >= 0");
      }
    } else if (const auto* c = std::get_if<CompositeSeries>(&ps->family)) {
      if (c->rule == PhiRule::Explicit) {
        require(!c->phi.empty(), "composite: empty phi list");
        for (double v : c->phi) require(std::isfinite(v) && v >= 0.0, "composite: phi coefficients must be >= 0");
      } else {
        require(finite_positive(c->scale) && finite_positive(c->rate), "composite: scale and rate must be > 0");
      }
    } else {
      const auto& x = std::get<ExponentialSeries>(ps->family);
      if (static_cast<int>(x.rates.size()) != d) throw DimensionError("exponential: rates length mismatch");
      require(finite_positive(x.scale), "exponential: scale must be > 0");
      for (double r : x.rates) require(finite_positive(r), "exponential: rates must be > 0");
    }
  } else if (const auto* f = std::get_if<FockSpace>(&s)) {
    require(finite_positive(f->alpha), "fock: alpha must be > 0");
    require(f->q > 0.0 && !std::isnan(f->q), "fock: q must be in (0, inf]");
  } else {
    const auto& si = std::get<ShiftInvariantSpace>(s);
    require(!si.gaussians.empty() || !si.atoms.empty(), "shift-invariant: empty measure");
    for (const auto& g : si.gaussians) {
      require(finite_positive(g.weight), "shift-invariant: weights must be > 0");
      if (g.mean.size() != d || g.cov.rows() != d || g.cov.cols() != d)
        throw DimensionError("shift-invariant: gaussian shape mismatch");
      require(g.mean.allFinite() && g.cov.allFinite(), "shift-invariant: non-finite gaussian parameters");
      require((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, g.cov.cwiseAbs().maxCoeff()),
              "shift-invariant: covariance must be symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
      require(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()),
              "shift-invariant: covariance must be positive semidefinite");
    }
    for (const auto& a : si.atoms) {
      require(finite_positive(a.weight), "shift-invariant: weights must be > 0");
      if (a.location.size() != d) throw DimensionError("shift-invariant: atom shape mismatch");
      require(a.location.allFinite(), "shift-invariant: non-finite atom");
    }
    if (si.strips) {
      if (si.strips->size() != d) throw DimensionError("shift-invariant: strips length mismatch");
      for (Eigen::Index j = 0; j < d; ++j) require(finite_positive((*si.strips)(j)), "shift-invariant: strip widths must be > 0");
    }
  }
}

// Convenience constructors; all validate.
inline SpaceDescriptor explicit_series(int d, std::map<MultiIndex, double, GradedLexLess> coeffs, bool complete = true) {
  SpaceDescriptor s = PowerSeriesSpace{d, ExplicitSeries{std::move(coeffs), complete}};
  validate(s);
  return s;
}

inline SpaceDescriptor composite_series(int d, PhiRule rule, double scale, double rate, std::vector<double> phi = {}) {
  SpaceDescriptor s = PowerSeriesSpace{d, CompositeSeries{rule, scale, rate, std::move(phi)}};
  validate(s);
  return s;
}

inline SpaceDescriptor exponential_series(int d, double scale, std::vector<double> rates) {
  SpaceDescriptor s = PowerSeriesSpace{d, ExponentialSeries{scale, std::move(rates)}};
  validate(s);
  return s;
}

inline SpaceDescriptor fock_space(int d, double alpha, double q = 2.0) {
  SpaceDescriptor s = FockSpace{d, alpha, q};
  validate(s);
  return s;
}

/// Standard Gaussian N(0, I) on R^d.
inline SpaceDescriptor gaussian_shift_invariant(int d) {
  ShiftInvariantSpace si;
  si.dim = d;
  si.gaussians.push_back({1.0, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)});
  SpaceDescriptor s = si;
  validate(s);
  return s;
}

// ---------------------------------------------------------------- kernels

namespace detail {

/// Fock spaces are the exponential family with scale (alpha/pi)^d and rates alpha.
inline ExponentialSeries fock_as_exponential(const FockSpace& f) {
  return {std::pow(f.alpha / std::numbers::pi, f.dim), std::vector<double>(static_cast<std::size_t>(f.dim), f.alpha)};
}

/// phi^{(m)}(x) for a composite family.
inline Cx phi_derivative(const CompositeSeries& c, int m, Cx x) {
  switch (c.rule) {
    case PhiRule::Exp:
      return c.scale * std::pow(c.rate, m) * std::exp(c.rate * x);
    case PhiRule::Geometric: {
      Cx den = 1.0 - c.rate * x;
      if (std::abs(c.rate * x) >= 1.0) throw DomainError("composite geometric: point outside the disc of convergence");
      return c.scale * factorial(m) * std::pow(c.rate, m) / ipow(den, m + 1);
    }
    case PhiRule::Explicit: {
      Cx acc{};
      for (std::size_t k = c.phi.size(); k-- > static_cast<std::size_t>(m);)
        acc = acc * x + c.phi[k] * falling_factorial(static_cast<int>(k), m);
      return acc;
    }
  }
  return {};
}

/// d^alpha Phi at x.
inline Cx phi_partial(const PowerSeriesSpace& ps, const MultiIndex& a, const CxVector& x) {
  if (const auto* e = std::get_if<ExplicitSeries>(&ps.family)) {
    Cx acc{};
    for (const auto& [g, c] : e->coeffs) {
      Cx term = c;
      bool live = true;
      for (std::size_t i = 0; i < g.size() && live; ++i) {
        if (g[i] < a[i]) live = false;
        else term *= falling_factorial(g[i], a[i]) * ipow(x(static_cast<Eigen::Index>(i)), g[i] - a[i]);
      }
      if (live) acc += term;
    }
    return acc;
  }
  if (const auto* c = std::get_if<CompositeSeries>(&ps.family)) return phi_derivative(*c, total_degree(a), x.sum());
  const auto& ex = std::get<ExponentialSeries>(ps.family);
  Cx acc = ex.scale;
  Cx arg{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc *= std::pow(ex.rates[i], a[i]);
    arg += ex.rates[i] * x(static_cast<Eigen::Index>(i));
  }
  return acc * std::exp(arg);
}

inline void check_power_series_domain(const PowerSeriesSpace& ps, const CxVector& p) {
  if (const auto* c = std::get_if<CompositeSeries>(&ps.family)) {
    if (c->rule == PhiRule::Geometric && c->rate * p.squaredNorm() >= 1.0)
      throw DomainError("composite geometric: point outside the ball of convergence");
  }
}

/// d_u^j d_w^k e^{r u w} at (u, w).
inline Cx exp_mixed_partial(double r, int j, int k, Cx u, Cx w) {
  Cx acc{};
  for (int l = 0; l <= std::min(j, k); ++l)
    acc += binomial(j, l) * falling_factorial(k, l) * std::pow(r, k) * ipow(u, k - l) * std::pow(r, j - l) *
           ipow(w, j - l);
  return acc * std::exp(r * u * w);
}

inline CxMatrix exponential_gram(const ExponentialSeries& ex, const CxVector& p, const JetBasis& b) {
  const auto N = static_cast<Eigen::Index>(b.size());
  const int d = b.dim;
  // Per-coordinate tables g_i(j, k).
  std::vector<CxMatrix> tab(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    tab[static_cast<std::size_t>(i)].resize(b.order + 1, b.order + 1);
    for (int j = 0; j <= b.order; ++j)
      for (int k = 0; k <= b.order; ++k)
        tab[static_cast<std::size_t>(i)](j, k) =
            exp_mixed_partial(ex.rates[static_cast<std::size_t>(i)], j, k, std::conj(p(i)), p(i));
  }
  CxMatrix G(N, N);
  for (Eigen::Index r = 0; r < N; ++r)
    for (Eigen::Index c = 0; c < N; ++c) {
      Cx v = ex.scale;
      for (int i = 0; i < d; ++i)
        v *= tab[static_cast<std::size_t>(i)](b.indices[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)],
                                              b.indices[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]);
      G(r, c) = v;
    }
  return G;
}

inline CxMatrix explicit_gram(const ExplicitSeries& e, const CxVector& p, const JetBasis& b) {
  const auto N = static_cast<Eigen::Index>(b.size());
  CxMatrix G = CxMatrix::Zero(N, N);
  for (const auto& [g, c] : e.coeffs) {
    for (Eigen::Index r = 0; r < N; ++r) {
      const MultiIndex& a = b.indices[static_cast<std::size_t>(r)];
      Cx left = c;
      for (std::size_t i = 0; i < g.size() && left != Cx{}; ++i)
        left = g[i] < a[i] ? Cx{} : left * falling_factorial(g[i], a[i]) *
                                        ipow(std::conj(p(static_cast<Eigen::Index>(i))), g[i] - a[i]);
      if (left == Cx{}) continue;
      for (Eigen::Index col = 0; col < N; ++col) {
        const MultiIndex& be = b.indices[static_cast<std::size_t>(col)];
        Cx v = left;
        for (std::size_t i = 0; i < g.size() && v != Cx{}; ++i)
          v = g[i] < be[i] ? Cx{} : v * falling_factorial(g[i], be[i]) * ipow(p(static_cast<Eigen::Index>(i)), g[i] - be[i]);
        G(r, col) += v;
      }
    }
  }
  return G;
}

/// Composite Phi = phi(sum z): expand phi(s0 + delta) with
/// delta = sum_i (p_i a_i + conj(p_i) b_i + a_i b_i) and read a^alpha b^beta coefficients.
inline CxMatrix composite_gram(const CompositeSeries& c, const CxVector& p, const JetBasis& b) {
  const int d = b.dim, n = b.order;
  const int D = 2 * d;
  MultiPoly delta(D);
  for (int i = 0; i < d; ++i) {
    delta += MultiPoly::variable(D, i) * p(i);
    delta += MultiPoly::variable(D, d + i) * std::conj(p(i));
    MultiIndex ab(static_cast<std::size_t>(D), 0);
    ab[static_cast<std::size_t>(i)] = 1;
    ab[static_cast<std::size_t>(d + i)] = 1;
    delta.add_term(ab, 1.0);
  }
  const Cx s0 = p.squaredNorm();
  MultiPoly acc(D), power = MultiPoly::constant(D, 1.0);
  for (int m = 0; m <= 2 * n; ++m) {
    if (m > 0) power = MultiPoly::multiply_truncated(power, delta, 2 * n);
    acc += power * (phi_derivative(c, m, s0) / factorial(m));
  }
  const auto N = static_cast<Eigen::Index>(b.size());
  CxMatrix G = CxMatrix::Zero(N, N);
  for (Eigen::Index r = 0; r < N; ++r)
    for (Eigen::Index col = 0; col < N; ++col) {
      const MultiIndex& a = b.indices[static_cast<std::size_t>(r)];
      const MultiIndex& be = b.indices[static_cast<std::size_t>(col)];
      MultiIndex key(a);
      key.insert(key.end(), be.begin(), be.end());
      double f = 1.0;
      for (int v : a) f *= factorial(v);
      for (int v : be) f *= factorial(v);
      G(r, col) = acc.coeff(key) * f;
    }
  return G;
}

/// Moments of a Gaussian with (possibly complex) mean and covariance S:
/// E[xi^(g + e_i)] = m_i E[xi^g] + sum_j S_ij g_j E[xi^(g - e_j)].
class GaussianMoments {
public:
  GaussianMoments(CxVector mean, Eigen::MatrixXd cov) : mean_(std::move(mean)), cov_(std::move(cov)) {}

  Cx operator()(const MultiIndex& g) {
    auto it = memo_.find(g);
    if (it != memo_.end()) return it->second;
    std::size_t i = 0;
    while (i < g.size() && g[i] == 0) ++i;
    Cx v;
    if (i == g.size()) {
      v = 1.0;
    } else {
      MultiIndex h = g;
      h[i] -= 1;
      v = mean_(static_cast<Eigen::Index>(i)) * (*this)(h);
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (h[j] == 0 || cov_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 0.0) continue;
        MultiIndex h2 = h;
        h2[j] -= 1;
        v += cov_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * static_cast<double>(h[j]) * (*this)(h2);
      }
    }
    memo_.emplace(g, v);
    return v;
  }

private:
  CxVector mean_;
  Eigen::MatrixXd cov_;
  std::map<MultiIndex, Cx> memo_;
};

/// Tilted moment int xi^g e^{t.xi} dmu for every g in `indices`.
inline std::vector<Cx> tilted_moments(const ShiftInvariantSpace& si, const std::vector<MultiIndex>& indices,
                                      const CxVector& t) {
  std::vector<Cx> out(indices.size(), Cx{});
  for (const auto& gc : si.gaussians) {
    CxVector m = gc.mean.cast<Cx>();
    CxMatrix S = gc.cov.cast<Cx>();
    Cx factor = gc.weight * std::exp((t.transpose() * m)(0) +
                                     0.5 * (t.transpose() * S * t)(0));
    GaussianMoments mom(m + S * t, gc.cov);
    for (std::size_t k = 0; k < indices.size(); ++k) out[k] += factor * mom(indices[k]);
  }
  for (const auto& at : si.atoms) {
    CxVector a = at.location.cast<Cx>();
    Cx e = at.weight * std::exp((t.transpose() * a)(0));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      Cx v = e;
      for (std::size_t i = 0; i < indices[k].size(); ++i) v *= ipow(a(static_cast<Eigen::Index>(i)), indices[k][i]);
      out[k] += v;
    }
  }
  return out;
}

inline void check_shift_domain(const ShiftInvariantSpace& si, const CxVector& p) {
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    double im = std::abs(p(j).imag());
    if (si.strips) {
      if (im >= (*si.strips)(j)) throw DomainError("shift-invariant: point outside the strip domain");
    } else if (im != 0.0) {
      throw DomainError("shift-invariant: point must be real when no strips are declared");
    }
  }
}

inline Cx i_pow(int k) {
  static const Cx t[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return t[((k % 4) + 4) % 4];
}

inline void check_point(const SpaceDescriptor& s, const CxVector& p) {
  if (p.size() != space_dim(s)) throw DimensionError("space: point dimension mismatch");
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (!is_finite(p(j))) throw DomainError("space: non-finite point");
  if (const auto* ps = std::get_if<PowerSeriesSpace>(&s)) check_power_series_domain(*ps, p);
  if (const auto* si = std::get_if<ShiftInvariantSpace>(&s)) check_shift_domain(*si, p);
}

} // namespace detail

/// k(p, p).
inline double kernel_diagonal(const SpaceDescriptor& s, const CxVector& p) {
  validate(s);
  detail::check_point(s, p);
  const int d = space_dim(s);
  if (const auto* si = std::get_if<ShiftInvariantSpace>(&s)) {
    CxVector t(d);
    for (int j = 0; j < d; ++j) t(j) = 2.0 * p(j).imag();
    return detail::tilted_moments(*si, {MultiIndex(static_cast<std::size_t>(d), 0)}, t)[0].real();
  }
  PowerSeriesSpace ps = std::holds_alternative<FockSpace>(s)
                            ? PowerSeriesSpace{d, detail::fock_as_exponential(std::get<FockSpace>(s))}
                            : std::get<PowerSeriesSpace>(s);
  CxVector x = p.cwiseAbs2().cast<Cx>();
  return detail::phi_partial(ps, MultiIndex(static_cast<std::size_t>(d), 0), x).real();
}

// ---------------------------------------------------------------- dual jets

/// iota'(delta_p d^alpha) as an explicit function.
struct DualJet {
  SpaceDescriptor space;
  CxVector point;
  MultiIndex index;

  /// The H_k function at w.
  Cx operator()(const CxVector& w) const {
    if (w.size() != point.size()) throw DimensionError("dual_jet: evaluation point dimension mismatch");
    const int d = static_cast<int>(point.size());
    if (const auto* si = std::get_if<ShiftInvariantSpace>(&space)) {
      // i^|alpha| int xi^alpha e^{i (conj(p) - w).xi} dmu
      CxVector t = Cx(0, 1) * (point.conjugate() - w);
      return detail::i_pow(total_degree(index)) * detail::tilted_moments(*si, {index}, t)[0];
    }
    PowerSeriesSpace ps = std::holds_alternative<FockSpace>(space)
                              ? PowerSeriesSpace{d, detail::fock_as_exponential(std::get<FockSpace>(space))}
                              : std::get<PowerSeriesSpace>(space);
    CxVector x = point.conjugate().cwiseProduct(w);
    Cx mono = 1.0;
    for (int i = 0; i < d; ++i) mono *= ipow(w(i), index[static_cast<std::size_t>(i)]);
    return mono * detail::phi_partial(ps, index, x);
  }

  /// Shift-invariant only: the L^2(mu) representative (i xi)^alpha e^{i conj(p).xi}.
  Cx in_l2(const Eigen::VectorXd& xi) const {
    if (!std::holds_alternative<ShiftInvariantSpace>(space))
      throw DomainError("dual_jet: L^2 representative exists only for shift-invariant spaces");
    if (xi.size() != point.size()) throw DimensionError("dual_jet: xi dimension mismatch");
    Cx v = detail::i_pow(total_degree(index));
    Cx arg{};
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
      v *= std::pow(xi(i), index[static_cast<std::size_t>(i)]);
      arg += std::conj(point(i)) * xi(i);
    }
    return v * std::exp(Cx(0, 1) * arg);
  }
};

inline DualJet dual_jet(const SpaceDescriptor& s, const CxVector& p, const MultiIndex& alpha) {
  validate(s);
  detail::check_point(s, p);
  if (static_cast<int>(alpha.size()) != space_dim(s)) throw DimensionError("dual_jet: index length mismatch");
  for (int v : alpha)
    if (v < 0) throw DomainError("dual_jet: negative exponent");
  return {s, p, alpha};
}

// ---------------------------------------------------------------- Gram

struct GramMatrix {
  JetBasis basis;
  CxMatrix entries;
};

inline GramMatrix jet_gram(const SpaceDescriptor& s, const CxVector& p, int n) {
  validate(s);
  if (!is_hilbert(s)) throw NotHilbertError("jet_gram: Fock q != 2 is not a Hilbert space; use monomial witnesses");
  detail::check_point(s, p);
  if (n < 0) throw DomainError("jet_gram: n must be >= 0");
  const int d = space_dim(s);
  JetBasis b = jet_basis(d, n);
  CxMatrix G;
  if (const auto* f = std::get_if<FockSpace>(&s)) {
    G = detail::exponential_gram(detail::fock_as_exponential(*f), p, b);
  } else if (const auto* ps = std::get_if<PowerSeriesSpace>(&s)) {
    if (const auto* e = std::get_if<ExplicitSeries>(&ps->family)) G = detail::explicit_gram(*e, p, b);
    else if (const auto* c = std::get_if<CompositeSeries>(&ps->family)) G = detail::composite_gram(*c, p, b);
    else G = detail::exponential_gram(std::get<ExponentialSeries>(ps->family), p, b);
  } else {
    const auto& si = std::get<ShiftInvariantSpace>(s);
    auto sums = jet_basis(d, 2 * n).indices;
    CxVector t(d);
    for (int j = 0; j < d; ++j) t(j) = 2.0 * p(j).imag();
    auto mom = detail::tilted_moments(si, sums, t);
    std::map<MultiIndex, Cx, GradedLexLess> table;
    for (std::size_t k = 0; k < sums.size(); ++k) table.emplace(sums[k], mom[k]);
    const auto N = static_cast<Eigen::Index>(b.size());
    G.resize(N, N);
    for (Eigen::Index r = 0; r < N; ++r)
      for (Eigen::Index c = 0; c < N; ++c) {
        const MultiIndex& a = b.indices[static_cast<std::size_t>(r)];
        const MultiIndex& be = b.indices[static_cast<std::size_t>(c)];
        MultiIndex g(a);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += be[i];
        G(r, c) = detail::i_pow(total_degree(a) - total_degree(be)) * table.at(g);
      }
  }
  // Exact Hermitian symmetry: mirror the upper triangle.
  for (Eigen::Index r = 0; r < G.rows(); ++r) {
    G(r, r) = G(r, r).real();
    for (Eigen::Index c = r + 1; c < G.cols(); ++c) G(c, r) = std::conj(G(r, c));
  }
  for (Eigen::Index i = 0; i < G.size(); ++i)
    if (!is_finite(G.data()[i])) throw NumericalError("jet_gram: non-finite entry");
  return {std::move(b), std::move(G)};
}

// ---------------------------------------------------------------- injectivity

struct GramSpectrum {
  int rank = 0;
  /// Kernel direction in jet coordinates (empty when full rank).
  CxVector kernel_vector;
  double min_scaled_eigenvalue = 0.0;
};

/// Numerical rank of the diagonally scaled Gram matrix D G D, D = diag(G_ii^{-1/2});
/// indices with G_ii = 0 are dual jets that vanish and count as rank deficit.
inline GramSpectrum gram_spectrum(const CxMatrix& G, double rel) {
  const Eigen::Index N = G.rows();
  GramSpectrum out;
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < N; ++i)
    if (G(i, i).real() > 0.0) live.push_back(i);
  if (static_cast<Eigen::Index>(live.size()) < N) {
    for (Eigen::Index i = 0; i < N; ++i)
      if (std::find(live.begin(), live.end(), i) == live.end()) {
        out.kernel_vector = CxVector::Zero(N);
        out.kernel_vector(i) = 1.0;
        break;
      }
  }
  if (live.empty()) return out;
  const auto L = static_cast<Eigen::Index>(live.size());
  CxMatrix S(L, L);
  Eigen::VectorXd dinv(L);
  for (Eigen::Index a = 0; a < L; ++a) dinv(a) = 1.0 / std::sqrt(G(live[a], live[a]).real());
  for (Eigen::Index a = 0; a < L; ++a)
    for (Eigen::Index c = 0; c < L; ++c) S(a, c) = G(live[a], live[c]) * dinv(a) * dinv(c);
  Eigen::SelfAdjointEigenSolver<CxMatrix> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("gram_spectrum: eigen-solve failed");
  const auto& ev = es.eigenvalues();
  double lmax = ev.maxCoeff();
  for (Eigen::Index k = 0; k < L; ++k)
    if (ev(k) > rel * lmax) ++out.rank;
  out.min_scaled_eigenvalue = ev.minCoeff();
  if (out.rank < L && out.kernel_vector.size() == 0) {
    out.kernel_vector = CxVector::Zero(N);
    CxVector u = es.eigenvectors().col(0);
    for (Eigen::Index a = 0; a < L; ++a) out.kernel_vector(live[a]) = u(a) * dinv(a);
    out.kernel_vector /= out.kernel_vector.norm();
  }
  return out;
}

enum class Assumption35 { Holds, Fails, Unknown };

inline const char* to_string(Assumption35 v) {
  switch (v) {
    case Assumption35::Holds: return "holds";
    case Assumption35::Fails: return "fails";
    default: return "unknown";
  }
}

/// Zariski-density assumption on the support of the power-series coefficients
/// (read as: the support is infinite and, for every nonempty proper coordinate
/// subset, infinitely many support indices agree with any fixed pattern there).
inline Assumption35 assumption35_check(const SpaceDescriptor& s) {
  validate(s);
  const auto* ps = std::get_if<PowerSeriesSpace>(&s);
  if (!ps) throw DomainError("assumption35_check: descriptor is not a power series");
  if (const auto* e = std::get_if<ExplicitSeries>(&ps->family))
    return e->complete ? Assumption35::Fails : Assumption35::Unknown;
  if (const auto* c = std::get_if<CompositeSeries>(&ps->family))
    return c->rule == PhiRule::Explicit ? Assumption35::Fails : Assumption35::Holds;
  return Assumption35::Holds;
}

enum class InjectivityStatus { Injective, NotInjective, Unknown };
enum class EvidenceSource { Structural, Numerical };

inline const char* to_string(InjectivityStatus v) {
  switch (v) {
    case InjectivityStatus::Injective: return "injective";
    case InjectivityStatus::NotInjective: return "not_injective";
    default: return "unknown";
  }
}

inline const char* to_string(EvidenceSource v) { return v == EvidenceSource::Structural ? "structural" : "numerical"; }

struct InjectivityVerdict {
  InjectivityStatus status = InjectivityStatus::Unknown;
  EvidenceSource source = EvidenceSource::Numerical;
  int rank = 0;
  int expected = 0;
  CxVector kernel_vector;
  std::string reason;
};

/// Structural injectivity of iota' on jets at p, if a theorem-level reason applies.
inline std::optional<std::string> structural_injectivity(const SpaceDescriptor& s, const CxVector& p) {
  if (std::holds_alternative<FockSpace>(s)) return "fock space: dual jets are w^alpha times the kernel section";
  if (const auto* si = std::get_if<ShiftInvariantSpace>(&s)) {
    for (const auto& g : si->gaussians) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
      if (es.eigenvalues().minCoeff() > 0.0)
        return "measure has an absolutely continuous part; polynomials embed in L^2(mu)";
    }
    return std::nullopt;
  }
  if (assumption35_check(s) == Assumption35::Holds && p.norm() > 0.0)
    return "coefficient support satisfies the density assumption and p != 0";
  return std::nullopt;
}

/// Rank-based injectivity of iota' on D_n at p, no shortcut.
inline InjectivityVerdict numerical_injectivity(const SpaceDescriptor& s, const CxVector& p, int n,
                                                double rel = 1e-10) {
  GramMatrix G = jet_gram(s, p, n);
  GramSpectrum sp = gram_spectrum(G.entries, rel);
  InjectivityVerdict v;
  v.source = EvidenceSource::Numerical;
  v.rank = sp.rank;
  v.expected = static_cast<int>(G.basis.size());
  if (v.rank == v.expected) {
    v.status = InjectivityStatus::Injective;
    v.reason = "jet Gram matrix has full numerical rank";
    return v;
  }
  v.kernel_vector = sp.kernel_vector;
  const auto* ps = std::get_if<PowerSeriesSpace>(&s);
  const auto* e = ps ? std::get_if<ExplicitSeries>(&ps->family) : nullptr;
  if (e && !e->complete) {
    v.status = InjectivityStatus::Unknown;
    v.reason = "rank deficit on a truncated coefficient list; the unspecified tail may restore it";
  } else {
    v.status = InjectivityStatus::NotInjective;
    v.reason = "jet Gram matrix is rank deficient";
  }
  return v;
}

inline InjectivityVerdict kappa_injectivity(const SpaceDescriptor& s, const CxVector& p, int n, double rel = 1e-10) {
  validate(s);
  detail::check_point(s, p);
  if (n < 0) throw DomainError("kappa_injectivity: n must be >= 0");
  if (auto why = structural_injectivity(s, p)) {
    InjectivityVerdict v;
    v.status = InjectivityStatus::Injective;
    v.source = EvidenceSource::Structural;
    v.expected = static_cast<int>(binomial(n + space_dim(s), space_dim(s)));
    v.rank = v.expected;
    v.reason = *why;
    return v;
  }
  if (!is_hilbert(s)) {
    InjectivityVerdict v;
    v.reason = "non-Hilbert descriptor without a structural argument";
    return v;
  }
  return numerical_injectivity(s, p, n, rel);
}

// ---------------------------------------------------------------- dimension probe

enum class DimensionKind { InfiniteDimensional, FiniteDimensional, Undetermined };

inline const char* to_string(DimensionKind k) {
  switch (k) {
    case DimensionKind::InfiniteDimensional: return "infinite";
    case DimensionKind::FiniteDimensional: return "finite";
    default: return "undetermined";
  }
}

struct DimensionVerdict {
  DimensionKind kind = DimensionKind::Undetermined;
  /// ranks[n] = rank of iota'(D_n) at p.
  std::vector<int> ranks;
  /// Grades n with a nonzero graded quotient.
  std::vector<int> nonzero_grades;
  /// Dimension bound when finite.
  int dimension = 0;
  /// Structural information, if any ("" when none).
  std::string structural;
};

inline DimensionVerdict infinite_dimensionality(const SpaceDescriptor& s, const CxVector& p, int N,
                                                double rel = 1e-10) {
  if (N < 1) throw DomainError("infinite_dimensionality: probe depth must be >= 1");
  GramMatrix G = jet_gram(s, p, N);
  DimensionVerdict v;
  for (int n = 0; n <= N; ++n) {
    auto sz = static_cast<Eigen::Index>(G.basis.grade_offsets[static_cast<std::size_t>(n) + 1]);
    v.ranks.push_back(gram_spectrum(G.entries.topLeftCorner(sz, sz), rel).rank);
    int prev = n == 0 ? 0 : v.ranks[static_cast<std::size_t>(n) - 1];
    if (v.ranks.back() > prev) v.nonzero_grades.push_back(n);
  }
  const int last = v.ranks.back();
  if (last > v.ranks[static_cast<std::size_t>(N) - 1]) {
    v.kind = DimensionKind::InfiniteDimensional;
  } else if (v.ranks[static_cast<std::size_t>((N + 1) / 2)] == last) {
    v.kind = DimensionKind::FiniteDimensional;
    v.dimension = last;
  }
  if (std::holds_alternative<FockSpace>(s)) {
    v.structural = "infinite: polynomials are dense in the Fock space";
  } else if (const auto* ps = std::get_if<PowerSeriesSpace>(&s)) {
    if (const auto* e = std::get_if<ExplicitSeries>(&ps->family)) {
      int support = 0;
      for (const auto& [a, c] : e->coeffs) support += c > 0.0;
      if (e->complete) v.structural = "finite: dimension " + std::to_string(support) + " (nonzero coefficients)";
    } else if (const auto* c = std::get_if<CompositeSeries>(&ps->family)) {
      v.structural = c->rule == PhiRule::Explicit ? "finite: phi is a polynomial" : "infinite: phi is transcendental";
    } else {
      v.structural = "infinite: exponential kernel";
    }
  } else {
    const auto& si = std::get<ShiftInvariantSpace>(s);
    bool ac = false;
    for (const auto& g : si.gaussians) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
      ac = ac || es.eigenvalues().minCoeff() > 0.0;
    }
    if (ac) v.structural = "infinite: measure has an absolutely continuous part";
    else if (si.gaussians.empty())
      v.structural = "finite: at most " + std::to_string(si.atoms.size()) + " atoms";
  }
  return v;
}

} // namespace kgate
