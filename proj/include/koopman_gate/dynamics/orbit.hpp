#pragma once

// Periodic orbits, stability classes, and the 1D periodic-point solver.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "koopman_gate/algebra/linalg.hpp"
#include "koopman_gate/algebra/poly.hpp"
#include "koopman_gate/algebra/roots.hpp"

namespace kgate {

enum class Stability { Superattracting, Attracting, Indifferent, Repelling, Saddle };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::Superattracting: return "superattracting";
    case Stability::Attracting: return "attracting";
    case Stability::Indifferent: return "indifferent";
    case Stability::Repelling: return "repelling";
    default: return "saddle";
  }
}

struct PeriodicOrbit {
  std::vector<CxVector> points;
  int period = 1;
  /// Eigenvalues of d(f^r) at points[0].
  std::vector<Cx> multipliers;
  Stability stability = Stability::Indifferent;
  /// max_i |f(points[i]) - points[i+1 mod r]|
  double residual = 0.0;

  double max_multiplier_modulus() const {
    double m = 0.0;
    for (Cx l : multipliers) m = std::max(m, std::abs(l));
    return m;
  }
};

/// superattracting: all |l| < 1e-9; attracting: all |l| < 1 - band; repelling:
/// all |l| > 1 + band; saddle: exactly one expanding multiplier in dimension 2;
/// otherwise indifferent.
inline Stability classify(const std::vector<Cx>& multipliers, double band = 1e-9) {
  int expanding = 0, contracting = 0, super = 0;
  for (Cx l : multipliers) {
    double a = std::abs(l);
    if (a > 1.0 + band) ++expanding;
    if (a < 1.0 - band) ++contracting;
    if (a < 1e-9) ++super;
  }
  const int n = static_cast<int>(multipliers.size());
  if (n == 0) return Stability::Indifferent;
  if (expanding == n) return Stability::Repelling;
  if (super == n) return Stability::Superattracting;
  if (contracting == n) return Stability::Attracting;
  if (n == 2 && expanding == 1 && contracting == 1) return Stability::Saddle;
  return Stability::Indifferent;
}

namespace detail {

// Lexicographic on (Re, Im) per coordinate; components within 1e-9 count as
// equal so that rounding noise does not decide the order.
inline bool lex_less(const CxVector& a, const CxVector& b) {
  auto differ = [](double x, double y) { return std::abs(x - y) > 1e-9 * (1.0 + std::abs(x) + std::abs(y)); };
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (differ(a(i).real(), b(i).real())) return a(i).real() < b(i).real();
    if (differ(a(i).imag(), b(i).imag())) return a(i).imag() < b(i).imag();
  }
  return false;
}

/// Rotate an orbit so that the lexicographically smallest point comes first.
inline void canonical_rotation(std::vector<CxVector>& pts) {
  auto it = std::min_element(pts.begin(), pts.end(), lex_less);
  std::rotate(pts.begin(), it, pts.end());
}

inline std::vector<int> proper_divisors(int r) {
  std::vector<int> out;
  for (int k = 1; k < r; ++k)
    if (r % k == 0) out.push_back(k);
  return out;
}

// f^r(z) and (f^r)'(z) for a univariate map.
inline std::pair<Cx, Cx> iterate_with_derivative_1d(const MultiPoly& f, const MultiPoly& df, Cx z, int r) {
  Cx d = 1.0;
  for (int k = 0; k < r; ++k) {
    CxVector v = CxVector::Constant(1, z);
    d *= df(v);
    z = f(v);
  }
  return {z, d};
}

/// Simultaneous Aberth-Ehrlich refinement of all roots of g, given g and g'.
template <class G>
void aberth_refine(std::vector<Cx>& z, G&& g, int max_iter = 500) {
  const std::size_t n = z.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!is_finite(z[i])) z[i] = std::polar(1.0 + 0.1 * static_cast<double>(i), 2.0 * static_cast<double>(i) + 0.4);
  std::vector<bool> done(n, false);
  for (int it = 0; it < max_iter; ++it) {
    bool all_done = true;
    for (std::size_t k = 0; k < n; ++k) {
      if (done[k]) continue;
      auto [v, d] = g(z[k]);
      if (v == Cx{}) {
        done[k] = true;
        continue;
      }
      if (!is_finite(v) || !is_finite(d) || d == Cx{}) {
        all_done = false;
        continue;
      }
      Cx w = v / d;
      Cx rep{};
      for (std::size_t j = 0; j < n; ++j)
        if (j != k && z[j] != z[k]) rep += 1.0 / (z[k] - z[j]);
      Cx den = 1.0 - w * rep;
      Cx step = den == Cx{} ? w : w / den;
      if (!is_finite(step)) {
        all_done = false;
        continue;
      }
      z[k] -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(z[k]))) done[k] = true;
      else all_done = false;
    }
    if (all_done) break;
  }
}

} // namespace detail

/// All periodic orbits of exact minimal period r of a univariate polynomial.
inline std::vector<PeriodicOrbit> periodic_points_1d(const PolyMap& f, int r, double band = 1e-9,
                                                     double cluster = 1e-8) {
  if (f.dim_in() != 1 || f.dim_out() != 1) throw DimensionError("periodic_points_1d: map must be univariate");
  if (r < 1 || r > 12) throw DomainError("periodic_points_1d: period must be in [1, 12]");
  const int deg = f.degree();
  if (deg < 2) throw DomainError("periodic_points_1d: affine input (degree < 2)");
  if (std::pow(static_cast<double>(deg), r) > 1e6) throw DomainError("periodic_points_1d: degree^r exceeds 1e6");

  const MultiPoly& p = f[0];
  const MultiPoly dp = derivative(p, 0);
  MultiPoly fixed_eq = iterate(f, r)[0] - MultiPoly::variable(1, 0);
  auto roots = roots_univariate(fixed_eq, cluster);

  // The expanded coefficients of f^r(z) - z are badly conditioned for large
  // deg^r, so the companion roots only seed a simultaneous (Aberth) refinement
  // that evaluates f^r by iteration.
  std::vector<Cx> seeds;
  for (const Root& rt : roots)
    for (int m = 0; m < rt.multiplicity; ++m) seeds.push_back(rt.value);
  auto g = [&](Cx z) {
    auto [v, d] = detail::iterate_with_derivative_1d(p, dp, z, r);
    return std::pair<Cx, Cx>{v - z, d - 1.0};
  };
  detail::aberth_refine(seeds, g);

  std::vector<Cx> candidates;
  for (Cx z : seeds) {
    if (!is_finite(z)) continue;
    bool minimal = true;
    for (int k : detail::proper_divisors(r)) {
      Cx w = detail::iterate_with_derivative_1d(p, dp, z, k).first;
      if (std::abs(w - z) < cluster * (1.0 + std::abs(z))) {
        minimal = false;
        break;
      }
    }
    if (minimal) candidates.push_back(z);
  }

  std::vector<PeriodicOrbit> out;
  std::vector<bool> used(candidates.size(), false);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    PeriodicOrbit orb;
    orb.period = r;
    Cx z = candidates[i];
    Cx lambda = 1.0;
    for (int k = 0; k < r; ++k) {
      CxVector v = CxVector::Constant(1, z);
      orb.points.push_back(v);
      lambda *= dp(v);
      z = p(v);
    }
    // Claim the other members of the orbit among the candidates.
    for (const auto& pt : orb.points) {
      for (std::size_t j = i + 1; j < candidates.size(); ++j) {
        if (!used[j] && std::abs(candidates[j] - pt(0)) < 1e-6 * (1.0 + std::abs(pt(0)))) used[j] = true;
      }
    }
    detail::canonical_rotation(orb.points);
    orb.multipliers = {lambda};
    orb.stability = classify(orb.multipliers, band);
    for (int k = 0; k < r; ++k) {
      Cx img = p(orb.points[static_cast<std::size_t>(k)]);
      orb.residual = std::max(orb.residual, std::abs(img - orb.points[static_cast<std::size_t>((k + 1) % r)](0)));
    }
    out.push_back(std::move(orb));
  }
  std::sort(out.begin(), out.end(),
            [](const PeriodicOrbit& a, const PeriodicOrbit& b) { return detail::lex_less(a.points[0], b.points[0]); });
  return out;
}

} // namespace kgate
