#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "koopman_gate/algebra/poly.hpp"

namespace kgate {

struct Root {
  Cx value;
  int multiplicity = 1;
};

namespace detail {

// Value and first derivative of sum c[k] z^k.
inline std::pair<Cx, Cx> horner_with_derivative(std::span<const Cx> c, Cx z) {
  Cx p = c.back(), dp{};
  for (std::size_t k = c.size() - 1; k-- > 0;) {
    dp = dp * z + p;
    p = p * z + c[k];
  }
  return {p, dp};
}

inline std::vector<Cx> derivative_coefficients(std::span<const Cx> c) {
  std::vector<Cx> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(c[k] * static_cast<double>(k));
  return d;
}

inline Cx newton_polish(std::span<const Cx> c, Cx z, int max_iter = 60) {
  Cx best = z;
  double best_res = std::abs(horner_with_derivative(c, z).first);
  for (int it = 0; it < max_iter; ++it) {
    auto [p, dp] = horner_with_derivative(c, z);
    if (p == Cx{} || dp == Cx{}) break;
    Cx step = p / dp;
    z -= step;
    if (!is_finite(z)) break;
    double res = std::abs(horner_with_derivative(c, z).first);
    if (res < best_res) {
      best_res = res;
      best = z;
    }
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(z))) break;
  }
  return best;
}

// Eigenvalues of the companion matrix of a polynomial with c.back() != 0 and
// c.front() != 0, after rescaling z = s*y to balance coefficient magnitudes.
inline std::vector<Cx> companion_roots(std::span<const Cx> c) {
  const int n = static_cast<int>(c.size()) - 1;
  if (n == 1) return {-c[0] / c[1]};
  double s = std::pow(std::abs(c[0]) / std::abs(c[n]), 1.0 / n);
  if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
  // Monic in y: y^n + sum_k (c[k] s^k / (c[n] s^n)) y^k
  CxMatrix C = CxMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    C(0, n - 1 - k) = -c[static_cast<std::size_t>(k)] * std::pow(s, k - n) / c[static_cast<std::size_t>(n)];
  }
  for (int i = 1; i < n; ++i) C(i, i - 1) = 1.0;
  Eigen::ComplexEigenSolver<CxMatrix> es(C, false);
  if (es.info() != Eigen::Success) throw NumericalError("roots_univariate: companion eigen-solve failed");
  std::vector<Cx> out;
  for (int i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i) * s);
  return out;
}

} // namespace detail

/// All complex roots with multiplicity of a univariate polynomial given by
/// ascending coefficients. Companion-matrix eigenvalues, Newton polish, then
/// multiplicity recovery: near-coincident polished roots are re-centred on the
/// simple root of the (m-1)-th derivative before the final clustering at
/// `cluster_radius`.
inline std::vector<Root> roots_from_coefficients(std::vector<Cx> c, double cluster_radius = 1e-8) {
  while (!c.empty() && c.back() == Cx{}) c.pop_back();
  if (c.empty()) throw DomainError("roots_univariate: zero polynomial");
  if (c.size() == 1) throw DomainError("roots_univariate: degree 0 polynomial has no roots");
  for (Cx v : c)
    if (!is_finite(v)) throw DomainError("roots_univariate: non-finite coefficient");

  std::vector<Root> out;
  std::size_t zeros = 0;
  while (c[zeros] == Cx{}) ++zeros;
  if (zeros > 0) out.push_back({Cx{}, static_cast<int>(zeros)});
  std::vector<Cx> q(c.begin() + static_cast<std::ptrdiff_t>(zeros), c.end());
  if (q.size() < 2) return out;

  std::vector<Cx> approx = detail::companion_roots(q);
  for (Cx& z : approx) z = detail::newton_polish(q, z);

  // Multiplicity recovery.
  const double group_radius = 1e-5;
  std::vector<bool> used(approx.size(), false);
  std::vector<Root> found;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> group{i};
    used[i] = true;
    for (std::size_t j = i + 1; j < approx.size(); ++j) {
      if (!used[j] && std::abs(approx[j] - approx[i]) < group_radius * (1.0 + std::abs(approx[i]))) {
        group.push_back(j);
        used[j] = true;
      }
    }
    if (group.size() == 1) {
      found.push_back({approx[i], 1});
      continue;
    }
    Cx centre{};
    for (auto g : group) centre += approx[g];
    centre /= static_cast<double>(group.size());
    std::vector<Cx> d = q;
    for (std::size_t k = 1; k < group.size(); ++k) d = detail::derivative_coefficients(d);
    Cx refined = detail::newton_polish(d, centre);
    bool consistent = std::abs(refined - centre) < group_radius * (1.0 + std::abs(centre));
    for (auto g : group)
      consistent = consistent && std::abs(approx[g] - refined) < group_radius * (1.0 + std::abs(refined));
    if (consistent) {
      found.push_back({refined, static_cast<int>(group.size())});
    } else {
      for (auto g : group) found.push_back({approx[g], 1});
    }
  }

  // Final clustering.
  std::vector<bool> merged(found.size(), false);
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (merged[i]) continue;
    Root r = found[i];
    for (std::size_t j = i + 1; j < found.size(); ++j) {
      if (!merged[j] && std::abs(found[j].value - r.value) < cluster_radius) {
        r.value = (r.value * static_cast<double>(r.multiplicity) +
                   found[j].value * static_cast<double>(found[j].multiplicity)) /
                  static_cast<double>(r.multiplicity + found[j].multiplicity);
        r.multiplicity += found[j].multiplicity;
        merged[j] = true;
      }
    }
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) {
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
  });
  return out;
}

inline std::vector<Root> roots_univariate(const MultiPoly& p, double cluster_radius = 1e-8) {
  if (p.dim() != 1) throw DimensionError("roots_univariate: polynomial must have dim 1");
  if (p.is_zero()) throw DomainError("roots_univariate: zero polynomial");
  return roots_from_coefficients(univariate_coefficients(p), cluster_radius);
}

} // namespace kgate
