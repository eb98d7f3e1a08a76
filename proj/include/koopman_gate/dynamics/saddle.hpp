#pragma once

// Periodic orbits of Henon compositions f = H_1 o ... o H_k in C^2.
//
// A point (x_0, x_{-1}) is pushed through the letters (last letter first) by
//   x_{j+1} = Q_j(x_j) - b_j x_{j-1},
// so a period-r orbit of f is a cyclic sequence of length m = k r solving
//   x_{j+1} - Q_j(x_j) + b_j x_{j-1} = 0   (indices mod m).
// m = 1 and m = 2 are eliminated to univariate root solves; longer cycles use
// Newton from a seeded cloud of starts.

#include <cstdint>
#include <random>
#include <string>

#include "koopman_gate/dynamics/autword.hpp"
#include "koopman_gate/dynamics/orbit.hpp"

namespace kgate {

struct SaddleSearchParams {
  int starts = 4096;
  std::uint64_t seed = 0x5eed;
  /// Box half-width per coordinate; 0 = automatic escape radius.
  double box = 0.0;
  int max_newton_iterations = 60;
  double newton_residual = 1e-10;
  double dedup = 1e-6;
  double band = 1e-9;
  /// Stop after the first period that produced a saddle or repelling orbit.
  bool stop_at_first = false;
};

struct PeriodSearchLog {
  int period = 0;
  std::string method;  // "elimination" or "newton"
  int starts = 0;
  int converged = 0;
  int orbits = 0;
  double box = 0.0;
};

struct SaddleSearchResult {
  std::vector<PeriodicOrbit> orbits;
  std::vector<PeriodSearchLog> log;

  const PeriodicOrbit* first_saddle() const {
    for (const auto& o : orbits)
      if (o.stability == Stability::Saddle || o.stability == Stability::Repelling) return &o;
    return nullptr;
  }
};

namespace detail {

/// R such that |x| >= R and |x| >= |y| imply |Q(x) - b y| > 2 |x| for every letter.
inline double henon_escape_radius(const std::vector<HenonLetter>& core) {
  double R = 2.0;
  for (const auto& h : core) {
    auto c = univariate_coefficients(h.Q);
    const int d = static_cast<int>(c.size()) - 1;
    auto ok = [&](double x) {
      double lead = std::abs(c.back()) * std::pow(x, d);
      double rest = 0.0;
      for (int j = 0; j < d; ++j) rest += std::abs(c[static_cast<std::size_t>(j)]) * std::pow(x, j);
      return lead - rest - std::abs(h.b) * x > 2.0 * x;
    };
    double x = 1.0;
    while (!ok(x)) x *= 2.0;
    R = std::max(R, x);
  }
  return R;
}

struct LetterData {
  std::vector<Cx> q, dq;
  Cx b;
};

inline Cx horner(const std::vector<Cx>& c, Cx x) {
  Cx v{};
  for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
  return v;
}

/// Letter applied at step j of the cycle (last letter first).
inline const LetterData& step_letter(const std::vector<LetterData>& L, int j) {
  const int k = static_cast<int>(L.size());
  return L[static_cast<std::size_t>(k - 1 - (j % k))];
}

inline CxVector cycle_residual(const std::vector<LetterData>& L, const CxVector& x) {
  const auto m = x.size();
  CxVector F(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& l = step_letter(L, static_cast<int>(j));
    F(j) = x((j + 1) % m) - horner(l.q, x(j)) + l.b * x((j + m - 1) % m);
  }
  return F;
}

inline bool newton_cycle(const std::vector<LetterData>& L, CxVector& x, int iters, double tol) {
  const auto m = x.size();
  for (int it = 0; it < iters; ++it) {
    CxVector F = cycle_residual(L, x);
    double res = F.cwiseAbs().maxCoeff();
    if (!std::isfinite(res)) return false;
    if (res < tol * (1.0 + x.cwiseAbs().maxCoeff())) return true;
    CxMatrix J = CxMatrix::Zero(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& l = step_letter(L, static_cast<int>(j));
      J(j, (j + 1) % m) += 1.0;
      J(j, j) -= horner(l.dq, x(j));
      J(j, (j + m - 1) % m) += l.b;
    }
    Eigen::PartialPivLU<CxMatrix> lu(J);
    CxVector step = lu.solve(F);
    if (!step.allFinite()) return false;
    x -= step;
    if (x.cwiseAbs().maxCoeff() > 1e8) return false;
  }
  CxVector F = cycle_residual(L, x);
  return F.cwiseAbs().maxCoeff() < tol * (1.0 + x.cwiseAbs().maxCoeff());
}

inline std::vector<Cx> poly_coeffs_times(const std::vector<Cx>& c, Cx s) {
  std::vector<Cx> o(c);
  for (auto& v : o) v *= s;
  return o;
}

} // namespace detail

/// Orbits of the Henon composition with minimal period 1..r_max.
inline SaddleSearchResult saddle_search_2d(const std::vector<HenonLetter>& core, int r_max,
                                           const SaddleSearchParams& params = {}) {
  if (core.empty()) throw DomainError("saddle_search_2d: empty core");
  if (r_max < 1 || r_max > 8) throw DomainError("saddle_search_2d: r_max must be in [1, 8]");
  AutWord core_word;
  for (const auto& h : core) {
    validate(Letter{h});
    core_word.letters.push_back(h);
  }
  const PolyMap f = word_to_polymap(core_word);
  const int k = static_cast<int>(core.size());

  std::vector<detail::LetterData> L;
  for (const auto& h : core) {
    auto c = univariate_coefficients(h.Q);
    L.push_back({c, detail::derivative_coefficients(c), h.b});
  }
  const double box = params.box > 0.0 ? params.box : std::max(2.0, detail::henon_escape_radius(core));
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> U(-box, box);

  SaddleSearchResult result;
  auto point_of = [&](const CxVector& x, int i) {
    const auto m = x.size();
    CxVector z(2);
    z << x((static_cast<Eigen::Index>(i) * k) % m), x((static_cast<Eigen::Index>(i) * k + m - 1) % m);
    return z;
  };

  for (int r = 1; r <= r_max; ++r) {
    const int m = k * r;
    PeriodSearchLog log;
    log.period = r;
    log.box = box;
    std::vector<CxVector> cycles;

    if (m <= 2) {
      log.method = "elimination";
      if (m == 1) {
        // Q(x) - (1 + b) x = 0
        auto c = L[0].q;
        if (c.size() < 2) c.resize(2);
        c[1] -= 1.0 + L[0].b;
        for (const Root& rt : roots_from_coefficients(c)) cycles.push_back(CxVector::Constant(1, rt.value));
      } else {
        // Steps: x1 = Q_0(x0) - b_0 x1, x0 = Q_1(x1) - b_1 x0.
        const auto& l0 = detail::step_letter(L, 0);
        const auto& l1 = detail::step_letter(L, 1);
        Cx s0 = 1.0 + l0.b, s1 = 1.0 + l1.b;
        auto push = [&](Cx x0, Cx x1) {
          CxVector x(2);
          x << x0, x1;
          cycles.push_back(x);
        };
        if (std::abs(s0) > 1e-12) {
          // x1 = Q_0(x0)/s0 ; s1 x0 - Q_1(Q_0(x0)/s0) = 0
          MultiPoly q0 = MultiPoly::univariate(detail::poly_coeffs_times(l0.q, 1.0 / s0));
          MultiPoly q1 = MultiPoly::univariate(l1.q);
          MultiPoly g = MultiPoly::monomial({1}, s1) - compose(q1, PolyMap(1, {q0}));
          for (const Root& rt : roots_univariate(g)) push(rt.value, q0(CxVector::Constant(1, rt.value)));
        } else if (std::abs(s1) > 1e-12) {
          MultiPoly q1 = MultiPoly::univariate(detail::poly_coeffs_times(l1.q, 1.0 / s1));
          MultiPoly q0 = MultiPoly::univariate(l0.q);
          MultiPoly g = MultiPoly::monomial({1}, s0) - compose(q0, PolyMap(1, {q1}));
          for (const Root& rt : roots_univariate(g)) push(q1(CxVector::Constant(1, rt.value)), rt.value);
        } else {
          for (const Root& a : roots_from_coefficients(l0.q))
            for (const Root& b : roots_from_coefficients(l1.q)) push(a.value, b.value);
        }
      }
      // Polish in the cycle system.
      for (auto& x : cycles) detail::newton_cycle(L, x, 8, params.newton_residual);
      log.starts = static_cast<int>(cycles.size());
    } else {
      log.method = "newton";
      log.starts = params.starts;
      for (int s = 0; s < params.starts; ++s) {
        CxVector x(m);
        for (int j = 0; j < m; ++j) x(j) = Cx(U(rng), U(rng));
        if (detail::newton_cycle(L, x, params.max_newton_iterations, params.newton_residual)) cycles.push_back(x);
      }
    }
    log.converged = static_cast<int>(cycles.size());

    std::vector<PeriodicOrbit> found;
    for (const auto& x : cycles) {
      CxVector z0 = point_of(x, 0);
      if (!z0.allFinite()) continue;
      // Minimal period.
      bool minimal = true;
      for (int d : detail::proper_divisors(r)) {
        CxVector w = z0;
        for (int i = 0; i < d; ++i) w = f(w);
        if ((w - z0).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + z0.cwiseAbs().maxCoeff())) {
          minimal = false;
          break;
        }
      }
      if (!minimal) continue;
      PeriodicOrbit orb;
      orb.period = r;
      for (int i = 0; i < r; ++i) orb.points.push_back(point_of(x, i));
      bool dup = false;
      for (const auto& o : found)
        for (const auto& p : o.points)
          if ((p - orb.points[0]).cwiseAbs().maxCoeff() < params.dedup * (1.0 + p.cwiseAbs().maxCoeff())) dup = true;
      if (dup) continue;
      detail::canonical_rotation(orb.points);
      // Multipliers: eigenvalues of d(f^r) at points[0].
      CxMatrix D = CxMatrix::Identity(2, 2);
      CxVector z = orb.points[0];
      for (int i = 0; i < r; ++i) {
        D = jacobian(f, z) * D;
        z = f(z);
      }
      orb.multipliers = eigenvalues(D);
      orb.stability = classify(orb.multipliers, params.band);
      for (int i = 0; i < r; ++i) {
        CxVector img = f(orb.points[static_cast<std::size_t>(i)]);
        orb.residual = std::max(orb.residual, (img - orb.points[static_cast<std::size_t>((i + 1) % r)]).norm());
      }
      found.push_back(std::move(orb));
    }
    std::sort(found.begin(), found.end(),
              [](const PeriodicOrbit& a, const PeriodicOrbit& b) { return detail::lex_less(a.points[0], b.points[0]); });
    log.orbits = static_cast<int>(found.size());
    result.log.push_back(log);
    bool hit = false;
    for (auto& o : found) {
      hit = hit || o.stability == Stability::Saddle || o.stability == Stability::Repelling;
      result.orbits.push_back(std::move(o));
    }
    if (params.stop_at_first && hit) break;
  }
  return result;
}

} // namespace kgate
