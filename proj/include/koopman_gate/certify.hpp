#pragma once

// Boundedness-obstruction certificates for composition operators.
//
// Every pipeline is one-directional: a repelling (or saddle) periodic point
// whose dual jets stay independent forces C_f to be unbounded. Nothing here
// ever claims boundedness; NoObstruction is the strongest positive answer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "koopman_gate/dynamics/autword.hpp"
#include "koopman_gate/dynamics/orbit.hpp"
#include "koopman_gate/dynamics/saddle.hpp"
#include "koopman_gate/jets.hpp"
#include "koopman_gate/spaces.hpp"

namespace kgate {

enum class Verdict { Unbounded, NoObstruction, Inconclusive };
enum class Pipeline { Theorem1, Affine1D, PolyAut2D };
enum class Condition2Kind { InjectiveStructural, InjectiveNumerical, Unknown };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Unbounded: return "unbounded";
    case Verdict::NoObstruction: return "no-obstruction";
    default: return "inconclusive";
  }
}

inline const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::Theorem1: return "theorem1";
    case Pipeline::Affine1D: return "affine1d";
    default: return "polyaut2d";
  }
}

inline const char* to_string(Condition2Kind k) {
  switch (k) {
    case Condition2Kind::InjectiveStructural: return "injective-structural";
    case Condition2Kind::InjectiveNumerical: return "injective-numerical";
    default: return "unknown";
  }
}

/// Evidence that Ker kappa^n_p sits inside Ker gr^n (dual jets independent).
struct Condition2 {
  Condition2Kind kind = Condition2Kind::Unknown;
  /// Orders n at which the Gram rank was checked (numerical evidence only).
  std::vector<int> probed;
  std::string reason;
};

struct NormTracePoint {
  int n = 0;
  double value = 0.0;
  bool rank_deficient = false;
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  Tolerances tolerances;
  int r_max = 0;
  int n_max = 0;
};

/// One row of the 1D periodic-orbit search.
struct OrbitSearchStep {
  int period = 0;
  int orbits = 0;
  int repelling = 0;
};

// ---------------------------------------------------------------- span check

/// Root set of s21 a^2 + (s11 - s22) a - s12.
struct AlphaSet {
  enum class Kind { All, Empty, Finite };
  Kind kind = Kind::All;
  std::vector<Cx> roots;
};

inline const char* to_string(AlphaSet::Kind k) {
  switch (k) {
    case AlphaSet::Kind::All: return "all";
    case AlphaSet::Kind::Empty: return "empty";
    default: return "finite";
  }
}

struct SpanVerdict {
  bool spans = false;
  std::vector<AlphaSet> alpha_sets;
  AlphaSet intersection;
  bool some_b21_nonzero = false;
  /// spans: four products of the generators whose vectorizations are independent.
  std::vector<CxMatrix> basis;
  /// Generator indices of each basis product, leftmost factor first.
  std::vector<std::vector<int>> basis_words;
  /// Not spanning: a root shared by every alpha set (absent when the sets do not meet).
  std::optional<Cx> common_root;
  /// Dimension of the span of the product closure.
  int closure_dimension = 0;
};

// ---------------------------------------------------------------- certificate

struct Certificate {
  Verdict verdict = Verdict::Inconclusive;
  Pipeline theorem = Pipeline::Theorem1;
  std::optional<PeriodicOrbit> witness;
  Condition2 condition2;
  std::vector<NormTracePoint> norm_trace;
  Provenance provenance;
  /// Why the verdict was reached (human readable).
  std::string reason;
  /// What the injectivity evidence does and does not cover.
  std::string scope;
  std::vector<OrbitSearchStep> orbit_search;
  std::vector<PeriodSearchLog> saddle_search;
  std::optional<SpanVerdict> span;
  std::optional<CoreKind> core;
  /// Affine core only: the built-in Fock affine rule, when it applies.
  std::optional<bool> affine_rule_bounded;
};

struct CertifyOptions {
  Tolerances tol;
  /// Highest jet order for the injectivity probe and the norm trace.
  int n_max = 8;
  /// Highest period searched for a repelling or saddle orbit.
  int r_max = 6;
  /// Relative residual an orbit handed to theorem1_certificate must meet.
  double orbit_residual = 1e-8;
  bool norm_trace = true;
  std::uint64_t seed = 0x5eed;
  int saddle_starts = 4096;
};

// ---------------------------------------------------------------- norms

struct FiniteSectionNorm {
  double value = 0.0;
  int rank = 0;
  bool rank_deficient = false;
};

/// Operator norm of C_f' on span iota'(D_n) at a fixed point p: the square
/// root of the top eigenvalue of M^H G M v = mu G v on the range of G. A lower
/// bound for the norm of C_f because the subspace is invariant.
inline FiniteSectionNorm finite_section_norm(const SpaceDescriptor& space, const PolyMap& f, const CxVector& p, int n,
                                             const Tolerances& tol = {}) {
  if (!is_hilbert(space))
    throw NotHilbertError("finite_section_norm: descriptor is not a Hilbert space; use monomial_ratio_witness");
  if (f.dim_in() != space_dim(space)) throw DimensionError("finite_section_norm: space/map dimension mismatch");
  PushforwardMatrix M = pushforward_matrix(f, p, n, tol.fixed_point);
  GramMatrix G = jet_gram(space, p, n);
  const auto N = G.entries.rows();

  // Scale by the diagonal so factorial growth does not hide small directions.
  Eigen::VectorXd D = Eigen::VectorXd::Zero(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    double g = G.entries(i, i).real();
    if (g > 0.0) D(i) = 1.0 / std::sqrt(g);
  }
  CxMatrix Gs = D.cast<Cx>().asDiagonal() * G.entries * D.cast<Cx>().asDiagonal();
  Eigen::SelfAdjointEigenSolver<CxMatrix> es(Gs);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = lam.size() ? lam.maxCoeff() : 0.0;

  FiniteSectionNorm out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lmax > 0.0 && lam(i) > tol.rank_relative * lmax) keep.push_back(i);
  out.rank = static_cast<int>(keep.size());
  out.rank_deficient = out.rank < N;
  if (keep.empty()) return out;

  // Coordinates w = D^{-1} v; the pushforward becomes D^{-1} M D, zero on dead jets.
  CxMatrix Ms = CxMatrix::Zero(N, N);
  for (Eigen::Index r = 0; r < N; ++r)
    for (Eigen::Index c = 0; c < N; ++c)
      if (D(r) > 0.0 && D(c) > 0.0) Ms(r, c) = M.matrix(r, c) * (D(c) / D(r));

  const auto R = static_cast<Eigen::Index>(keep.size());
  CxMatrix U(N, R);
  Eigen::VectorXd sq(R);
  for (Eigen::Index j = 0; j < R; ++j) {
    U.col(j) = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]);
    sq(j) = std::sqrt(lam(keep[static_cast<std::size_t>(j)]));
  }
  // With Gs = L L^H, L = U diag(sq): norm = || diag(sq) U^H Ms U diag(1/sq) ||.
  CxMatrix K = sq.cast<Cx>().asDiagonal() * (U.adjoint() * Ms * U) * sq.cwiseInverse().cast<Cx>().asDiagonal();
  out.value = operator_norm(K);
  return out;
}

struct MonomialRatio {
  int n = 0;
  double ratio = 0.0;
};

struct MonomialWitness {
  std::vector<MonomialRatio> rows;
  /// Ratios nondecreasing over the second half of the table and the last one above 1.
  bool divergent = false;
};

namespace detail {

/// log ||z^m|| in the Fock space F^q_alpha (d = 1), normalized so ||1|| = 1.
inline double log_fock_monomial_norm(int m, double alpha, double q) {
  const double s = 0.5 * m * q;
  return (std::lgamma(s + 1.0) - s * std::log(0.5 * q * alpha)) / q;
}

} // namespace detail

/// ||C_f z^n|| / ||z^n|| for n = 1..N and f = c z^k, from closed-form monomial norms.
inline MonomialWitness monomial_ratio_witness(const SpaceDescriptor& space, const PolyMap& f, int N) {
  const auto* fock = std::get_if<FockSpace>(&space);
  if (!fock) throw DomainError("monomial_ratio_witness: requires a Fock descriptor");
  validate(space);
  if (fock->dim != 1 || f.dim_in() != 1 || f.dim_out() != 1)
    throw DimensionError("monomial_ratio_witness: one variable only");
  if (N < 1) throw DomainError("monomial_ratio_witness: N must be >= 1");
  const MultiPoly g = f[0].pruned(0.0);
  const auto& terms = g.terms();
  if (terms.size() != 1 || terms.begin()->first[0] < 1)
    throw DomainError("monomial_ratio_witness: unsupported map (need c z^k with k >= 1)");
  const int k = terms.begin()->first[0];
  const Cx c = terms.begin()->second;
  const double alpha = fock->alpha, q = fock->q;

  MonomialWitness out;
  for (int n = 1; n <= N; ++n) {
    // C_f z^n = c^n z^{kn}
    double ratio;
    if (q == 2.0) {
      // ||z^m||^2 = m! / alpha^m, so the ratio squared is prod_{j=n+1}^{kn} j / alpha^{(k-1)n}.
      double r2 = 1.0;
      for (int j = n + 1; j <= k * n; ++j) r2 *= j;
      ratio = std::pow(std::abs(c), n) * std::sqrt(r2) * std::pow(alpha, -0.5 * (k - 1) * n);
      if (!std::isfinite(ratio)) ratio = std::numeric_limits<double>::infinity();
    } else {
      double lr = n * std::log(std::abs(c)) + detail::log_fock_monomial_norm(k * n, alpha, q) -
                  detail::log_fock_monomial_norm(n, alpha, q);
      ratio = std::exp(lr);
    }
    out.rows.push_back({n, ratio});
  }
  bool monotone = true;
  for (std::size_t i = out.rows.size() / 2 + 1; i < out.rows.size(); ++i)
    monotone = monotone && out.rows[i].ratio >= out.rows[i - 1].ratio;
  out.divergent = monotone && out.rows.back().ratio > 1.0 + 1e-9;
  return out;
}

// ---------------------------------------------------------------- affine rule

/// Fock rule for C_{Az+b}: ||A|| <= 1 and <A zeta, b> = 0 for every zeta with |A zeta| = |zeta|.
/// alpha only enters through positivity; the rule is the same for every weight.
inline bool fock_affine_bounded(double alpha, const CxMatrix& A, const CxVector& b, double tol = 1e-9) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("fock_affine_bounded: alpha must be positive");
  if (A.rows() != A.cols() || b.size() != A.rows()) throw DimensionError("fock_affine_bounded: shape mismatch");
  if (std::abs(A.determinant()) <= 1e-12) throw DomainError("fock_affine_bounded: A is singular");
  Eigen::JacobiSVD<CxMatrix> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(0) > 1.0 + tol) return false;
  // Left singular vectors with singular value 1 span {A zeta : |A zeta| = |zeta|}.
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) >= 1.0 - tol && std::abs(svd.matrixU().col(i).dot(b)) > tol * (1.0 + b.norm())) return false;
  return true;
}

// ---------------------------------------------------------------- span check

namespace detail {

inline AlphaSet alpha_set(const CxMatrix& S, double tol = 1e-12) {
  const Cx a = S(1, 0), bq = S(0, 0) - S(1, 1), c = -S(0, 1);
  AlphaSet out;
  if (std::abs(a) <= tol) {
    if (std::abs(bq) <= tol) {
      out.kind = std::abs(c) <= tol ? AlphaSet::Kind::All : AlphaSet::Kind::Empty;
    } else {
      out.kind = AlphaSet::Kind::Finite;
      out.roots = {-c / bq};
    }
    return out;
  }
  out.kind = AlphaSet::Kind::Finite;
  Cx disc = std::sqrt(bq * bq - 4.0 * a * c);
  // Avoid cancellation: pick the sign that makes |bq + sign disc| large.
  Cx qv = std::real(std::conj(bq) * disc) >= 0.0 ? -0.5 * (bq + disc) : -0.5 * (bq - disc);
  if (std::abs(qv) == 0.0) {
    out.roots = {Cx{}, Cx{}};
  } else {
    out.roots = {qv / a, c / qv};
  }
  return out;
}

inline bool near(Cx x, Cx y, double cl) { return std::abs(x - y) <= cl * (1.0 + std::abs(x)); }

inline AlphaSet intersect(const AlphaSet& A, const AlphaSet& B, double cl) {
  if (A.kind == AlphaSet::Kind::All) return B;
  if (B.kind == AlphaSet::Kind::All) return A;
  AlphaSet out;
  out.kind = AlphaSet::Kind::Empty;
  if (A.kind == AlphaSet::Kind::Empty || B.kind == AlphaSet::Kind::Empty) return out;
  for (Cx x : A.roots) {
    bool hit = std::any_of(B.roots.begin(), B.roots.end(), [&](Cx y) { return near(x, y, cl); });
    bool dup = std::any_of(out.roots.begin(), out.roots.end(), [&](Cx y) { return near(x, y, cl); });
    if (hit && !dup) out.roots.push_back(x);
  }
  if (!out.roots.empty()) out.kind = AlphaSet::Kind::Finite;
  return out;
}

inline Eigen::Vector4cd vec4(const CxMatrix& M) { return {M(0, 0), M(1, 0), M(0, 1), M(1, 1)}; }

} // namespace detail

/// Does the semigroup generated by `mats` span M_2(C)? Decided by the root-set
/// criterion; the product closure is built alongside to produce the certificate.
inline SpanVerdict span_check_2x2(const std::vector<CxMatrix>& mats, double cluster = 1e-8) {
  if (mats.empty()) throw DomainError("span_check_2x2: empty matrix set");
  for (std::size_t i = 0; i < mats.size(); ++i) {
    if (mats[i].rows() != 2 || mats[i].cols() != 2) throw DimensionError("span_check_2x2: matrices must be 2x2");
    if (std::abs(mats[i].determinant()) <= 1e-12)
      throw DomainError("span_check_2x2: matrix " + std::to_string(i) + " is singular");
  }
  SpanVerdict v;
  AlphaSet acc;
  for (const auto& S : mats) {
    v.alpha_sets.push_back(detail::alpha_set(S));
    acc = detail::intersect(acc, v.alpha_sets.back(), cluster);
    v.some_b21_nonzero = v.some_b21_nonzero || std::abs(S(1, 0)) > 1e-12;
  }
  v.intersection = acc;
  v.spans = acc.kind == AlphaSet::Kind::Empty && v.some_b21_nonzero;

  // Greedy basis of the product closure: span(words <= L+1) = span(words <= L) * generators.
  std::vector<CxMatrix> basis;
  std::vector<std::vector<int>> words;
  Eigen::MatrixXcd V(4, 0);
  auto try_add = [&](const CxMatrix& P, std::vector<int> word) {
    if (basis.size() == 4) return false;
    Eigen::MatrixXcd W(4, V.cols() + 1);
    W << V, detail::vec4(P);
    if (numerical_rank(W, 1e-10) <= V.cols()) return false;
    V = W;
    basis.push_back(P);
    words.push_back(std::move(word));
    return true;
  };
  for (std::size_t g = 0; g < mats.size(); ++g) try_add(mats[g], {static_cast<int>(g)});
  for (std::size_t i = 0; i < basis.size() && basis.size() < 4; ++i)
    for (std::size_t g = 0; g < mats.size(); ++g) {
      auto w = words[i];
      w.push_back(static_cast<int>(g));
      try_add(basis[i] * mats[g], std::move(w));
    }
  v.closure_dimension = static_cast<int>(basis.size());
  if (v.spans) {
    if (v.closure_dimension != 4)
      throw NumericalError("span_check_2x2: root-set verdict and product closure disagree");
    v.basis = std::move(basis);
    v.basis_words = std::move(words);
  } else if (acc.kind == AlphaSet::Kind::All) {
    v.common_root = Cx{};
  } else if (acc.kind == AlphaSet::Kind::Finite) {
    v.common_root = acc.roots.front();
  }
  return v;
}

// ---------------------------------------------------------------- pipelines

namespace detail {

inline double rel_residual(const PolyMap& f, const std::vector<CxVector>& pts) {
  double res = 0.0;
  const std::size_t r = pts.size();
  for (std::size_t i = 0; i < r; ++i) {
    const CxVector& nxt = pts[(i + 1) % r];
    res = std::max(res, (f(pts[i]) - nxt).cwiseAbs().maxCoeff() / (1.0 + nxt.cwiseAbs().maxCoeff()));
  }
  return res;
}

inline CxMatrix orbit_derivative(const PolyMap& f, const CxVector& p, int r) {
  CxMatrix D = CxMatrix::Identity(p.size(), p.size());
  CxVector z = p;
  for (int i = 0; i < r; ++i) {
    D = jacobian(f, z) * D;
    z = f(z);
  }
  return D;
}

/// Newton on f^r(z) = z.
inline CxVector polish_periodic_point(const PolyMap& f, CxVector z, int r, int iters = 30) {
  const auto d = z.size();
  for (int it = 0; it < iters; ++it) {
    CxVector w = z;
    for (int i = 0; i < r; ++i) w = f(w);
    CxVector F = w - z;
    if (F.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + z.cwiseAbs().maxCoeff())) break;
    CxMatrix J = orbit_derivative(f, z, r) - CxMatrix::Identity(d, d);
    CxVector step = J.fullPivLu().solve(F);
    if (!step.allFinite()) break;
    z -= step;
  }
  return z;
}

inline PeriodicOrbit orbit_from_point(const PolyMap& f, const CxVector& p, int r, double band) {
  PeriodicOrbit o;
  o.period = r;
  CxVector z = p;
  for (int i = 0; i < r; ++i) {
    o.points.push_back(z);
    z = f(z);
  }
  o.multipliers = eigenvalues(orbit_derivative(f, p, r));
  o.stability = classify(o.multipliers, band);
  o.residual = rel_residual(f, o.points);
  return o;
}

inline bool holomorphic_family(const SpaceDescriptor& s) { return !std::holds_alternative<ShiftInvariantSpace>(s); }

} // namespace detail

/// Independence of the dual jets at p: structural shortcut, then the 1D
/// infinite-dimensional route, then Gram ranks at every n <= n_max.
inline Condition2 condition2_evidence(const SpaceDescriptor& s, const CxVector& p, int n_max, const Tolerances& tol = {}) {
  Condition2 c;
  try {
    if (auto why = structural_injectivity(s, p)) {
      c.kind = Condition2Kind::InjectiveStructural;
      c.reason = *why;
      return c;
    }
    if (!is_hilbert(s)) {
      c.reason = "non-Hilbert descriptor without a structural argument";
      return c;
    }
    if (space_dim(s) == 1 && detail::holomorphic_family(s)) {
      DimensionVerdict dv = infinite_dimensionality(s, p, std::max(n_max, 2), tol.rank_relative);
      if (dv.structural.rfind("infinite", 0) == 0) {
        c.kind = Condition2Kind::InjectiveStructural;
        c.reason = "one variable, infinite-dimensional holomorphic space: dual jets are independent (" +
                   dv.structural + ")";
        return c;
      }
    }
    for (int n = 1; n <= n_max; ++n) {
      c.probed.push_back(n);
      InjectivityVerdict v = numerical_injectivity(s, p, n, tol.rank_relative);
      if (v.status != InjectivityStatus::Injective) {
        c.reason = "jet Gram rank " + std::to_string(v.rank) + " < " + std::to_string(v.expected) + " at n = " +
                   std::to_string(n) + ": " + v.reason;
        return c;
      }
    }
    c.kind = Condition2Kind::InjectiveNumerical;
    c.reason = "jet Gram matrix has full numerical rank for n = 1.." + std::to_string(n_max);
  } catch (const DomainError& e) {
    c.kind = Condition2Kind::Unknown;
    c.probed.clear();
    c.reason = std::string("witness point outside the space's domain: ") + e.what();
  }
  return c;
}

namespace detail {

inline Provenance provenance_of(const CertifyOptions& o) {
  Provenance p;
  p.seed = o.seed;
  p.tolerances = o.tol;
  p.r_max = o.r_max;
  p.n_max = o.n_max;
  return p;
}

inline void attach_norm_trace(Certificate& cert, const SpaceDescriptor& s, const PolyMap& f, const PeriodicOrbit& o,
                              const CertifyOptions& opt) {
  if (!opt.norm_trace || !is_hilbert(s)) return;
  try {
    PolyMap fr = iterate(f, o.period);
    for (int n = 1; n <= opt.n_max; ++n) {
      FiniteSectionNorm v = finite_section_norm(s, fr, o.points[0], n, opt.tol);
      cert.norm_trace.push_back({n, v.value, v.rank_deficient});
    }
  } catch (const Error&) {
    // The trace is supporting evidence only; a failed Gram leaves it short.
  }
}

} // namespace detail

inline const char* kWitnessScope =
    "dual-jet independence is checked at the witness point only, for the probed orders";

/// Contrapositive use of the jet argument: a multiplier outside the unit disc
/// at a periodic point, plus independent dual jets there, rules out bounded C_f.
inline Certificate theorem1_certificate(const SpaceDescriptor& space, const PolyMap& f, const PeriodicOrbit& orbit,
                                        const CertifyOptions& opt = {}) {
  validate(space);
  if (!f.is_square() || f.dim_in() != space_dim(space))
    throw DimensionError("theorem1_certificate: space/map dimension mismatch");
  if (orbit.points.empty() || static_cast<int>(orbit.points.size()) != orbit.period)
    throw DomainError("theorem1_certificate: orbit must list one point per step of its period");
  for (const auto& pt : orbit.points)
    if (pt.size() != f.dim_in()) throw DimensionError("theorem1_certificate: orbit point dimension mismatch");
  double res = detail::rel_residual(f, orbit.points);
  if (!(res <= opt.orbit_residual))
    throw NumericalError("theorem1_certificate: orbit residual " + std::to_string(res) + " exceeds " +
                         std::to_string(opt.orbit_residual));

  Certificate cert;
  cert.theorem = Pipeline::Theorem1;
  cert.provenance = detail::provenance_of(opt);
  cert.scope = kWitnessScope;
  PeriodicOrbit w = detail::orbit_from_point(f, orbit.points[0], orbit.period, opt.tol.stability_band);
  w.points = orbit.points;
  w.residual = res;
  cert.witness = w;

  const double band = opt.tol.stability_band;
  const bool expanding = w.max_multiplier_modulus() > 1.0 + band;
  cert.condition2 = condition2_evidence(space, w.points[0], opt.n_max, opt.tol);
  if (!expanding) {
    cert.verdict = Verdict::NoObstruction;
    cert.reason = "every multiplier has modulus <= 1 + band; the jet argument gives no obstruction";
  } else if (cert.condition2.kind == Condition2Kind::Unknown) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "expanding multiplier found but dual-jet independence is not established: " + cert.condition2.reason;
  } else {
    cert.verdict = Verdict::Unbounded;
    cert.reason = "multiplier of modulus " + std::to_string(w.max_multiplier_modulus()) +
                  " at a period-" + std::to_string(w.period) + " point with independent dual jets";
  }
  detail::attach_norm_trace(cert, space, f, w, opt);
  return cert;
}

/// One-variable pipeline: bounded C_f forces f affine with |a| <= 1 on an
/// infinite-dimensional space, so anything else needs a repelling witness.
inline Certificate affine_only_1d(const SpaceDescriptor& space, const PolyMap& f, const CertifyOptions& opt = {}) {
  validate(space);
  if (space_dim(space) != 1 || f.dim_in() != 1 || f.dim_out() != 1)
    throw DimensionError("affine_only_1d: one-variable space and map required");

  Certificate cert;
  cert.theorem = Pipeline::Affine1D;
  cert.provenance = detail::provenance_of(opt);
  cert.scope = kWitnessScope;

  // The dimension probe (structural when available, else Gram ranks at 0).
  bool infinite = std::holds_alternative<FockSpace>(space);
  std::string dim_note = infinite ? "infinite: polynomials are dense in the Fock space" : "";
  if (!infinite) {
    DimensionVerdict dv = infinite_dimensionality(space, CxVector::Zero(1), std::max(opt.n_max, 2), opt.tol.rank_relative);
    dim_note = dv.structural.empty() ? std::string("numerical: ") + to_string(dv.kind) : dv.structural;
    infinite = dv.structural.rfind("infinite", 0) == 0 ||
               (dv.structural.empty() && dv.kind == DimensionKind::InfiniteDimensional);
  }
  if (!infinite) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "space does not pass the infinite-dimensionality probe (" + dim_note + ")";
    return cert;
  }
  Condition2 c2;
  c2.kind = Condition2Kind::InjectiveStructural;
  c2.reason = "one variable, infinite-dimensional space (" + dim_note + "): dual jets are independent";

  const double band = opt.tol.stability_band;
  if (f.degree() <= 1) {
    Cx a = f[0].coeff({1}), b = f[0].coeff({0});
    if (std::abs(a) <= 1.0 + band) {
      cert.verdict = Verdict::NoObstruction;
      cert.reason = "affine map with |a| = " + std::to_string(std::abs(a)) + " <= 1";
      return cert;
    }
    CxVector p = CxVector::Constant(1, b / (1.0 - a));
    cert.witness = detail::orbit_from_point(f, p, 1, band);
    cert.condition2 = c2;
    cert.verdict = Verdict::Unbounded;
    cert.reason = "affine map with |a| = " + std::to_string(std::abs(a)) + " > 1: repelling fixed point";
    detail::attach_norm_trace(cert, space, f, *cert.witness, opt);
    return cert;
  }

  for (int r = 1; r <= opt.r_max; ++r) {
    std::vector<PeriodicOrbit> orbits;
    try {
      orbits = periodic_points_1d(f, r, band, opt.tol.root_cluster);
    } catch (const DomainError&) {
      break;  // degree^r too large to solve
    }
    OrbitSearchStep step{r, static_cast<int>(orbits.size()), 0};
    const PeriodicOrbit* hit = nullptr;
    for (const auto& o : orbits)
      if (o.stability == Stability::Repelling) {
        ++step.repelling;
        if (!hit) hit = &o;
      }
    cert.orbit_search.push_back(step);
    if (hit) {
      cert.witness = *hit;
      cert.condition2 = c2;
      cert.verdict = Verdict::Unbounded;
      cert.reason = "degree " + std::to_string(f.degree()) + " map with a repelling period-" + std::to_string(r) +
                    " orbit (multiplier modulus " + std::to_string(hit->max_multiplier_modulus()) + ")";
      detail::attach_norm_trace(cert, space, f, *hit, opt);
      return cert;
    }
  }
  cert.verdict = Verdict::Inconclusive;
  cert.reason = "no repelling orbit found up to period " + std::to_string(opt.r_max);
  return cert;
}

/// Default G_2 probe for Fock spaces: contractions spanning M_2, one with b21 != 0.
inline std::vector<CxMatrix> default_fock_probe() {
  CxMatrix a(2, 2), b(2, 2), c(2, 2), d(2, 2);
  a << 0.5, 0.0, 0.0, 0.5;
  b << 0.5, 0.0, 0.0, 0.25;
  c << 0.5, 0.25, 0.0, 0.5;
  d << 0.5, 0.0, 0.25, 0.5;
  return {a, b, c, d};
}

/// Plane automorphisms: reduce the word, then look for a saddle of the Henon core.
/// An empty probe means "use the built-in Fock probe" (Fock only).
inline Certificate polyaut_2d_certificate(const SpaceDescriptor& space, const AutWord& w,
                                          std::vector<CxMatrix> probe = {}, const CertifyOptions& opt = {}) {
  validate(space);
  validate(w);
  if (space_dim(space) != 2) throw DimensionError("polyaut_2d_certificate: space must be two-dimensional");
  const auto* fock = std::get_if<FockSpace>(&space);
  if (probe.empty()) {
    if (!fock) throw DomainError("polyaut_2d_certificate: non-Fock spaces must supply a G_2 probe");
    probe = default_fock_probe();
  } else if (fock) {
    for (std::size_t i = 0; i < probe.size(); ++i)
      if (!fock_affine_bounded(fock->alpha, probe[i], CxVector::Zero(2)))
        throw DomainError("polyaut_2d_certificate: probe matrix " + std::to_string(i) +
                          " fails the Fock affine rule");
  }
  SpanVerdict span = span_check_2x2(probe, opt.tol.root_cluster);

  ReducedForm red = reduce_word(w);
  if (!(red.relation_residual <= opt.tol.relation))
    throw NumericalError("polyaut_2d_certificate: word reduction residual " + std::to_string(red.relation_residual));

  Certificate cert;
  cert.theorem = Pipeline::PolyAut2D;
  cert.provenance = detail::provenance_of(opt);
  cert.scope = kWitnessScope;
  cert.span = span;
  cert.core = red.kind;

  if (red.kind == CoreKind::Affine) {
    const auto& a = std::get<AffineLetter>(*red.single);
    if (fock) cert.affine_rule_bounded = fock_affine_bounded(fock->alpha, a.A, a.t);
    cert.verdict = Verdict::NoObstruction;
    cert.reason = "conjugate to an affine map; the saddle argument does not apply";
    return cert;
  }
  if (red.kind == CoreKind::ElementaryLike) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = span.spans ? "conjugate to an elementary (triangular) map; outside the Henon branch"
                             : "conjugate to an elementary (triangular) map, and the G_2 probe does not span M_2";
    return cert;
  }

  SaddleSearchParams sp;
  sp.starts = opt.saddle_starts;
  sp.seed = opt.seed;
  sp.newton_residual = opt.tol.newton_residual;
  sp.dedup = opt.tol.orbit_dedup;
  sp.band = opt.tol.stability_band;
  sp.stop_at_first = true;
  SaddleSearchResult found = saddle_search_2d(red.henon, std::min(opt.r_max, 8), sp);
  cert.saddle_search = found.log;
  const PeriodicOrbit* s = found.first_saddle();
  if (!s) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "no saddle or repelling orbit of the Henon core up to period " + std::to_string(std::min(opt.r_max, 8));
    return cert;
  }

  // Pull the orbit back: core o C = C o f, so C^{-1} maps core orbits to orbits of f.
  PolyMap f = word_to_polymap(w);
  PolyMap Cinv = word_to_polymap(inverse(red.conjugator));
  CxVector p = detail::polish_periodic_point(f, Cinv(s->points[0]), s->period);
  PeriodicOrbit orb = detail::orbit_from_point(f, p, s->period, opt.tol.stability_band);
  detail::canonical_rotation(orb.points);

  Certificate t1 = theorem1_certificate(space, f, orb, opt);
  cert.witness = t1.witness;
  cert.condition2 = t1.condition2;
  cert.norm_trace = t1.norm_trace;
  cert.verdict = t1.verdict;
  cert.reason = "Henon core (" + std::to_string(red.henon.size()) + " letters): " + t1.reason;
  return cert;
}

} // namespace kgate
