#pragma once

// Words in the generators of the plane polynomial automorphism group and their
// reduction to a conjugate of a Henon composition.
//
// Letters:
//   Affine(A, t)          z -> A z + t
//   Elementary(P, a, b, c) (x, y) -> (a x + P(y), b y + c)
//   Henon(Q, b)            (x, y) -> (Q(x) - b y, x)  =  Elementary(Q, -b, 1, 0) o swap
// A word [L0, L1, ..., Lk] is the map L0 o L1 o ... o Lk (last letter applied first).
//
// Reduction rules (all exact rewrites; the final relation is also checked on
// coefficients):
//   1. Expand Henon letters; classify letters as A (affine, A(1,0) != 0),
//      E (elementary, deg P >= 2) or S (triangular affine: in both groups).
//   2. Fold S letters into a neighbour and merge equal-type neighbours until the
//      word alternates.
//   3. While first and last letter have the same type, conjugate by the last
//      letter (it moves to the front and merges); record it in the conjugator.
//   4. Length 0 or a single A/S: core Affine. Single E: core ElementaryLike.
//   5. Even alternating words: split each A = T o swap o R (T, R triangular,
//      translation kept in T), rotate so that every swap is preceded by an
//      elementary F_i, and set G_i = F_i o swap = (P_i(x) + a_i y, b_i x + c_i).
//      With U_i = (x, u_i y + v_i), u_{i-1} = 1/b_i, v_{i-1} = -c_i/b_i (cyclic):
//        U_{i-1} o G_i o U_i^{-1} = Henon(P_i - a_i v_i / u_i, -a_i / u_i).
//
// The conjugator C satisfies  core = C o input o C^{-1}.

#include <optional>
#include <variant>

#include "koopman_gate/algebra/poly.hpp"

namespace kgate {

struct AffineLetter {
  CxMatrix A;
  CxVector t;
};

struct ElementaryLetter {
  MultiPoly P{1};
  Cx a = 1.0, b = 1.0, c = 0.0;
};

struct HenonLetter {
  MultiPoly Q{1};
  Cx b = 1.0;
};

using Letter = std::variant<AffineLetter, ElementaryLetter, HenonLetter>;

struct AutWord {
  std::vector<Letter> letters;
};

inline AffineLetter affine_identity() { return {CxMatrix::Identity(2, 2), CxVector::Zero(2)}; }

inline AffineLetter swap_letter() {
  CxMatrix S(2, 2);
  S << 0.0, 1.0, 1.0, 0.0;
  return {S, CxVector::Zero(2)};
}

inline void validate(const Letter& L) {
  if (const auto* a = std::get_if<AffineLetter>(&L)) {
    if (a->A.rows() != 2 || a->A.cols() != 2 || a->t.size() != 2) throw DimensionError("affine letter: shape must be 2x2 / 2");
    if (std::abs(a->A.determinant()) <= 1e-12) throw DomainError("affine letter: A is singular");
  } else if (const auto* e = std::get_if<ElementaryLetter>(&L)) {
    if (e->P.dim() != 1) throw DimensionError("elementary letter: P must be univariate");
    if (e->a == Cx{} || e->b == Cx{}) throw DomainError("elementary letter: a*b must be nonzero");
  } else {
    const auto& h = std::get<HenonLetter>(L);
    if (h.Q.dim() != 1) throw DimensionError("henon letter: Q must be univariate");
    if (h.Q.degree() < 2) throw DomainError("henon letter: deg Q must be >= 2");
    if (h.b == Cx{}) throw DomainError("henon letter: b must be nonzero");
  }
}

inline void validate(const AutWord& w) {
  for (const auto& L : w.letters) validate(L);
}

inline PolyMap letter_to_polymap(const Letter& L) {
  const MultiPoly x = MultiPoly::variable(2, 0), y = MultiPoly::variable(2, 1);
  PolyMap only_y(2, {y});
  PolyMap only_x(2, {x});
  if (const auto* a = std::get_if<AffineLetter>(&L)) return PolyMap::affine(a->A, a->t);
  if (const auto* e = std::get_if<ElementaryLetter>(&L))
    return PolyMap(2, {x * e->a + compose(e->P, only_y), y * e->b + MultiPoly::constant(2, e->c)});
  const auto& h = std::get<HenonLetter>(L);
  return PolyMap(2, {compose(h.Q, only_x) - y * h.b, x});
}

inline PolyMap word_to_polymap(const AutWord& w) {
  validate(w);
  PolyMap f = PolyMap::identity(2);
  for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it) f = poly_compose(letter_to_polymap(*it), f);
  return f;
}

namespace detail {

// Inverse of an affine or elementary letter.
inline Letter invert_letter(const Letter& L) {
  if (const auto* a = std::get_if<AffineLetter>(&L)) {
    CxMatrix Ai = a->A.inverse();
    return AffineLetter{Ai, -Ai * a->t};
  }
  const auto& e = std::get<ElementaryLetter>(L);
  // y = (y' - c)/b, x = (x' - P((y' - c)/b)) / a
  MultiPoly shifted = compose(e.P, PolyMap(1, {MultiPoly::univariate(std::vector<Cx>{-e.c / e.b, 1.0 / e.b})}));
  return ElementaryLetter{shifted * (-1.0 / e.a), 1.0 / e.a, 1.0 / e.b, -e.c / e.b};
}

} // namespace detail

inline AutWord expand_henon(const AutWord& w) {
  AutWord out;
  for (const auto& L : w.letters) {
    if (const auto* h = std::get_if<HenonLetter>(&L)) {
      out.letters.push_back(ElementaryLetter{h->Q, -h->b, 1.0, 0.0});
      out.letters.push_back(swap_letter());
    } else {
      out.letters.push_back(L);
    }
  }
  return out;
}

inline AutWord inverse(const AutWord& w) {
  validate(w);
  AutWord e = expand_henon(w), out;
  for (auto it = e.letters.rbegin(); it != e.letters.rend(); ++it) out.letters.push_back(detail::invert_letter(*it));
  return out;
}

enum class CoreKind { Affine, Henon, ElementaryLike };

inline const char* to_string(CoreKind k) {
  switch (k) {
    case CoreKind::Affine: return "affine";
    case CoreKind::Henon: return "henon";
    default: return "elementary_like";
  }
}

struct ReducedForm {
  AutWord conjugator;
  CoreKind kind = CoreKind::Affine;
  /// Henon letters (kind == Henon), outermost first.
  std::vector<HenonLetter> henon;
  /// The single merged letter (kind Affine / ElementaryLike).
  std::optional<Letter> single;
  /// Coefficient deviation of  conjugator o input  vs  core o conjugator, relative to max(1, max coefficient).
  double relation_residual = 0.0;

  AutWord core_word() const {
    AutWord w;
    if (kind == CoreKind::Henon) {
      for (const auto& h : henon) w.letters.push_back(h);
    } else if (single) {
      w.letters.push_back(*single);
    }
    return w;
  }
};

namespace detail {

enum class LetterType { A, E, S };

inline bool is_zero(Cx z, double tol = 0.0) { return std::abs(z) <= tol; }

inline LetterType letter_type(const Letter& L) {
  if (const auto* a = std::get_if<AffineLetter>(&L))
    return is_zero(a->A(1, 0), 1e-13 * a->A.cwiseAbs().maxCoeff()) ? LetterType::S : LetterType::A;
  const auto& e = std::get<ElementaryLetter>(L);
  return e.P.degree() >= 2 ? LetterType::E : LetterType::S;
}

inline ElementaryLetter as_elementary(const Letter& L) {
  if (const auto* e = std::get_if<ElementaryLetter>(&L)) return *e;
  const auto& a = std::get<AffineLetter>(L);
  // (A00 x + A01 y + t0, A11 y + t1)
  return {MultiPoly::univariate(std::vector<Cx>{a.t(0), a.A(0, 1)}), a.A(0, 0), a.A(1, 1), a.t(1)};
}

inline AffineLetter as_affine(const Letter& L) {
  if (const auto* a = std::get_if<AffineLetter>(&L)) return *a;
  const auto& e = std::get<ElementaryLetter>(L);
  CxMatrix A(2, 2);
  A << e.a, e.P.coeff({1}), 0.0, e.b;
  CxVector t(2);
  t << e.P.coeff({0}), e.c;
  return {A, t};
}

/// outer o inner for elementary letters.
inline ElementaryLetter compose_elementary(const ElementaryLetter& o, const ElementaryLetter& i) {
  // o(i(x, y)) = (o.a (i.a x + i.P(y)) + o.P(i.b y + i.c), o.b (i.b y + i.c) + o.c)
  MultiPoly shifted = compose(o.P, PolyMap(1, {MultiPoly::univariate(std::vector<Cx>{i.c, i.b})}));
  MultiPoly P = i.P * o.a + shifted;
  // Cancelled leading terms (e.g. e o e^{-1}) must not leave float dust behind.
  P = P.pruned(1e-13 * std::max(1.0, P.max_abs_coeff()));
  return {P, o.a * i.a, o.b * i.b, o.b * i.c + o.c};
}

inline AffineLetter compose_affine(const AffineLetter& o, const AffineLetter& i) {
  CxMatrix A = o.A * i.A;
  if (std::abs(A(1, 0)) <= 1e-13 * A.cwiseAbs().maxCoeff()) A(1, 0) = 0.0;
  return {A, o.A * i.t + o.t};
}

/// outer o inner, where both letters share a group (S merges with anything).
inline Letter merge(const Letter& o, const Letter& i) {
  LetterType to = letter_type(o), ti = letter_type(i);
  if (to == LetterType::A || ti == LetterType::A) return compose_affine(as_affine(o), as_affine(i));
  if (to == LetterType::E || ti == LetterType::E) return compose_elementary(as_elementary(o), as_elementary(i));
  return compose_affine(as_affine(o), as_affine(i));
}

/// Steps 1-2: alternate A/E letters with no S letters (unless the word is a single S letter).
inline std::vector<Letter> normalize(std::vector<Letter> w) {
  bool changed = true;
  while (changed && w.size() > 1) {
    changed = false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      LetterType a = letter_type(w[i]), b = letter_type(w[i + 1]);
      if (a == LetterType::S || b == LetterType::S || a == b) {
        w[i] = merge(w[i], w[i + 1]);
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        changed = true;
        break;
      }
    }
  }
  return w;
}

inline bool is_identity(const Letter& L, double tol = 1e-15) {
  const auto* a = std::get_if<AffineLetter>(&L);
  if (!a) return false;
  return (a->A - CxMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= tol && a->t.cwiseAbs().maxCoeff() <= tol;
}

} // namespace detail

inline ReducedForm reduce_word(const AutWord& input) {
  validate(input);
  using detail::LetterType;
  ReducedForm out;
  auto finish = [&]() {
    // Relation check:  C o input  ==  core o C.
    PolyMap f = word_to_polymap(input);
    PolyMap C = word_to_polymap(out.conjugator);
    PolyMap core = word_to_polymap(out.core_word());
    PolyMap lhs = poly_compose(C, f), rhs = poly_compose(core, C);
    double scale = std::max({1.0, lhs.max_abs_coeff(), rhs.max_abs_coeff()});
    out.relation_residual = max_coeff_difference(lhs, rhs) / scale;
    return out;
  };
  // A word of Henon letters is already its own core.
  if (!input.letters.empty() &&
      std::all_of(input.letters.begin(), input.letters.end(),
                  [](const Letter& l) { return std::holds_alternative<HenonLetter>(l); })) {
    out.kind = CoreKind::Henon;
    for (const auto& l : input.letters) out.henon.push_back(std::get<HenonLetter>(l));
    return finish();
  }
  std::vector<Letter> w = detail::normalize(expand_henon(input).letters);
  std::vector<Letter> conj;  // outermost first

  // Step 3: cyclic reduction.
  while (w.size() >= 2 && detail::letter_type(w.front()) == detail::letter_type(w.back())) {
    Letter last = w.back();
    w.pop_back();
    w.front() = detail::merge(last, w.front());
    conj.insert(conj.begin(), last);
    w = detail::normalize(std::move(w));
  }

  if (w.empty()) {
    out.kind = CoreKind::Affine;
    out.single = affine_identity();
  } else if (w.size() == 1) {
    LetterType t = detail::letter_type(w[0]);
    if (t == LetterType::E) {
      out.kind = CoreKind::ElementaryLike;
      out.single = w[0];
    } else {
      out.kind = CoreKind::Affine;
      out.single = detail::as_affine(w[0]);
    }
  } else {
    // Step 5. Bruhat split of every A letter: A = T o swap o R.
    struct Split {
      ElementaryLetter T, R;
    };
    auto split = [](const AffineLetter& a) {
      Cx p = a.A(0, 0), q = a.A(0, 1), r = a.A(1, 0), t = a.A(1, 1);
      Cx det = p * t - q * r;
      CxMatrix T(2, 2), R(2, 2);
      T << -det / r, p, 0.0, r;
      R << 1.0, t / r, 0.0, 1.0;
      return Split{detail::as_elementary(AffineLetter{T, a.t}), detail::as_elementary(AffineLetter{R, CxVector::Zero(2)})};
    };
    const bool starts_with_e = detail::letter_type(w.front()) == LetterType::E;
    const std::size_t k = w.size() / 2;
    std::vector<ElementaryLetter> E;
    std::vector<Split> S;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (detail::letter_type(w[i]) == LetterType::E) E.push_back(std::get<ElementaryLetter>(w[i]));
      else S.push_back(split(std::get<AffineLetter>(w[i])));
    }
    std::vector<ElementaryLetter> F(k);
    std::vector<Letter> pre;  // conjugating letters, outermost first
    if (starts_with_e) {
      // E1 T1 s R1 E2 T2 s R2 ... Ek Tk s Rk, conjugated by Rk.
      for (std::size_t i = 0; i < k; ++i) {
        const ElementaryLetter& Rprev = S[(i + k - 1) % k].R;
        F[i] = detail::compose_elementary(detail::compose_elementary(Rprev, E[i]), S[i].T);
      }
      pre.push_back(S[k - 1].R);
    } else {
      // T1 s R1 E1 T2 s ... Tk s Rk Ek, conjugated by T1^{-1} then swap.
      for (std::size_t i = 0; i < k; ++i)
        F[i] = detail::compose_elementary(detail::compose_elementary(S[i].R, E[i]), S[(i + 1) % k].T);
      pre.push_back(swap_letter());
      pre.push_back(detail::invert_letter(Letter{S[0].T}));
    }
    // G_i = F_i o swap = (P_i(x) + a_i y, b_i x + c_i); normalize with U_i = (x, u_i y + v_i).
    std::vector<Cx> u(k), v(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t prev = (i + k - 1) % k;
      u[prev] = 1.0 / F[i].b;
      v[prev] = -F[i].c / F[i].b;
    }
    for (std::size_t i = 0; i < k; ++i) {
      HenonLetter h;
      h.Q = F[i].P - MultiPoly::constant(1, F[i].a * v[i] / u[i]);
      h.b = -F[i].a / u[i];
      out.henon.push_back(h);
    }
    CxMatrix Uk(2, 2);
    Uk << 1.0, 0.0, 0.0, u[k - 1];
    CxVector ut(2);
    ut << 0.0, v[k - 1];
    pre.insert(pre.begin(), AffineLetter{Uk, ut});
    conj.insert(conj.begin(), pre.begin(), pre.end());
    out.kind = CoreKind::Henon;
  }

  for (const auto& L : conj)
    if (!detail::is_identity(L)) out.conjugator.letters.push_back(L);
  return finish();
}

} // namespace kgate
