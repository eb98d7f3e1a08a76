#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "koopman_gate/algebra/linalg.hpp"
#include "koopman_gate/algebra/poly.hpp"
#include "koopman_gate/algebra/roots.hpp"
#include "test_util.hpp"

using namespace kgate;
using kgate::testing::Rng;
using kgate::testing::upoly;

namespace {

CxVector vec(std::initializer_list<Cx> v) {
  CxVector z(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (Cx c : v) z(i++) = c;
  return z;
}

// h_{Q,b}(x, y) = (Q(x) - b y, x)
PolyMap henon(const MultiPoly& Q, Cx b) {
  PolyMap embed(2, {MultiPoly::variable(2, 0)});
  MultiPoly first = compose(Q, embed) - MultiPoly::variable(2, 1) * b;
  return PolyMap(2, {first, MultiPoly::variable(2, 0)});
}

} // namespace

TEST(PolyEval, Examples) {
  MultiPoly sq = MultiPoly::monomial({2});
  EXPECT_EQ(poly_eval(sq, vec({3.0})), Cx(9.0));

  MultiPoly p = MultiPoly::monomial({1, 1}) + MultiPoly::constant(2, 1.0);
  EXPECT_EQ(poly_eval(p, vec({2.0, 5.0})), Cx(11.0));

  MultiPoly q = MultiPoly::monomial({1}, Cx(1, 1));
  EXPECT_NEAR(std::abs(poly_eval(q, vec({Cx(1, -1)})) - Cx(2.0)), 0.0, 1e-15);
}

TEST(PolyEval, DimensionMismatchThrows) {
  MultiPoly p = MultiPoly::monomial({1, 1});
  EXPECT_THROW(poly_eval(p, vec({1.0})), DimensionError);
}

TEST(MultiPoly, ZeroCoefficientsAreNotStored) {
  MultiPoly p = MultiPoly::monomial({1}) - MultiPoly::monomial({1});
  EXPECT_TRUE(p.is_zero());
  MultiPoly q(2);
  q.add_term({1, 0}, 0.0);
  EXPECT_TRUE(q.terms().empty());
  EXPECT_THROW(q.add_term({1}, 1.0), DimensionError);
}

TEST(PolyCompose, SquareOfShift) {
  PolyMap f(1, {MultiPoly::monomial({2})});
  PolyMap g(1, {upoly({1.0, 1.0})});
  PolyMap h = poly_compose(f, g);
  EXPECT_EQ(h[0], upoly({1.0, 2.0, 1.0}));
}

TEST(PolyCompose, IdentityLeavesMapUnchanged) {
  Rng rng(11);
  PolyMap g = rng.map_fixing_origin(2, 3);
  EXPECT_EQ(poly_compose(PolyMap::identity(2), g), g);
}

TEST(PolyCompose, HenonSquaredAgreesPointwise) {
  PolyMap h = henon(MultiPoly::monomial({2}), 1.0);
  PolyMap hh = poly_compose(h, h);
  EXPECT_EQ(hh.degree(), 4);
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    CxVector z = rng.point(2, 1.5);
    worst = std::max(worst, (hh(z) - h(h(z))).norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(PolyCompose, DimensionMismatchThrows) {
  PolyMap f(1, {MultiPoly::monomial({2})});
  PolyMap g = PolyMap::identity(2);
  EXPECT_THROW(poly_compose(f, g), DimensionError);
}

TEST(PolyCompose, AssociativityProperty) {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    int d = rng.integer(1, 3);
    auto random_map = [&] {
      std::vector<MultiPoly> comps;
      for (int m = 0; m < d; ++m) comps.push_back(rng.poly(d, rng.integer(1, 3), 0.8));
      return PolyMap(d, std::move(comps));
    };
    // Keep total degree manageable for d = 3.
    PolyMap f = random_map(), g = random_map(), h = random_map();
    if (d == 3 && f.degree() * g.degree() * h.degree() > 12) continue;
    PolyMap left = poly_compose(poly_compose(f, g), h);
    PolyMap right = poly_compose(f, poly_compose(g, h));
    double scale = std::max(1.0, left.max_abs_coeff());
    EXPECT_LT(max_coeff_difference(left, right) / scale, 1e-9) << "trial " << trial;
  }
}

TEST(Jacobian, Examples) {
  PolyMap sq(1, {MultiPoly::monomial({2})});
  EXPECT_NEAR(std::abs(jacobian(sq, vec({1.0}))(0, 0) - Cx(2.0)), 0.0, 1e-15);

  MultiPoly Q = upoly({0.3, -1.0, 2.0, 1.0}); // 0.3 - x + 2x^2 + x^3
  Cx b(0.5, -0.25);
  PolyMap h = henon(Q, b);
  Cx x0(0.7, 0.2);
  CxMatrix J = jacobian(h, vec({x0, Cx(-1.3, 0.4)}));
  Cx dQ = -1.0 + 4.0 * x0 + 3.0 * x0 * x0;
  EXPECT_NEAR(std::abs(J(0, 0) - dQ), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(J(0, 1) + b), 0.0, 1e-15);
  EXPECT_EQ(J(1, 0), Cx(1.0));
  EXPECT_EQ(J(1, 1), Cx(0.0));

  Rng rng(3);
  CxMatrix A = rng.matrix(3, 3);
  PolyMap lin = PolyMap::affine(A, CxVector::Zero(3));
  EXPECT_LT((jacobian(lin, rng.point(3)) - A).norm(), 1e-15);
}

TEST(Jacobian, ChainRuleProperty) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    int d = rng.integer(1, 3);
    std::vector<MultiPoly> fc, gc;
    for (int m = 0; m < d; ++m) {
      fc.push_back(rng.poly(d, 2));
      gc.push_back(rng.poly(d, 2));
    }
    PolyMap f(d, fc), g(d, gc);
    CxVector p = rng.point(d);
    CxMatrix lhs = jacobian(poly_compose(f, g), p);
    CxMatrix rhs = jacobian(f, g(p)) * jacobian(g, p);
    EXPECT_LT((lhs - rhs).norm(), 1e-9 * std::max(1.0, rhs.norm()));
  }
}

TEST(Roots, SimpleQuadratic) {
  auto roots = roots_univariate(upoly({0.0, -1.0, 1.0})); // z^2 - z
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_NEAR(std::abs(roots[0].value), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(roots[1].value - Cx(1.0)), 0.0, 1e-14);
  EXPECT_EQ(roots[0].multiplicity, 1);
  EXPECT_EQ(roots[1].multiplicity, 1);
}

TEST(Roots, DoubleRoot) {
  auto roots = roots_univariate(upoly({4.0, -4.0, 1.0})); // (z-2)^2
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_NEAR(std::abs(roots[0].value - Cx(2.0)), 0.0, 1e-10);
  EXPECT_EQ(roots[0].multiplicity, 2);
}

TEST(Roots, TripleRootRecovered) {
  auto roots = roots_univariate(upoly({-1.0, 3.0, -3.0, 1.0})); // (z-1)^3
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_EQ(roots[0].multiplicity, 3);
  EXPECT_NEAR(std::abs(roots[0].value - Cx(1.0)), 0.0, 1e-9);
}

TEST(Roots, CubeRootsOfUnity) {
  auto roots = roots_univariate(upoly({-1.0, 0.0, 0.0, 1.0}));
  ASSERT_EQ(roots.size(), 3u);
  const double s3 = std::sqrt(3.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::abs(roots[i].value), 1.0, 1e-12);
    for (std::size_t j = i + 1; j < 3; ++j)
      EXPECT_NEAR(std::abs(roots[i].value - roots[j].value), s3, 1e-9);
  }
}

TEST(Roots, Errors) {
  EXPECT_THROW(roots_univariate(MultiPoly(1)), DomainError);
  EXPECT_THROW(roots_univariate(MultiPoly::constant(1, 3.0)), DomainError);
  EXPECT_THROW(roots_univariate(MultiPoly::monomial({1, 1})), DimensionError);
}

TEST(Roots, VietaAndResidualProperty) {
  Rng rng(31337);
  for (int trial = 0; trial < 40; ++trial) {
    int deg = rng.integer(1, 12);
    std::vector<Cx> c(static_cast<std::size_t>(deg) + 1);
    for (auto& v : c) v = rng.complex(2.0);
    if (std::abs(c.back()) < 0.1) c.back() = 1.0;
    auto roots = roots_from_coefficients(c);
    int total = 0;
    Cx prod = 1.0;
    for (const auto& r : roots) {
      total += r.multiplicity;
      for (int k = 0; k < r.multiplicity; ++k) prod *= r.value;
    }
    EXPECT_EQ(total, deg);
    // prod(roots) * lead = (-1)^deg * c0
    Cx lhs = prod * c.back();
    Cx rhs = (deg % 2 == 0 ? 1.0 : -1.0) * c.front();
    EXPECT_LT(std::abs(lhs - rhs), 1e-8 * std::max(1.0, std::abs(rhs)));

    double norm = 0.0;
    for (Cx v : c) norm = std::max(norm, std::abs(v));
    MultiPoly p = MultiPoly::univariate(c);
    for (const auto& r : roots) {
      double bound = 1e-12 * std::pow(1.0 + std::abs(r.value), deg) * norm;
      EXPECT_LT(std::abs(p(CxVector::Constant(1, r.value))), bound) << "deg " << deg;
    }
  }
}

TEST(Eigenvalues, QuadraticExample) {
  CxMatrix M(2, 2);
  M << 3.0, -0.5, 1.0, 0.0;
  auto ev = eigenvalues(M);
  ASSERT_EQ(ev.size(), 2u);
  const double s7 = std::sqrt(7.0);
  EXPECT_NEAR(std::abs(ev[0] - Cx((3.0 - s7) / 2.0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(ev[1] - Cx((3.0 + s7) / 2.0)), 0.0, 1e-12);
  EXPECT_NEAR(ev[1].real(), 2.82288, 1e-5);
}

TEST(Eigenvalues, IdentityAndDiagonal) {
  auto ev = eigenvalues(CxMatrix::Identity(2, 2));
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(std::abs(ev[0] - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(ev[1] - 1.0), 0.0, 1e-12);

  CxMatrix D = CxMatrix::Zero(2, 2);
  D(0, 0) = Cx(0.5, 1.0);
  D(1, 1) = Cx(-2.0, 0.0);
  ev = eigenvalues(D);
  EXPECT_NEAR(std::abs(ev[0] - D(1, 1)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(ev[1] - D(0, 0)), 0.0, 1e-12);
}

TEST(Eigenvalues, NonSquareThrows) {
  EXPECT_THROW(eigenvalues(CxMatrix::Zero(2, 3)), DimensionError);
}

TEST(Eigenvalues, TraceDeterminantAndResidualProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    int n = rng.integer(1, 9);
    CxMatrix M = rng.matrix(n, n, 2.0);
    auto ev = eigenvalues(M);
    ASSERT_EQ(static_cast<int>(ev.size()), n);
    Cx tr{}, det = 1.0;
    for (Cx l : ev) {
      tr += l;
      det *= l;
    }
    Cx true_det = M.determinant();
    EXPECT_LT(std::abs(tr - M.trace()), 1e-8 * std::max(1.0, std::abs(M.trace())));
    EXPECT_LT(std::abs(det - true_det), 1e-8 * std::max(1.0, std::abs(true_det)));
    // Residual of a computed eigenvector: null vector of M - lambda I.
    for (Cx l : ev) {
      CxMatrix S = M - l * CxMatrix::Identity(n, n);
      Eigen::JacobiSVD<CxMatrix> svd(S, Eigen::ComputeFullV);
      CxVector v = svd.matrixV().col(n - 1);
      EXPECT_LT((M * v - l * v).norm(), 1e-8 * M.norm());
    }
  }
}
