#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "koopman_gate/algebra/linalg.hpp"
#include "koopman_gate/jets.hpp"
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

// Faa di Bruno recursion: an operator h -> sum_beta c_beta(z) (d^beta h)(F(z)),
// differentiated one coordinate at a time. Reading off c_beta(p) after applying
// d^alpha gives column alpha of the pushforward. Shares no code with the
// truncated-power route in the library.
using Symbol = std::map<MultiIndex, MultiPoly>;

Symbol apply_partial(const Symbol& s, const PolyMap& F, int i) {
  const int d = F.dim_in();
  Symbol out;
  auto add = [&](const MultiIndex& b, const MultiPoly& c) {
    if (c.is_zero()) return;
    auto it = out.find(b);
    if (it == out.end()) out.emplace(b, c);
    else it->second += c;
  };
  for (const auto& [beta, c] : s) {
    add(beta, derivative(c, i));
    for (int m = 0; m < d; ++m) {
      MultiIndex b2 = beta;
      b2[static_cast<std::size_t>(m)] += 1;
      add(b2, c * derivative(F[m], i));
    }
  }
  return out;
}

CxMatrix recursion_oracle(const PolyMap& F, const CxVector& p, int n) {
  const int d = F.dim_in();
  JetBasis b = jet_basis(d, n);
  const auto N = static_cast<Eigen::Index>(b.size());
  CxMatrix M = CxMatrix::Zero(N, N);
  for (std::size_t col = 0; col < b.size(); ++col) {
    Symbol s;
    s.emplace(MultiIndex(static_cast<std::size_t>(d), 0), MultiPoly::constant(d, 1.0));
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < b.indices[col][static_cast<std::size_t>(i)]; ++k) s = apply_partial(s, F, i);
    for (const auto& [beta, c] : s) {
      if (total_degree(beta) > n) continue;
      M(static_cast<Eigen::Index>(b.position(beta)), static_cast<Eigen::Index>(col)) = c(p);
    }
  }
  return M;
}

double rel_err(const CxMatrix& a, const CxMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

// Multiset match of complex lists within tol (greedy nearest).
bool same_multiset(std::vector<Cx> a, std::vector<Cx> b, double tol) {
  if (a.size() != b.size()) return false;
  for (Cx x : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](Cx u, Cx v) { return std::abs(u - x) < std::abs(v - x); });
    if (std::abs(*it - x) > tol * std::max(1.0, std::abs(x))) return false;
    b.erase(it);
  }
  return true;
}

} // namespace

TEST(JetBasis, Examples) {
  auto b = jet_basis(1, 3);
  ASSERT_EQ(b.size(), 4u);
  for (int k = 0; k <= 3; ++k) EXPECT_EQ(b.indices[static_cast<std::size_t>(k)], MultiIndex{k});

  auto b2 = jet_basis(2, 1);
  std::vector<MultiIndex> want{{0, 0}, {1, 0}, {0, 1}};
  EXPECT_EQ(b2.indices, want);

  EXPECT_EQ(jet_basis(3, 2).size(), 10u);
}

TEST(JetBasis, CountsAndOffsets) {
  for (int d = 1; d <= 4; ++d)
    for (int n = 0; n <= 6; ++n) {
      auto b = jet_basis(d, n);
      EXPECT_EQ(b.size(), static_cast<std::size_t>(binomial(n + d, d)));
      for (int k = 0; k <= n; ++k) {
        EXPECT_EQ(b.grade_size(k), static_cast<std::size_t>(binomial(k + d - 1, d - 1)));
        EXPECT_EQ(total_degree(b.indices[b.grade_offsets[static_cast<std::size_t>(k)]]), k);
      }
      for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b.position(b.indices[i]), i);
    }
  EXPECT_THROW(jet_basis(0, 2), DimensionError);
  EXPECT_THROW(jet_basis(2, -1), DomainError);
}

TEST(Pushforward, LinearScalar) {
  Cx a(0.3, 1.7);
  PolyMap f(1, {MultiPoly::monomial({1}, a)});
  auto M = pushforward_matrix(f, vec({0.0}), 2);
  CxMatrix want = CxMatrix::Zero(3, 3);
  want(0, 0) = 1.0;
  want(1, 1) = a;
  want(2, 2) = a * a;
  EXPECT_LT((M.matrix - want).norm(), 1e-15);
}

TEST(Pushforward, SquareAtOne) {
  PolyMap f(1, {MultiPoly::monomial({2})});
  auto M1 = pushforward_matrix(f, vec({1.0}), 1);
  CxMatrix w1(2, 2);
  w1 << 1.0, 0.0, 0.0, 2.0;
  EXPECT_LT((M1.matrix - w1).norm(), 1e-15);

  auto M2 = pushforward_matrix(f, vec({1.0}), 2);
  EXPECT_EQ(M2.matrix(0, 2), Cx(0.0));
  EXPECT_EQ(M2.matrix(1, 2), Cx(2.0));
  EXPECT_EQ(M2.matrix(2, 2), Cx(4.0));
}

TEST(Pushforward, Errors) {
  PolyMap f(1, {MultiPoly::monomial({2})});
  EXPECT_THROW(pushforward_matrix(f, vec({2.0}), 2), DomainError);
  EXPECT_THROW(pushforward_matrix(f, vec({1.0}), -1), DomainError);
  EXPECT_THROW(pushforward_matrix(f, vec({1.0, 0.0}), 1), DimensionError);
  // Within the residual tolerance is accepted.
  EXPECT_NO_THROW(pushforward_matrix(f, vec({1.0 + 1e-11}), 2));
}

TEST(Pushforward, MatchesFaaDiBrunoRecursion) {
  Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    int d = rng.integer(1, 3);
    int n = rng.integer(0, d == 3 ? 3 : 5);
    CxVector p = rng.point(d, 0.8);
    PolyMap f = rng.map_fixing(p, rng.integer(1, 3));
    auto M = pushforward_matrix(f, p, n);
    CxMatrix oracle = recursion_oracle(f, p, n);
    EXPECT_LT(rel_err(M.matrix, oracle), 1e-10) << "trial " << trial << " d=" << d << " n=" << n;
  }
}

TEST(Pushforward, Functoriality) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    int d = rng.integer(1, 3);
    int n = rng.integer(1, d == 3 ? 3 : 4);
    CxVector p = rng.point(d, 0.7);
    PolyMap f = rng.map_fixing(p, 2), g = rng.map_fixing(p, 2);
    CxMatrix lhs = pushforward_matrix(poly_compose(f, g), p, n).matrix;
    CxMatrix rhs = pushforward_matrix(f, p, n).matrix * pushforward_matrix(g, p, n).matrix;
    EXPECT_LT(rel_err(lhs, rhs), 1e-8) << "trial " << trial;
  }
}

TEST(SymmetricPower, Examples) {
  CxMatrix a(1, 1);
  a << Cx(1.5, -0.5);
  for (int n = 0; n <= 4; ++n) {
    CxMatrix S = symmetric_power_matrix(a, n);
    ASSERT_EQ(S.rows(), 1);
    EXPECT_LT(std::abs(S(0, 0) - std::pow(a(0, 0), n)), 1e-13);
  }

  CxMatrix swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;
  EXPECT_EQ(symmetric_power_matrix(swap, 1), swap);

  CxMatrix D = CxMatrix::Zero(2, 2);
  D(0, 0) = 2.0;
  D(1, 1) = Cx(0, 3);
  CxMatrix S2 = symmetric_power_matrix(D, 2);
  CxMatrix want = CxMatrix::Zero(3, 3);
  want(0, 0) = 4.0;
  want(1, 1) = Cx(0, 6);
  want(2, 2) = -9.0;
  EXPECT_LT((S2 - want).norm(), 1e-14);

  EXPECT_THROW(symmetric_power_matrix(D, -1), DomainError);
  EXPECT_THROW(symmetric_power_matrix(CxMatrix::Zero(2, 3), 1), DimensionError);
}

TEST(GradedBlocks, Examples) {
  Cx a(-0.4, 0.9);
  PolyMap lin(1, {MultiPoly::monomial({1}, a)});
  auto g = graded_blocks(pushforward_matrix(lin, vec({0.0}), 4));
  ASSERT_EQ(g.blocks.size(), 5u);
  for (int k = 0; k <= 4; ++k) EXPECT_LT(std::abs(g.blocks[static_cast<std::size_t>(k)](0, 0) - std::pow(a, k)), 1e-14);

  PolyMap sq(1, {MultiPoly::monomial({2})});
  auto gs = graded_blocks(pushforward_matrix(sq, vec({1.0}), 3));
  for (int k = 0; k <= 3; ++k) {
    CxMatrix J(1, 1);
    J << 2.0;
    EXPECT_LT((gs.blocks[static_cast<std::size_t>(k)] - symmetric_power_matrix(J, k)).norm(), 1e-12);
    EXPECT_NEAR(gs.blocks[static_cast<std::size_t>(k)](0, 0).real(), std::pow(2.0, k), 1e-12);
  }
  EXPECT_EQ(gs.leakage, 0.0);

  Rng rng(8);
  CxMatrix A = rng.matrix(3, 3);
  auto gl = graded_blocks(pushforward_matrix(PolyMap::affine(A, CxVector::Zero(3)), CxVector::Zero(3), 3));
  for (int k = 0; k <= 3; ++k)
    EXPECT_LT((gl.blocks[static_cast<std::size_t>(k)] - symmetric_power_matrix(A, k)).norm(), 1e-12);
}

TEST(GradedBlocks, LeakageDetected) {
  PolyMap sq(1, {MultiPoly::monomial({2})});
  auto M = pushforward_matrix(sq, vec({1.0}), 2);
  M.matrix(2, 0) = 1e-6;
  EXPECT_THROW(graded_blocks(M), NumericalError);
  M.matrix(2, 0) = 1e-12;
  auto g = graded_blocks(M);
  EXPECT_DOUBLE_EQ(g.leakage, 1e-12);
}

TEST(GradedBlocks, ConsistentWithSymmetricPowerOfJacobian) {
  Rng rng(1234);
  for (int trial = 0; trial < 25; ++trial) {
    int d = rng.integer(1, 3);
    int n = rng.integer(1, d == 3 ? 3 : 5);
    CxVector p = rng.point(d, 0.9);
    PolyMap f = rng.map_fixing(p, rng.integer(1, 3));
    auto g = graded_blocks(pushforward_matrix(f, p, n));
    CxMatrix J = jacobian(f, p);
    for (int k = 0; k <= n; ++k) {
      CxMatrix S = symmetric_power_matrix(J, k);
      double err = (g.blocks[static_cast<std::size_t>(k)] - S).cwiseAbs().maxCoeff();
      EXPECT_LT(err, 1e-9 * std::max(1.0, S.cwiseAbs().maxCoeff())) << "trial " << trial << " k=" << k;
    }
  }
}

TEST(GradedBlocks, EigenvaluePowerLaw) {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    int d = rng.integer(1, 3);
    int n = 4;
    CxVector p = rng.point(d, 0.5);
    PolyMap f = rng.map_fixing(p, 2);
    auto g = graded_blocks(pushforward_matrix(f, p, n));
    auto lam = eigenvalues(jacobian(f, p));
    for (int k = 0; k <= n; ++k) {
      std::vector<Cx> want;
      for (const auto& a : homogeneous_indices(d, k)) {
        Cx m = 1.0;
        for (int i = 0; i < d; ++i) m *= std::pow(lam[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(i)]);
        want.push_back(m);
      }
      EXPECT_TRUE(same_multiset(eigenvalues(g.blocks[static_cast<std::size_t>(k)]), want, 1e-7))
          << "trial " << trial << " k=" << k;
    }
  }
}

TEST(GradedBlocks, RepellingSpectralGrowth) {
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 10; ++trial) {
    int d = rng.integer(1, 2);
    CxVector p = rng.point(d, 0.5);
    PolyMap f = rng.map_fixing(p, 2, 1.5);
    double lmax = spectral_radius(jacobian(f, p));
    if (lmax <= 1.05) continue;
    ++checked;
    auto g = graded_blocks(pushforward_matrix(f, p, 6));
    for (int k = 1; k <= 6; ++k) {
      double prev = spectral_radius(g.blocks[static_cast<std::size_t>(k - 1)]);
      double cur = spectral_radius(g.blocks[static_cast<std::size_t>(k)]);
      EXPECT_GE(cur / prev, lmax - 1e-6) << "trial " << trial << " k=" << k;
    }
  }
  EXPECT_GE(checked, 5);
}
