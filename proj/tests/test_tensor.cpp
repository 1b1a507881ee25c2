#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "micromech/tensor.hpp"

using namespace micromech;

namespace {

void expect_near(const Voigt4& a, const Voigt4& b, double tol) {
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << "(" << i << "," << j << ")";
}

}  // namespace

TEST(Lame, ZeroPoissonGivesZeroLambda) {
  const auto l = lame_from_enu({1.0, 0.0});
  EXPECT_EQ(l.lambda, 0.0);
  EXPECT_EQ(l.mu, 0.5);
}

TEST(Lame, GlassFiber) {
  const auto l = lame_from_enu({74.0, 0.2});
  EXPECT_NEAR(l.lambda, 74.0 * 0.2 / (1.2 * 0.6), 1e-12);
  EXPECT_NEAR(l.lambda, 20.5556, 1e-4);
  EXPECT_NEAR(l.mu, 30.8333, 1e-4);
}

TEST(Lame, SoftMatrixLowerBounds) {
  const auto l = lame_from_enu({2.5, 0.3});
  EXPECT_NEAR(l.lambda, 1.44231, 1e-5);
  EXPECT_NEAR(l.mu, 0.961538, 1e-6);
}

TEST(Lame, RejectsInadmissibleInput) {
  EXPECT_THROW(lame_from_enu({1.0, 0.5}), DomainError);
  EXPECT_THROW(lame_from_enu({1.0, 0.7}), DomainError);
  EXPECT_THROW(lame_from_enu({1.0, -1.0}), DomainError);
  EXPECT_THROW(lame_from_enu({0.0, 0.2}), DomainError);
  EXPECT_THROW(lame_from_enu({-3.0, 0.2}), DomainError);
  EXPECT_THROW(lame_from_enu({std::nan(""), 0.2}), DomainError);
}

TEST(Stiffness, UnitIdentity) { expect_near(stiffness_from_lame({0.0, 0.5}), Voigt4::identity(), 0.0); }

TEST(Stiffness, GlassFiberEntries) {
  const auto c = stiffness_from_lame({20.5556, 30.8333});
  EXPECT_NEAR(c(0, 0), 82.2222, 1e-4);
  EXPECT_NEAR(c(1, 1), 82.2222, 1e-4);
  EXPECT_NEAR(c(0, 1), 20.5556, 1e-12);
  EXPECT_NEAR(c(1, 0), 20.5556, 1e-12);
  EXPECT_NEAR(c(2, 2), 61.6666, 1e-12);
  EXPECT_EQ(c(0, 2), 0.0);
  EXPECT_EQ(c(2, 1), 0.0);
}

TEST(Stiffness, SymmetricPositiveDefinite) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> mu(0.01, 100.0), frac(-0.99, 5.0);
  for (int n = 0; n < 200; ++n) {
    const double m = mu(gen);
    const Lame l{frac(gen) * m, m};
    const auto c = stiffness_from_lame(l);
    EXPECT_EQ(c.asymmetry(), 0.0);
    Eigen::Matrix3d e;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) e(i, j) = c(i, j);
    const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(e).eigenvalues();
    EXPECT_GT(ev.minCoeff(), 0.0);
  }
}

TEST(Effective, RecoversGlassFiber) {
  const auto p = effective_enu(stiffness_from_lame(lame_from_enu({74.0, 0.2})));
  EXPECT_NEAR(p.E, 74.0, 1e-12 * 74.0);
  EXPECT_NEAR(p.nu, 0.2, 1e-12);
  const auto q = effective_enu(stiffness_from_lame({20.5556, 30.8333}));
  EXPECT_NEAR(q.E, 74.0, 1e-3);
  EXPECT_NEAR(q.nu, 0.2, 1e-5);
}

TEST(Effective, UnitRoundTrip) {
  const auto p = effective_enu(stiffness_from_lame({0.0, 0.5}));
  EXPECT_EQ(p.E, 1.0);
  EXPECT_EQ(p.nu, 0.0);
}

TEST(Effective, SingularWhenC1111EqualsC1212) {
  Voigt4 c = Voigt4::diagonal(1.0, 1.0, 2.0);
  EXPECT_THROW(effective_enu(c), SingularityError);
}

TEST(Effective, RoundTripProperty) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> E(0.1, 500.0), nu(-0.99, 0.499);
  for (int n = 0; n < 1000; ++n) {
    const IsotropicProps p{E(gen), nu(gen)};
    const auto q = effective_enu(stiffness_from_enu(p));
    EXPECT_NEAR(q.E, p.E, 1e-12 * p.E);
    EXPECT_NEAR(q.nu, p.nu, 1e-12 * std::abs(p.nu));
  }
}

TEST(Contract42, Examples) {
  const Voigt2 e{{0.3, -0.2, 0.7}};
  EXPECT_EQ(contract_42(Voigt4::identity(), e), e);
  EXPECT_EQ(contract_42(stiffness_from_lame({0.0, 0.5}), Voigt2{{0, 0, 1}}), (Voigt2{{0, 0, 1}}));
  const auto s = contract_42(stiffness_from_lame({20.5556, 30.8333}), Voigt2{{1, 0, 0}});
  EXPECT_NEAR(s[0], 82.2222, 1e-4);
  EXPECT_NEAR(s[1], 20.5556, 1e-12);
  EXPECT_EQ(s[2], 0.0);
}

TEST(Contract44, IdentityAndAssociativity) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int n = 0; n < 100; ++n) {
    Voigt4 c, a;
    Voigt2 e;
    for (std::size_t i = 0; i < 3; ++i) {
      e[i] = u(gen);
      for (std::size_t j = 0; j < 3; ++j) {
        c(i, j) = u(gen);
        a(i, j) = u(gen);
      }
    }
    EXPECT_EQ(contract_44(c, Voigt4::identity()), c);
    EXPECT_EQ(contract_44(Voigt4::identity(), a), a);
    const auto lhs = contract_42(contract_44(c, a), e);
    const auto rhs = contract_42(c, contract_42(a, e));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-13);
  }
}

TEST(Voigt, DoubleContractionCountsShearTwice) {
  const Voigt2 a{{1, 2, 3}}, b{{4, 5, 6}};
  EXPECT_EQ(ddot(a, b), 4.0 + 10.0 + 2.0 * 18.0);
}

TEST(Voigt, InverseAndEngineeringForms) {
  const auto c = stiffness_from_enu({3.5, 0.35});
  expect_near(contract_44(c, inverse(c)), Voigt4::identity(), 1e-14);
  expect_near(from_engineering(to_engineering(c)), c, 0.0);
  EXPECT_THROW(inverse(Voigt4::zero()), SingularityError);
}
