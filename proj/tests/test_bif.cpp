#include <cmath>

#include <gtest/gtest.h>

#include "nmpfunnel/bif.hpp"
#include "nmpfunnel/testing/oracles.hpp"

using namespace nmpfunnel;
using nmpfunnel::testing::StateSampler;

namespace {

const ManipulatorParams kUnit{1.0, 1.0, 1.0, 0.25, 1.0};

}  // namespace

TEST(PhiForward, Examples) {
  BifCoords z = phi_forward(kUnit, PlantState{});
  EXPECT_EQ(z.y, 0.0);
  EXPECT_EQ(z.y_dot, 0.0);
  EXPECT_EQ(z.eta1, 0.0);
  EXPECT_EQ(z.eta2, 0.0);

  z = phi_forward(kUnit, PlantState{1.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(z.y, 1.0);
  EXPECT_EQ(z.eta2, 0.0);

  z = phi_forward(kUnit, PlantState{0.0, 0.5, 1.0, 2.0});
  EXPECT_DOUBLE_EQ(z.y, 0.25);
  EXPECT_DOUBLE_EQ(z.y_dot, 2.0);
  EXPECT_DOUBLE_EQ(z.eta1, 0.5);
  EXPECT_NEAR(z.eta2, 1.0 / 3.0 + std::cos(0.5) / 2.0 + 2.0 / 3.0, 1e-15);
}

TEST(PhiForward, RejectsOutsideDomain) {
  EXPECT_THROW(phi_forward(kUnit, PlantState{0.0, 0.9, 0.0, 0.0}), DomainError);
  EXPECT_THROW(phi_inverse(kUnit, BifCoords{0.0, 0.0, 0.9, 0.0}), DomainError);
}

TEST(PhiForward, RequiresEndEffectorOutput) {
  const ManipulatorParams p{1.0, 1.0, 1.0, 0.25, 0.5};
  EXPECT_THROW(phi_forward(p, PlantState{}), std::invalid_argument);
}

TEST(PhiInverse, Examples) {
  PlantState x = phi_inverse(kUnit, BifCoords{});
  EXPECT_EQ(x, PlantState{});
  x = phi_inverse(kUnit, BifCoords{1.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(x.alpha, 1.0);
  EXPECT_EQ(x.beta, 0.0);
  EXPECT_EQ(x.alpha_dot, 0.0);
  EXPECT_EQ(x.beta_dot, 0.0);
}

TEST(PhiInverse, RoundTrips) {
  StateSampler rnd(21);
  for (int i = 0; i < 1000; ++i) {
    const PlantState x = rnd();
    const Vec4 a = x.to_array(), b = phi_inverse(kUnit, phi_forward(kUnit, x)).to_array();
    for (int k = 0; k < 4; ++k) ASSERT_NEAR(a[k], b[k], 1e-10);

    const BifCoords z{rnd.uniform(-2, 2), rnd.uniform(-3, 3), rnd.uniform(-0.83, 0.83),
                      rnd.uniform(-3, 3)};
    const BifCoords w = phi_forward(kUnit, phi_inverse(kUnit, z));
    ASSERT_NEAR(w.y, z.y, 1e-10);
    ASSERT_NEAR(w.y_dot, z.y_dot, 1e-10);
    ASSERT_NEAR(w.eta1, z.eta1, 1e-10);
    ASSERT_NEAR(w.eta2, z.eta2, 1e-10);
  }
}

TEST(PhiForward, JacobianInvertible) {
  StateSampler rnd(22);
  auto f = [](const Vec4& v) {
    const BifCoords z = phi_forward(kUnit, PlantState::from_array(v));
    return Vec4{z.y, z.y_dot, z.eta1, z.eta2};
  };
  for (int i = 0; i < 200; ++i) {
    const PlantState x = rnd();
    const double det = nmpfunnel::testing::fd_jacobian(f, x.to_array()).determinant();
    EXPECT_GE(std::abs(det), 1e-3);
  }
}

TEST(PhiGradients, MatchFiniteDifferences) {
  StateSampler rnd(23);
  for (int i = 0; i < 100; ++i) {
    const PlantState x = rnd();
    const Vec4 fd = nmpfunnel::testing::fd_gradient(
        [](const PlantState& s) { return phi_forward(kUnit, s).eta2; }, x);
    const Vec4 an = phi2_gradient(x);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(an[k], fd[k], 1e-8);
  }
}

TEST(Decoupling, InputDoesNotEnterInternalCoordinates) {
  StateSampler rnd(24);
  using nmpfunnel::testing::dot;
  for (int i = 0; i < 1000; ++i) {
    const PlantState x = rnd();
    const Vec4 g = input_field(kUnit, x);
    ASSERT_LE(std::abs(dot(phi1_gradient(x), g)), 1e-12);
    ASSERT_LE(std::abs(dot(phi2_gradient(x), g)), 1e-12);
  }
}

TEST(InternalRhs, OriginValues) {
  InternalRate r = internal_rhs(kUnit, 0.0, 0.0, 0.0);
  EXPECT_EQ(r.eta1_dot, 0.0);
  EXPECT_EQ(r.eta2_dot, 0.0);
  r = internal_rhs(kUnit, 0.0, 0.0, 1.0);
  EXPECT_NEAR(r.eta1_dot, 10.0, 1e-14);
  EXPECT_NEAR(r.eta2_dot, -2.5, 1e-14);
}

TEST(InternalRhsOracle, Examples) {
  const InternalRate r = internal_rhs_oracle(kUnit, PlantState{});
  EXPECT_EQ(r.eta1_dot, 0.0);
  EXPECT_EQ(r.eta2_dot, 0.0);
}

TEST(InternalRhsOracle, IndependentOfInput) {
  StateSampler rnd(25);
  for (int i = 0; i < 1000; ++i) {
    const PlantState x = rnd();
    const InternalRate a = internal_rhs_oracle(kUnit, x, 0.0);
    const InternalRate b = internal_rhs_oracle(kUnit, x, 10.0);
    ASSERT_NEAR(a.eta1_dot, b.eta1_dot, 1e-12);
    ASSERT_NEAR(a.eta2_dot, b.eta2_dot, 1e-12);
  }
}

TEST(InternalRhs, ClosedFormMatchesChainRule) {
  StateSampler rnd(26);
  const ManipulatorParams odd{0.8, 1.3, 2.2, 0.4, 1.3};
  for (const auto& p : {kUnit, odd}) {
    for (int i = 0; i < 1000; ++i) {
      const PlantState x = rnd();
      const BifCoords z = phi_forward(p, x);
      const InternalRate a = internal_rhs(p, z.eta1, z.eta2, z.y_dot);
      const InternalRate b = internal_rhs_oracle(p, x);
      ASSERT_NEAR(a.eta1_dot, b.eta1_dot, 1e-9);
      ASSERT_NEAR(a.eta2_dot, b.eta2_dot, 1e-9);
    }
  }
}

TEST(InternalRhs, PolynomialDegreeInYdot) {
  StateSampler rnd(27);
  for (int i = 0; i < 100; ++i) {
    const double e1 = rnd.uniform(-0.8, 0.8), e2 = rnd.uniform(-2, 2);
    // Third finite difference on a unit grid is 6 x the cubic coefficient.
    double f2[4], f1[3];
    for (int k = 0; k < 4; ++k) f2[k] = internal_rhs(kUnit, e1, e2, k - 1.5).eta2_dot;
    for (int k = 0; k < 3; ++k) f1[k] = internal_rhs(kUnit, e1, e2, k - 1.0).eta1_dot;
    const double cubic = (f2[3] - 3 * f2[2] + 3 * f2[1] - f2[0]) / 6.0;
    EXPECT_LE(std::abs(cubic), 1e-10);
    EXPECT_LE(std::abs(f1[2] - 2 * f1[1] + f1[0]), 1e-10);
  }
}
