#include "joris/geometry.hpp"

#include "prop.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace joris;

namespace {

// Oracle: dense parametric sampling of the ellipse plus local refinement.
double brute_ellipse_distance(double a, double b, double x, double y) {
  const int n = 20000;
  double best = 1e300, best_t = 0;
  for (int i = 0; i < n; ++i) {
    double t = 2 * std::numbers::pi * i / n;
    double d = std::hypot(x - a * std::cos(t), y - b * std::sin(t));
    if (d < best) best = d, best_t = t;
  }
  double lo = best_t - 2 * std::numbers::pi / n, hi = best_t + 2 * std::numbers::pi / n;
  for (int it = 0; it < 200; ++it) {
    double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    double d1 = std::hypot(x - a * std::cos(m1), y - b * std::sin(m1));
    double d2 = std::hypot(x - a * std::cos(m2), y - b * std::sin(m2));
    if (d1 < d2) hi = m2;
    else lo = m1;
  }
  double t = 0.5 * (lo + hi);
  return std::min(best, std::hypot(x - a * std::cos(t), y - b * std::sin(t)));
}

}  // namespace

TEST(Phi, Examples) {
  EXPECT_EQ(phi_eps(1.0, 0.0), Complex(0.0));
  EXPECT_NEAR(std::abs(phi_eps(1.0, Complex(0, 1)) - Complex(0, std::sinh(1.0))), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(phi_eps(0.5, std::numbers::pi) - 1.0), 0.0, 1e-15);
}

TEST(Phi, StripBoundaryMapsToEllipseBoundary) {
  prop::for_all(200, [](prop::Gen& g) {
    double eps = g.log_uniform(1.0 / 64, 1.0);
    double x = g.uniform(-20, 20);
    double sgn = g.coin() ? 1.0 : -1.0;
    EXPECT_NEAR(s_parameter(phi_eps(eps, Complex(x, sgn))), eps, 1e-8);
  });
}

TEST(SParameter, Examples) {
  EXPECT_EQ(s_parameter(0.5), 0.0);
  EXPECT_NEAR(s_parameter(Complex(0, std::sinh(0.3))), 0.3, 1e-14);
  EXPECT_NEAR(s_parameter(std::cosh(0.2)), 0.2, 1e-8);
  EXPECT_NEAR(s_parameter(-std::cosh(0.2)), 0.2, 1e-8);
}

TEST(SParameter, MembershipMatchesFocalForm) {
  prop::for_all(500, [](prop::Gen& g) {
    Complex z(g.uniform(-2, 2), g.uniform(-1.5, 1.5));
    double eps = g.uniform(0.01, 1.0);
    double focal = (std::abs(z + 1.0) + std::abs(z - 1.0)) / 2;
    if (std::abs(focal - std::cosh(eps)) < 1e-9) return;
    EXPECT_EQ(s_parameter(z) < eps, focal < std::cosh(eps));
    EXPECT_EQ(EllipseDomain(eps).contains(z), focal < std::cosh(eps));
  });
}

TEST(SParameter, DbarMatchesFiniteDifferences) {
  prop::for_all(100, [](prop::Gen& g) {
    Complex z(g.uniform(-1.5, 1.5), g.uniform(0.05, 1.0) * (g.coin() ? 1 : -1));
    double h = 1e-6;
    double sx = (s_parameter(z + h) - s_parameter(z - h)) / (2 * h);
    double sy = (s_parameter(z + Complex(0, h)) - s_parameter(z - Complex(0, h))) / (2 * h);
    Complex fd = 0.5 * Complex(sx, sy);
    EXPECT_NEAR(std::abs(s_parameter_dbar(z) - fd), 0.0, 1e-6);
  });
}

TEST(Ellipse, ContainsIntervalAndNested) {
  for (double eps : {1.0, 0.25, 1.0 / 64}) {
    EllipseDomain D(eps), inner(eps / 2);
    for (int i = 0; i < 1000; ++i) EXPECT_TRUE(D.contains(-1.0 + 2.0 * i / 999.0));
    for (int i = 0; i < 1000; ++i) EXPECT_TRUE(D.contains(inner.boundary_point(2 * std::numbers::pi * i / 1000)));
  }
}

TEST(Ellipse, PointDistanceAgainstSamplingOracle) {
  prop::for_all(60, [](prop::Gen& g) {
    double b = g.uniform(0.01, 1.2), a = std::sqrt(1 + b * b);
    double x = g.uniform(-2.5, 2.5), y = g.uniform(-2.0, 2.0);
    if (g.integer(0, 4) == 0) y = 0;
    if (g.integer(0, 4) == 0) x = 0;
    EXPECT_NEAR(point_ellipse_distance(a, b, x, y), brute_ellipse_distance(a, b, x, y), 1e-9);
  });
}

TEST(BoundaryGap, QuarterEpsSquaredLowerBoundAndCoVertexUpperBound) {
  EXPECT_GE(boundary_gap(1.0), 0.25);
  EXPECT_GE(boundary_gap(0.5), 0.0625);
  double g = boundary_gap(0.1);
  EXPECT_GE(g, 0.0025);
  EXPECT_LE(g, std::sinh(0.1) - std::sinh(0.05) + 1e-15);
  for (int k = 0; k <= 6; ++k) {
    double eps = std::ldexp(1.0, -k);
    EXPECT_GE(boundary_gap(eps), eps * eps / 4) << eps;
  }
  EXPECT_THROW(boundary_gap(0.0), DomainError);
  EXPECT_THROW(boundary_gap(1.5), DomainError);
}

TEST(Cover, InvariantsAcrossLadder) {
  std::vector<double> constants;
  for (int k = 0; k <= 6; ++k) {
    double eps = std::ldexp(1.0, -k);
    auto cover = build_cover(eps);
    EXPECT_DOUBLE_EQ(cover.radius(), eps * eps / 16);
    auto chk = check_cover(cover);
    EXPECT_TRUE(chk.covering) << eps;
    EXPECT_TRUE(chk.safety) << eps << " " << chk.min_boundary_distance;
    constants.push_back(static_cast<double>(cover.size()) * eps * eps * eps);
  }
  double lo = *std::min_element(constants.begin(), constants.end());
  double hi = *std::max_element(constants.begin(), constants.end());
  EXPECT_LT(hi / lo, 2.0);
}

TEST(Cover, ScalingBetweenOneAndHalf) {
  auto c1 = build_cover(1.0), c2 = build_cover(0.5);
  double ratio = static_cast<double>(c2.size()) / static_cast<double>(c1.size());
  EXPECT_LE(ratio, 9.0);
  EXPECT_GE(ratio, 4.0);
}

TEST(Cover, SafetyDisksAtEpsilonOneBySampling) {
  auto cover = build_cover(1.0);
  double rho = 1.0 / 8;
  cover.for_each_center([&](Complex c) {
    for (int i = 0; i < 64; ++i) {
      Complex p = c + std::polar(rho, 2 * std::numbers::pi * i / 64);
      EXPECT_LT(s_parameter(p), 1.0);
    }
  });
}

TEST(Cover, ImplicitMembershipMatchesExplicitCenters) {
  auto cover = build_cover(0.5);
  auto centers = cover.centers();
  EXPECT_EQ(centers.size(), cover.size());
  // every explicit center meets Omega_{eps/2}
  for (auto c : centers) EXPECT_LE(distance_to_domain(0.25, c), cover.radius() * (1 + 1e-12));
  auto j = cover_to_json(cover);
  EXPECT_EQ(j["centers"].size(), cover.size());
  EXPECT_DOUBLE_EQ(j["radius"].get<double>(), 0.5 * 0.5 / 16);
}

TEST(Cutoff, Examples) {
  EXPECT_EQ(cutoff_chi(1.0, 0.0), 1.0);
  EXPECT_EQ(cutoff_chi(1.0, 2.0), 0.0);
  Complex z(0, std::sinh(0.6));
  double v = cutoff_chi(1.0, z);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
  EXPECT_EQ(cutoff_chi(1.0, Complex(0, std::sinh(0.76))), 0.0);
  EXPECT_EQ(cutoff_chi(1.0, Complex(0, std::sinh(0.49))), 1.0);
}

TEST(Cutoff, ConstantOnConfocalEllipses) {
  prop::for_all(100, [](prop::Gen& g) {
    double eps = g.uniform(0.05, 1.0);
    double s = g.uniform(0.0, eps);
    EllipseDomain E(s > 0 ? s : 1e-9);
    double ref = cutoff_chi(eps, E.boundary_point(0.3));
    double th = g.uniform(0, 2 * std::numbers::pi);
    EXPECT_NEAR(cutoff_chi(eps, E.boundary_point(th)), ref, 1e-9);
  });
}

TEST(Cutoff, GradientScalesLikeInverseEpsilonSquared) {
  std::vector<double> fitted;
  for (double eps : {1.0, 0.5, 0.25, 0.125}) {
    double worst = 0;
    for (int i = 0; i < 200; ++i)
      for (int j = 0; j < 60; ++j) {
        double s = eps * (0.5 + 0.25 * (j + 0.5) / 60);
        Complex z = EllipseDomain(s).boundary_point(2 * std::numbers::pi * i / 200);
        worst = std::max(worst, 2 * std::abs(cutoff_chi_dbar(eps, z)));
      }
    fitted.push_back(worst * eps * eps);
  }
  for (double c : fitted) EXPECT_LT(c, 50.0);
  // d(chi)/d(z-bar) against finite differences
  prop::for_all(100, [](prop::Gen& g) {
    double eps = g.uniform(0.1, 1.0);
    double s = eps * g.uniform(0.52, 0.73);
    Complex z = EllipseDomain(s).boundary_point(g.uniform(0, 6.28));
    double h = 1e-7;
    double cx = (cutoff_chi(eps, z + h) - cutoff_chi(eps, z - h)) / (2 * h);
    double cy = (cutoff_chi(eps, z + Complex(0, h)) - cutoff_chi(eps, z - Complex(0, h))) / (2 * h);
    EXPECT_NEAR(std::abs(cutoff_chi_dbar(eps, z) - 0.5 * Complex(cx, cy)), 0.0, 1e-5 / (eps * eps));
  });
}
