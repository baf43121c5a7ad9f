#include "joris/smooth_model.hpp"

#include "prop.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace joris;

namespace {

// Oracle: high-order central difference in extended precision,
// f^{(j)}(x) ~ h^{-j} sum_k (-1)^k C(j,k) f(x + (j/2 - k) h).
Real fd_derivative(const std::function<Real(const Real&)>& f, const Real& x, unsigned j) {
  Real h("1e-10");
  Real s(0), binom(1);
  for (unsigned k = 0; k <= j; ++k) {
    Real term = binom * f(x + (Real(j) / 2 - Real(k)) * h);
    s += (k % 2 == 0) ? term : Real(-term);
    binom = binom * Real(j - k) / Real(k + 1);
  }
  return s / pow(h, j);
}

}  // namespace

TEST(Jets, PolynomialTaylorShift) {
  auto p = models::polynomial("p", {1.0, -2.0, 0.5, 3.0});
  auto c = p.jet(0.5L, 5);
  // p(x) = 1 - 2x + x^2/2 + 3x^3
  EXPECT_NEAR(static_cast<double>(c[0]), 1 - 1 + 0.125 + 0.375, 1e-15);
  EXPECT_NEAR(static_cast<double>(c[1]), -2 + 0.5 + 9 * 0.25, 1e-15);
  EXPECT_NEAR(static_cast<double>(c[2]), 0.5 + 9 * 0.5, 1e-15);
  EXPECT_NEAR(static_cast<double>(c[3]), 3.0, 1e-15);
  EXPECT_EQ(c[4], 0.0L);
  EXPECT_EQ(c[5], 0.0L);
}

TEST(Jets, ExpInvAgainstExtendedFiniteDifferences) {
  auto f = models::exp_inv();
  auto fn = [](const Real& x) { return x > 0 ? Real(exp(-1 / x)) : Real(0); };
  for (double x : {0.05, 0.2, 0.7, 1.3}) {
    for (unsigned j = 0; j <= 6; ++j) {
      Real oracle = fd_derivative(fn, Real(x), j);
      long double got = f.derivative(x, j);
      double rel = std::abs(static_cast<double>(got) - oracle.convert_to<double>()) /
                   std::max(1e-300, std::abs(oracle.convert_to<double>()));
      EXPECT_LT(rel, 1e-12) << "x=" << x << " j=" << j;
    }
  }
  EXPECT_EQ(f.value(-0.3L), 0.0L);
  EXPECT_EQ(f.jet(0.0L, 10)[10], 0.0L);
}

TEST(Jets, ExpInvLongDoubleMatchesExtendedAtHighOrder) {
  auto f = models::exp_inv();
  prop::for_all(40, [&](prop::Gen& g) {
    double x = g.log_uniform(1e-3, 1.5);
    auto a = f.jet(x, 40);
    auto b = f.jet_mp(Real(x), 40);
    for (std::size_t j = 0; j <= 40; ++j) {
      double ref = b[j].convert_to<double>();
      if (ref == 0) continue;
      EXPECT_LT(std::abs(static_cast<double>(a[j]) / ref - 1), 1e-9) << "x=" << x << " j=" << j;
    }
  });
}

TEST(Jets, ProductsAndPowersMatchDirectModels) {
  auto x = models::identity();
  auto x5 = models::power(x, 5);
  auto pr = models::product(models::square(), models::power(x, 3));
  prop::for_all(50, [&](prop::Gen& g) {
    long double t = g.uniform(-1.5, 1.5);
    auto a = x5.jet(t, 7), b = pr.jet(t, 7);
    for (std::size_t j = 0; j <= 7; ++j) {
      long double binom = (j <= 5) ? std::tgamma(6.0L) / (std::tgamma(j + 1.0L) * std::tgamma(6.0L - j)) : 0;
      long double ref = j <= 5 ? binom * std::pow(t, 5.0L - j) : 0;
      EXPECT_NEAR(static_cast<double>(a[j]), static_cast<double>(ref), 1e-13);
      EXPECT_NEAR(static_cast<double>(b[j]), static_cast<double>(ref), 1e-13);
    }
  });
  EXPECT_EQ(models::power(x, 0).value(0.3L), 1.0L);
}

TEST(Jets, ValueAgreesWithDerivativeOrderZero) {
  for (const auto& m : {models::exp_inv(), models::sine(), models::geometric_half(), models::exp_linear(0.7)}) {
    for (long double t : {-0.9L, -0.1L, 0.3L, 0.99L}) EXPECT_NEAR(double(m.value(t)), double(m.derivative(t, 0)), 1e-12);
  }
}

TEST(Jets, GeometricHalfClosedForm) {
  // f^{(j)} = j! 2^{-j} (1 - x/2)^{-(j+1)}
  auto f = models::geometric_half();
  for (long double t : {-1.0L, 0.0L, 0.8L})
    for (std::size_t j = 0; j <= 12; ++j) {
      long double ref = std::tgamma(j + 1.0L) * std::pow(0.5L, j) * std::pow(1 - t / 2, -(long double)(j + 1));
      EXPECT_NEAR(double(f.derivative(t, j) / ref), 1.0, 1e-15);
    }
}

TEST(Jets, OrderBeyondJmaxThrows) {
  auto f = models::exp_inv(10);
  EXPECT_THROW(f.jet(0.5L, 11), DomainError);
}

TEST(Chebyshev, PolynomialDerivativesExactUpToDegree) {
  auto cheb = models::chebyshev(
      "cubic", [](const Real& x) { return Real(1) - 2 * x + x * x / 2 + 3 * x * x * x; }, -2, 2, 64, 6);
  auto ref = models::polynomial("p", {1.0, -2.0, 0.5, 3.0});
  for (long double t : {-1.7L, -0.2L, 0.0L, 0.9L, 1.99L}) {
    auto a = cheb.jet(t, 6), b = ref.jet(t, 6);
    for (std::size_t j = 0; j <= 6; ++j) EXPECT_NEAR(double(a[j]), double(b[j]), 1e-14) << j;
  }
}

TEST(Chebyshev, SineMatchesClosedForm) {
  auto cheb = models::chebyshev("sin", [](const Real& x) { return Real(sin(x)); }, -2, 2, 256, 20);
  auto ref = models::sine();
  prop::for_all(30, [&](prop::Gen& g) {
    long double t = g.uniform(-1.5, 1.5);
    auto a = cheb.jet(t, 20), b = ref.jet(t, 20);
    for (std::size_t j = 0; j <= 20; ++j) EXPECT_NEAR(double(a[j]), double(b[j]), 1e-14) << j;
    auto am = cheb.jet_mp(Real(double(t)), 20);
    for (std::size_t j = 0; j <= 20; ++j) EXPECT_NEAR(am[j].convert_to<double>(), double(b[j]), 1e-15) << j;
  });
}
