#include "joris/extension.hpp"

#include "prop.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace joris;

namespace {

// Oracle: trapezoidal Cauchy integral (1/2 pi i) \oint fn(zeta)/(zeta - z) d zeta on the ellipse.
Complex cauchy_trapezoid(const std::function<Complex(Complex)>& fn, double eps, Complex z, int n = 20000) {
  Complex sum = 0;
  const double a = std::cosh(eps), b = std::sinh(eps);
  for (int m = 0; m < n; ++m) {
    double t = 2 * std::numbers::pi * m / n;
    Complex zeta(a * std::cos(t), b * std::sin(t));
    Complex dzeta(-a * std::sin(t), b * std::cos(t));
    sum += fn(zeta) / (zeta - z) * dzeta;
  }
  return sum * (2 * std::numbers::pi / n) / Complex(0, 2 * std::numbers::pi);
}

// M_j = 1: the analytic class.
WeightSequence analytic_weights() { return make_table("ones", std::vector<double>(256, 1.0)); }

std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("joris_ext_" + tag + "_" + std::to_string(prop::base_seed()));
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST(ChebyshevSeries, ClenshawMatchesTrigonometricDefinition) {
  prop::for_all(50, [](prop::Gen& g) {
    ChebyshevSeries s;
    for (int k = 0; k < 12; ++k) s.coeffs.emplace_back(g.uniform(-1, 1), g.uniform(-1, 1));
    Complex z(g.uniform(-1.3, 1.3), g.uniform(-0.5, 0.5));
    // oracle: forward three-term recurrence T_{k+1} = 2 z T_k - T_{k-1}
    Complex ref = 0, t0 = 1, t1 = z;
    double scale = 0;
    for (int k = 0; k < 12; ++k) {
      ref += s.coeffs[k] * t0;
      scale += std::abs(s.coeffs[k]) * std::abs(t0);
      Complex t2 = 2.0 * z * t1 - t0;
      t0 = t1;
      t1 = t2;
    }
    EXPECT_LT(std::abs(s(z) - ref), 1e-14 * scale);
  });
}

TEST(ChebyshevSeries, DerivativeOfCubic) {
  // x^3 = (3 T1 + T3)/4, so 3x^2 = 3/2 (T0 + T2)
  ChebyshevSeries s{{0.0, 0.75, 0.0, 0.25}};
  auto d = s.derivative();
  ASSERT_EQ(d.coeffs.size(), 3u);
  EXPECT_NEAR(std::abs(d.coeffs[0] - 1.5), 0, 1e-15);
  EXPECT_NEAR(std::abs(d.coeffs[1]), 0, 1e-15);
  EXPECT_NEAR(std::abs(d.coeffs[2] - 1.5), 0, 1e-15);
}

TEST(CauchyApproximant, ReproducesEntireFunctions) {
  for (double eps : {1.0, 0.25, 1.0 / 16}) {
    auto s = cauchy_approximant([](Complex z) { return std::exp(z) + z * z * z; }, eps);
    for (auto z : domain_samples(eps, 8, 32)) EXPECT_LT(std::abs(s(z) - (std::exp(z) + z * z * z)), 1e-11) << eps;
  }
}

TEST(CauchyApproximant, MatchesTrapezoidalCauchyIntegral) {
  auto fn = [](Complex z) { return std::conj(z) * z * z + std::abs(z); };
  for (double eps : {1.0, 0.5}) {
    auto s = cauchy_approximant(fn, eps);
    for (auto z : domain_samples(eps / 2, 4, 16)) EXPECT_LT(std::abs(s(z) - cauchy_trapezoid(fn, eps, z)), 1e-9) << eps;
  }
}

TEST(EllipticHolomorphy, SamplesMatchClenshawAtNodes) {
  auto s = cauchy_approximant([](Complex z) { return std::exp(z); }, 0.5);
  auto E = sample_elliptic(s, 0.5);
  for (std::int64_t r = 0; r < E.rows(); r += 7)
    for (std::int64_t i = 0; i < E.nt; i += 13) EXPECT_LT(std::abs(E.at(i, r) - s(E.point(i, r))), 1e-10);
}

TEST(EllipticHolomorphy, AcceptsSeriesRejectsConjugate) {
  for (double eps : {0.5, 1.0 / 32}) {
    auto s = cauchy_approximant([](Complex z) { return std::exp(z) * z; }, eps);
    auto rep = series_holomorphy_check(s, eps);
    EXPECT_TRUE(rep.accepted) << eps << " " << rep.residual << " " << rep.tolerance;
    auto E = sample_elliptic(s, eps);
    for (std::int64_t r = 0; r < E.rows(); ++r)
      for (std::int64_t i = 0; i < E.nt; ++i) E.data[r * E.nt + i] = std::conj(E.point(i, r));
    EXPECT_FALSE(holomorphy_check(E, eps).accepted) << eps;
  }
}

TEST(Extension, ConstantAndIdentityExamples) {
  auto M = make_gevrey(1.0);
  AlmostAnalyticExtension one(models::constant(1.0), M, 1.0);
  AlmostAnalyticExtension id(models::identity(), M, 1.0);
  double low = id.cutoff_height(1) / 2;
  prop::for_all(100, [&](prop::Gen& g) {
    Complex z(g.uniform(-1.2, 1.2), g.uniform(-low, low));
    EXPECT_EQ(one.value(z), Complex(1.0));
    EXPECT_EQ(one.dbar(z), Complex(0.0));
    EXPECT_LT(std::abs(id.value(z) - z), 1e-15);
    EXPECT_EQ(id.dbar(z), Complex(0.0));
  });
}

TEST(Extension, ValueAgreesWithFunctionOnInterval) {
  auto ext = almost_analytic_extension(models::exp_inv(), make_gevrey(1.0)).extension;
  for (double x : chebyshev_points(-1, 1, 101))
    EXPECT_NEAR(std::abs(ext.value(x) - Complex(static_cast<double>(models::exp_inv().value(x)))), 0, 1e-15);
}

TEST(Extension, ClosedFormDbarMatchesFiniteDifferences) {
  auto M = make_gevrey(1.0);
  for (const auto& f : {models::exp_inv(), models::sine(), models::geometric_half()}) {
    auto ext = almost_analytic_extension(f, M).extension;
    prop::for_all(60, [&](prop::Gen& g) {
      Complex z(g.uniform(-1.4, 1.4), g.uniform(0.01, 1.1) * (g.coin() ? 1 : -1));
      const double h = 1e-6;
      Complex dx = (ext.value(z + h) - ext.value(z - h)) / (2 * h);
      Complex dy = (ext.value(z + Complex(0, h)) - ext.value(z - Complex(0, h))) / (2 * h);
      Complex fd = 0.5 * (dx + Complex(0, 1) * dy);
      double scale = std::max(1.0, std::abs(ext.value(z)));
      EXPECT_LT(std::abs(ext.dbar(z) - fd), 1e-6 * scale * (1 + 1 / std::abs(z.imag()))) << f.name() << " " << z;
    });
  }
}

TEST(Extension, FlatnessBoundHoldsAtRandomPoints) {
  auto M = make_gevrey(1.0);
  for (const auto& f : {models::exp_inv(), models::sine(), models::square()}) {
    auto r = almost_analytic_extension(f, M);
    ASSERT_GT(r.flatness.c2, 0);
    prop::for_all(300, [&](prop::Gen& g) {
      double y = g.log_uniform(1e-3, std::sinh(1.0));
      Complex z(g.uniform(-r.extension.reach(), r.extension.reach()), g.coin() ? y : -y);
      double bound = r.flatness.c1 * h_M(M, r.flatness.c2 * y);
      EXPECT_LE(std::abs(r.extension.dbar(z)), 1.05 * bound + r.flatness.noise_floor) << f.name() << " " << z;
    });
  }
}

TEST(Extension, ExpInvProfileDecaysLikeExpOfMinusCOverY) {
  auto r = almost_analytic_extension(models::exp_inv(), make_gevrey(1.0));
  auto D = [&](double y) {
    double d = 0;
    for (double x : chebyshev_points(-r.extension.reach(), r.extension.reach(), 401))
      d = std::max(d, std::abs(r.extension.dbar(Complex(x, y))));
    return d;
  };
  // Gevrey-1 weights: h_M(t) ~ exp(-1/(e t)), so y * ln(1/|dbar g|) stays roughly constant
  std::vector<double> c;
  for (double y : {0.005, 0.01, 0.02}) c.push_back(-y * std::log(D(y)));
  double lo = *std::min_element(c.begin(), c.end()), hi = *std::max_element(c.begin(), c.end());
  EXPECT_GT(lo, 0);
  EXPECT_LT(hi / lo, 1.5);
  EXPECT_LT(D(0.005), 1e-20);
  EXPECT_GT(D(0.16), 1e-2);
}

TEST(Extension, DerivativeBlowupNamesTheOffender) {
  // exp(-1/x) is not in the analytic class at scale sigma = 1
  try {
    AlmostAnalyticExtension bad(models::exp_inv(), analytic_weights(), 1.0);
    FAIL() << "expected a blowup error";
  } catch (const DomainError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("x = "), std::string::npos);
    EXPECT_NE(msg.find("j = "), std::string::npos);
  }
}

TEST(CarlemanNorm, Examples) {
  auto M1 = make_gevrey(1.0), M0 = analytic_weights();
  EXPECT_EQ(carleman_norm(models::zero(), -1, 1, 1.0, 20, M1).norm_estimate, 0.0);
  EXPECT_LE(carleman_norm(models::sine(), -1, 1, 1.0, 20, M1).norm_estimate, 1.0);
  // f^{(j)} = j! 2^{-j} (1 - x/2)^{-(j+1)}: sup at x = 1 is 2 j!
  auto r1 = carleman_norm(models::geometric_half(), -1, 1, 1.0, 20, M1);
  auto r0 = carleman_norm(models::geometric_half(), -1, 1, 1.0, 20, M0);
  for (std::size_t j = 0; j <= 20; ++j) {
    EXPECT_NEAR(r1.per_j[j] / (2 / std::tgamma(j + 1.0)), 1.0, 1e-12) << j;
    EXPECT_NEAR(r0.per_j[j], 2.0, 1e-12) << j;
  }
}

TEST(CarlemanNorm, MonotoneInSigmaAndJ) {
  auto M = make_gevrey(1.0);
  prop::for_all(20, [&](prop::Gen& g) {
    double s1 = g.log_uniform(0.1, 10), s2 = s1 * g.uniform(1, 4);
    auto f = g.coin() ? models::exp_inv() : models::sine();
    EXPECT_GE(carleman_norm(f, -1, 1, s1, 15, M).norm_estimate, carleman_norm(f, -1, 1, s2, 15, M).norm_estimate);
    EXPECT_LE(carleman_norm(f, -1, 1, s1, 10, M).norm_estimate, carleman_norm(f, -1, 1, s1, 20, M).norm_estimate);
  });
}

TEST(CarlemanNorm, ReportIsMaxOfProfile) {
  auto r = carleman_norm(models::exp_inv(), -0.5, 1, 2.0, 25, make_gevrey(1.0));
  EXPECT_EQ(r.norm_estimate, *std::max_element(r.per_j.begin(), r.per_j.end()));
  EXPECT_EQ(r.J_used, 25u);
}

TEST(CarlemanNorm, FitSigmaForExponential) {
  // sup|f^{(j)}| / (j! M_j) = a^j e^a / j! with M = 1: worst ratio at j = 1
  EXPECT_NEAR(fit_sigma(models::exp_linear(0.7), -1, 1, 20, analytic_weights()), 0.7, 1e-12);
}

TEST(Family, ZeroFunctionGivesZeroFamily) {
  auto fb = build_family(models::zero(), make_gevrey(1.0), 1.0, 3);
  for (const auto& s : fb.family.series)
    for (auto c : s.coeffs) EXPECT_EQ(c, Complex(0.0));
  EXPECT_TRUE(fb.report.ok);
  auto rec = reconstruct_from_family(fb.family, 0.5);
  EXPECT_EQ(rec.norm.norm_estimate, 0.0);
  EXPECT_EQ(rec.model.value(0.3L), 0.0L);
}

TEST(Family, IdentityPassesWithDecayingErrors) {
  FamilyOptions opt;
  opt.grid_route_cells = 1 << 16;
  auto fb = build_family(models::identity(), make_gevrey(1.0), 1.0, 5, opt);
  ASSERT_TRUE(fb.report.ok) << fb.report.failure;
  for (const auto& r : fb.report.rungs) {
    EXPECT_TRUE(r.holomorphic);
    EXPECT_TRUE(r.bounded);
    EXPECT_TRUE(r.interval_ok);
    // the grid route g - K*(1_Omega dbar g) agrees to O(h)
    ASSERT_TRUE(r.grid_route_difference.has_value());
    EXPECT_LT(*r.grid_route_difference, grid_for(r.eps, 1 << 16).h);
  }
  // analytic input: slope >= 1 over the rungs above the floor
  if (!std::isnan(fb.report.error_slope)) EXPECT_GE(fb.report.error_slope, 1.0);
  EXPECT_LT(fb.report.rungs.back().interval_error, 1e-12);
  // the family constants are the derived ones
  const auto& L = fb.family.constants;
  EXPECT_EQ(L.entry("c1").provenance, Provenance::derived);
  EXPECT_NEAR(L.get("c1"), 2 * std::sqrt(std::cosh(1.0) * std::sinh(1.0)) * L.get("flat_c1"), 1e-12);
}

TEST(Family, ExpInvPassesAtDepthFive) {
  auto fb = build_family(models::exp_inv(), make_gevrey(1.0), 1.0, 5);
  ASSERT_TRUE(fb.report.ok) << fb.report.failure;
  // errors decrease along the ladder
  for (std::size_t k = 1; k < fb.report.rungs.size(); ++k)
    EXPECT_LT(fb.report.rungs[k].interval_error, fb.report.rungs[k - 1].interval_error);
  EXPECT_GE(fb.report.error_slope, 1.0);
}

TEST(Family, VerifyDetectsCorruptedRung) {
  auto fb = build_family(models::square(), make_gevrey(1.0), 1.0, 5);
  auto fam = fb.family;
  fam.series[4].coeffs[0] += 0.5;  // shifts the interval values
  auto rep = verify_family(fam, nullptr, {});
  auto target = models::square();
  auto rep2 = verify_family(fam, &target, {});
  EXPECT_TRUE(rep.ok);  // holomorphic and bounded still
  EXPECT_FALSE(rep2.ok);
  EXPECT_NE(rep2.failure.find("interval approximation"), std::string::npos);
  EXPECT_NE(rep2.failure.find("rung 4"), std::string::npos);
  // a non-holomorphic grid is rejected by the detector
  auto gf = fam.grid_function(0);
  for (auto& v : gf.data()) v = std::conj(v);
  gf.data()[gf.grid().index(gf.grid().nx / 2, gf.grid().ny / 2)] += 1.0;
  EXPECT_FALSE(holomorphy_check(gf, fam.eps[0]).accepted);
}

TEST(Family, SaveLoadRoundTrip) {
  auto fb = build_family(models::sine(), make_gevrey(1.0), 0.5, 3);
  auto dir = temp_dir("roundtrip");
  save_family(fb.family, dir);
  auto loaded = load_family(dir);
  const auto& a = fb.family;
  const auto& b = loaded.family;
  EXPECT_EQ(b.target, a.target);
  EXPECT_EQ(b.sequence.spec_string(), a.sequence.spec_string());
  ASSERT_EQ(b.depth(), a.depth());
  for (std::size_t k = 0; k < a.depth(); ++k) {
    EXPECT_EQ(b.eps[k], a.eps[k]);
    EXPECT_EQ(b.series[k].coeffs, a.series[k].coeffs);
    EXPECT_EQ(loaded.grids[k].data(), a.grid_function(k).data());
  }
  EXPECT_EQ(b.K(), a.K());
  auto target = models::sine();
  EXPECT_TRUE(verify_family(b, &target).ok);
  // tampering with a stored grid is detected
  auto g0 = loaded.grids[0];
  for (auto& v : g0.data()) v *= 2.0;
  write_binary(g0, (std::filesystem::path(dir) / "rung_0.bin").string());
  EXPECT_THROW(load_family(dir), DataError);
  std::filesystem::remove(std::filesystem::path(dir) / "manifest.json");
  EXPECT_THROW(load_family(dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST(Reconstruction, IdentityMatchesWithinFinalRungBound) {
  auto fb = build_family(models::identity(), make_gevrey(1.0), 1.0, 5);
  auto rec = reconstruct_from_family(fb.family, 0.5);
  double err = 0;
  for (double x : chebyshev_points(-0.5, 0.5, 501)) err = std::max(err, static_cast<double>(std::abs(rec.model.value(x) - x)));
  EXPECT_LE(err, 10 * fb.family.interval_bound(fb.family.eps.back()));
  EXPECT_TRUE(std::isfinite(rec.norm.norm_estimate));
  EXPECT_GT(rec.norm.norm_estimate, 0);
  for (const auto& ic : rec.increments) EXPECT_TRUE(ic.verified);
}

TEST(Reconstruction, ExpInvRoundTripWithinBoundPlusTail) {
  auto f = models::exp_inv();
  auto fb = build_family(f, make_gevrey(1.0), 1.0, 5);
  auto rec = reconstruct_from_family(fb.family, 0.5);
  double err = 0;
  for (double x : chebyshev_points(-0.5, 0.5, 501))
    err = std::max(err, static_cast<double>(std::abs(rec.model.value(x) - f.value(x))));
  EXPECT_LE(err, rec.value_bound);
  EXPECT_EQ(rec.increments.size(), 4u);
  // increments obey the propagated bound on Omega_{eps/2}
  for (const auto& ic : rec.increments) EXPECT_LE(ic.worst_ratio, 1.0);
  // the reconstructed model's derivatives respect the Cauchy-estimate profile
  auto direct = carleman_norm(rec.model, -0.5, 0.5, rec.norm.sigma, 10, fb.family.sequence);
  for (std::size_t j = 0; j <= 10; ++j) EXPECT_LE(direct.per_j[j], rec.norm.per_j[j] * (1 + 1e-9)) << j;
}

TEST(Reconstruction, RejectsBadArguments) {
  auto fb = build_family(models::identity(), make_gevrey(1.0), 1.0, 2);
  EXPECT_THROW(reconstruct_from_family(fb.family, 1.0), DomainError);
  EXPECT_THROW(reconstruct_from_family(fb.family, 0.0), DomainError);
  auto fam = fb.family;
  fam.series.pop_back();
  fam.eps.pop_back();
  EXPECT_THROW(reconstruct_from_family(fam, 0.5), DomainError);
}

TEST(Classify, PolynomialAndAnalyticAreMembers) {
  auto M = make_gevrey(1.0);
  auto v = classify_regularity(models::square(), M, 0.9);
  EXPECT_EQ(v.kind, RegularityVerdict::Kind::member);
  EXPECT_EQ(classify_regularity(models::sine(), analytic_weights(), 0.9).kind, RegularityVerdict::Kind::member);
}

TEST(Classify, ExpInvAgainstAnalyticWeightsIsNotAMember) {
  auto v = classify_regularity(models::exp_inv(), analytic_weights(), 0.9);
  EXPECT_EQ(v.kind, RegularityVerdict::Kind::non_member) << v.evidence;
  EXPECT_GT(v.excess_exponent, 1.0);
  auto g = classify_regularity(models::exp_inv(), make_gevrey(1.0), 0.9);
  EXPECT_EQ(g.kind, RegularityVerdict::Kind::member) << g.evidence;
  EXPECT_LT(std::abs(g.excess_exponent), 0.5);
}
