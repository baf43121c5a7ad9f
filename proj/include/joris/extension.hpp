#pragma once

// Holomorphic approximant families on the ellipses Omega_eps: construction
// from derivative data through an almost-analytic extension, verification,
// persistence, and reconstruction of C_M bounds from a family.

#include "joris/dbar.hpp"
#include "joris/errors.hpp"
#include "joris/geometry.hpp"
#include "joris/grid.hpp"
#include "joris/ledger.hpp"
#include "joris/smooth_model.hpp"
#include "joris/weights.hpp"

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace joris {

// ---------------------------------------------------------------------------
// Sampling helpers

/// n Chebyshev-Lobatto points on [a, b] (endpoints included), ascending.
inline std::vector<double> chebyshev_points(double a, double b, std::size_t n) {
  if (n < 2) throw DomainError("chebyshev_points: need n >= 2");
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k)
    x[k] = 0.5 * (a + b) - 0.5 * (b - a) * std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1));
  x.front() = a;
  x.back() = b;
  return x;
}

inline constexpr std::size_t kIntervalSamples = 1001;

/// Points of Omega_eps on confocal ellipses s = eps (i + 1/2)/ns, ns x nt in total.
inline std::vector<Complex> domain_samples(double eps, std::size_t ns = 64, std::size_t nt = 256) {
  std::vector<Complex> out;
  out.reserve(ns * nt + 2);
  for (std::size_t i = 0; i < ns; ++i) {
    double s = eps * (static_cast<double>(i) + 0.5) / static_cast<double>(ns);
    for (std::size_t k = 0; k < nt; ++k)
      out.push_back(EllipseDomain(s).boundary_point(2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nt)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chebyshev series with complex coefficients

struct ChebyshevSeries {
  std::vector<Complex> coeffs;

  std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }

  /// Clenshaw recurrence.
  Complex operator()(Complex z) const {
    if (coeffs.empty()) return 0.0;
    Complex b1 = 0.0, b2 = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 1;) {
      Complex t = 2.0 * z * b1 - b2 + coeffs[k];
      b2 = b1;
      b1 = t;
    }
    return z * b1 - b2 + coeffs[0];
  }

  ChebyshevSeries derivative() const {
    ChebyshevSeries d;
    const std::size_t n = coeffs.size();
    if (n <= 1) return d;
    d.coeffs.assign(n - 1, 0.0);
    for (std::size_t k = n - 1; k >= 1; --k) {
      Complex next = (k + 1 < n - 1) ? d.coeffs[k + 1] : Complex(0.0);
      d.coeffs[k - 1] = next + 2.0 * static_cast<double>(k) * coeffs[k];
      if (k == 1) break;
    }
    d.coeffs[0] *= 0.5;
    return d;
  }

  friend ChebyshevSeries operator-(const ChebyshevSeries& a, const ChebyshevSeries& b) {
    ChebyshevSeries out;
    out.coeffs.assign(std::max(a.coeffs.size(), b.coeffs.size()), 0.0);
    for (std::size_t k = 0; k < a.coeffs.size(); ++k) out.coeffs[k] += a.coeffs[k];
    for (std::size_t k = 0; k < b.coeffs.size(); ++k) out.coeffs[k] -= b.coeffs[k];
    return out;
  }
};

/// Degree used on Omega_eps: the factor e^{-k eps} reaches e^{-36} at k = n.
inline std::size_t cauchy_degree(double eps) { return static_cast<std::size_t>(std::ceil(36.0 / eps)); }

/// Cauchy integral over the boundary of Omega_eps of the boundary values of
/// fn, as a Chebyshev series. With G(theta) = fn(cosh(eps) cos(theta) + i sinh(eps) sin(theta))
/// and G_k its Fourier coefficients, the integral equals G_0 + sum_{k>=1} 2 G_k e^{-k eps} T_k(z)
/// inside the ellipse.
/// `oversample` nodes per coefficient; raise it for boundary data with kinks.
inline ChebyshevSeries cauchy_approximant(const std::function<Complex(Complex)>& fn, double eps,
                                          std::optional<std::size_t> degree = std::nullopt,
                                          std::size_t oversample = 4) {
  if (!(eps > 0)) throw DomainError("cauchy_approximant: eps must be > 0");
  const std::size_t n = degree ? *degree : cauchy_degree(eps);
  const std::size_t nodes = std::max<std::size_t>(64, std::bit_ceil(std::max<std::size_t>(oversample, 4) * (n + 1)));
  detail::FftwBuffer buf(nodes);
  Complex* G = buf.data();
  const EllipseDomain E(eps);
  for (std::size_t m = 0; m < nodes; ++m)
    G[m] = fn(E.boundary_point(2 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(nodes)));
  detail::Plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan.p = fftw_plan_dft_1d(static_cast<int>(nodes), buf.ptr, buf.ptr, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (!plan.p) throw std::runtime_error("fftw plan creation failed");
  fftw_execute(plan.p);
  ChebyshevSeries out;
  out.coeffs.resize(n + 1);
  const double inv = 1.0 / static_cast<double>(nodes);
  for (std::size_t k = 0; k <= n; ++k) {
    Complex gk = G[k] * inv;
    out.coeffs[k] = k == 0 ? gk : 2.0 * gk * std::exp(-static_cast<double>(k) * eps);
  }
  return out;
}

/// Samples an entire function (a series) on the cells of grid_for(eps) within
/// 3h of Omega_eps, so that difference stencils centred in Omega_{3 eps/4} stay on data.
inline GridFunction sample_on_domain(const std::function<Complex(Complex)>& fn, double eps,
                                     std::optional<Grid> grid = std::nullopt) {
  Grid g = grid ? *grid : grid_for(eps);
  const double band = 3 * g.h;
  return GridFunction::sample(
      g, fn, [eps, band](Complex z) { return s_parameter(z) < eps || distance_to_domain(eps, z) <= band; },
      "Omega_eps+3h");
}

// ---------------------------------------------------------------------------
// Holomorphy detector in elliptic coordinates

/// Values of a series on rows of the elliptic-coordinate grid w = t + i sigma,
/// z = cos w, with square cells of side h = 2 pi / n_t; row r sits at sigma = (r - R) h.
struct EllipticSamples {
  double h = 0;
  std::int64_t nt = 0, R = 0;
  std::vector<Complex> data;  // (2R+1) rows of nt values
  std::int64_t rows() const { return 2 * R + 1; }
  double sigma(std::int64_t r) const { return static_cast<double>(r - R) * h; }
  Complex point(std::int64_t i, std::int64_t r) const { return std::cos(Complex(static_cast<double>(i) * h, sigma(r))); }
  Complex at(std::int64_t i, std::int64_t r) const { return data[static_cast<std::size_t>(r * nt + ((i % nt) + nt) % nt)]; }
};

/// One inverse FFT per row: sum c_k cos(k w) = sum c_k (e^{ikt} e^{-k sigma} + e^{-ikt} e^{k sigma}) / 2.
inline EllipticSamples sample_elliptic(const ChebyshevSeries& s, double eps, std::size_t per_mode = 8) {
  EllipticSamples out;
  const std::size_t n = std::max<std::size_t>(s.coeffs.size(), 1);
  out.nt = static_cast<std::int64_t>(std::max<std::size_t>(64, std::bit_ceil(per_mode * (n + 1))));
  out.h = 2 * std::numbers::pi / static_cast<double>(out.nt);
  out.R = static_cast<std::int64_t>(std::floor(eps / out.h));
  const std::int64_t rows = 2 * out.R + 1;
  out.data.assign(static_cast<std::size_t>(rows * out.nt), Complex(0));
  detail::FftwBuffer buf(static_cast<std::size_t>(out.nt));
  detail::Plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan.p = fftw_plan_dft_1d(static_cast<int>(out.nt), buf.ptr, buf.ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plan.p) throw std::runtime_error("fftw plan creation failed");
  Complex* X = buf.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double sigma = static_cast<double>(r - out.R) * out.h;
    std::fill(X, X + out.nt, Complex(0));
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
      if (k == 0) {
        X[0] += s.coeffs[0];
        continue;
      }
      const double kk = static_cast<double>(k);
      X[k] += 0.5 * s.coeffs[k] * std::exp(-kk * sigma);
      X[static_cast<std::size_t>(out.nt) - k] += 0.5 * s.coeffs[k] * std::exp(kk * sigma);
    }
    fftw_execute(plan.p);
    std::copy(X, X + out.nt, out.data.begin() + r * out.nt);
  }
  return out;
}

/// Detector on elliptic samples of Omega_eps: the fourth-order D-bar residual of
/// F(w) = f(cos w) over |sigma| < 3 eps/4 against 1e-6 sup |F| over |sigma| <= eps.
/// F is holomorphic exactly when f is.
inline HolomorphyReport holomorphy_check(const EllipticSamples& E, double eps) {
  HolomorphyReport out;
  for (auto v : E.data) out.sup_norm = std::max(out.sup_norm, std::abs(v));
  const double h = E.h;
  for (std::int64_t r = 2; r + 2 < 2 * E.R + 1; ++r) {
    if (std::abs(static_cast<double>(r - E.R) * h) >= 0.75 * eps) continue;
    for (std::int64_t i = 0; i < E.nt; ++i) {
      Complex dt = (-E.at(i + 2, r) + 8.0 * E.at(i + 1, r) - 8.0 * E.at(i - 1, r) + E.at(i - 2, r)) / (12 * h);
      Complex ds = (-E.at(i, r + 2) + 8.0 * E.at(i, r + 1) - 8.0 * E.at(i, r - 1) + E.at(i, r - 2)) / (12 * h);
      out.residual = std::max(out.residual, std::abs(0.5 * (dt + Complex(0, 1) * ds)));
    }
  }
  out.tolerance = kHolomorphyRelTol * out.sup_norm;
  out.accepted = out.residual <= out.tolerance;
  return out;
}

/// The grid resolves every mode of the series (8 samples per mode period).
inline HolomorphyReport series_holomorphy_check(const ChebyshevSeries& s, double eps) {
  return holomorphy_check(sample_elliptic(s, eps), eps);
}

// ---------------------------------------------------------------------------
// Carleman norms

struct NormReport {
  double a = -1, b = 1;
  double sigma = 1;
  std::size_t J_used = 0;
  double norm_estimate = 0;
  std::vector<double> per_j;      // sup |f^{(j)}| / (sigma^j j! M_j)
  std::vector<double> log_per_j;  // natural log of per_j (-inf for 0)
};

inline void to_json(nlohmann::json& j, const NormReport& r) {
  j = {{"interval", {r.a, r.b}}, {"sigma", r.sigma}, {"J_used", r.J_used}, {"norm_estimate", r.norm_estimate},
       {"per_j", r.per_j}};
}

namespace detail {

/// ln sup_x |f^{(j)}(x)| / j! for j = 0..J over the sample points.
inline std::vector<double> log_taylor_sup(const SmoothFunctionModel& f, const std::vector<double>& xs, std::size_t J,
                                          bool use_mp) {
  std::vector<double> out(J + 1, -std::numeric_limits<double>::infinity());
  for (double x : xs) {
    if (use_mp) {
      auto c = f.jet_mp(Real(x), J);
      for (std::size_t j = 0; j <= J; ++j)
        if (c[j] != 0) out[j] = std::max(out[j], log(abs(c[j])).convert_to<double>());
    } else {
      auto c = f.jet(x, J);
      for (std::size_t j = 0; j <= J; ++j)
        if (c[j] != 0) out[j] = std::max(out[j], static_cast<double>(std::log(std::abs(c[j]))));
    }
  }
  return out;
}

inline NormReport norm_from_log_sup(const std::vector<double>& lsup, double a, double b, double sigma,
                                    const WeightSequence& M) {
  NormReport r;
  r.a = a;
  r.b = b;
  r.sigma = sigma;
  r.J_used = lsup.size() - 1;
  for (std::size_t j = 0; j < lsup.size(); ++j) {
    double l = lsup[j] - static_cast<double>(j) * std::log(sigma) - M.log_m(j);
    r.log_per_j.push_back(l);
    r.per_j.push_back(std::exp(l));
    r.norm_estimate = std::max(r.norm_estimate, r.per_j.back());
  }
  return r;
}

}  // namespace detail

/// sup over x in [a, b], j <= J of |f^{(j)}(x)| / (sigma^j j! M_j), sampled at
/// kIntervalSamples Chebyshev points. `use_mp` evaluates the jets in extended precision.
inline NormReport carleman_norm(const SmoothFunctionModel& f, double a, double b, double sigma, std::size_t J,
                                const WeightSequence& M, bool use_mp = false) {
  if (!(b > a)) throw DomainError("carleman_norm: need a < b");
  if (!(sigma > 0)) throw DomainError("carleman_norm: sigma must be > 0");
  if (J > f.j_max()) throw DomainError("carleman_norm: J exceeds the model's J_max");
  auto xs = chebyshev_points(a, b, kIntervalSamples);
  return detail::norm_from_log_sup(detail::log_taylor_sup(f, xs, J, use_mp), a, b, sigma, M);
}

/// Smallest sigma with sup|f^{(j)}| <= sup|f| sigma^j j! M_j for 1 <= j <= J on [a, b].
inline double fit_sigma(const SmoothFunctionModel& f, double a, double b, std::size_t J, const WeightSequence& M) {
  auto xs = chebyshev_points(a, b, kIntervalSamples);
  auto lsup = detail::log_taylor_sup(f, xs, J, false);
  double ref = lsup[0];
  if (!std::isfinite(ref)) ref = *std::max_element(lsup.begin(), lsup.end());
  if (!std::isfinite(ref)) return 1.0;
  double ls = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j <= J; ++j)
    if (std::isfinite(lsup[j])) ls = std::max(ls, (lsup[j] - M.log_m(j) - ref) / static_cast<double>(j));
  return std::isfinite(ls) ? std::max(std::exp(ls), 1e-3) : 1.0;
}

// ---------------------------------------------------------------------------
// Almost-analytic extension

struct FlatnessFit {
  double c1 = 0, c2 = 0;
  double sup_dbar = 0;
  double noise_floor = 0;
  std::vector<std::pair<double, double>> profile;  // (|y|, max_x |dbar g|)
};

inline void to_json(nlohmann::json& j, const FlatnessFit& f) {
  j = {{"c1", f.c1}, {"c2", f.c2}, {"sup_dbar", f.sup_dbar}, {"noise_floor", f.noise_floor}, {"profile", f.profile}};
}

inline constexpr std::size_t kExtensionOrder = 30;
/// Tolerated growth of sup|f^{(j)}|/(sigma^j j! M_j) over its low-order value.
inline constexpr double kBlowupFactor = 1e3;

/// g(x + iy) = sum_{j <= J} f^{(j)}(x) (iy)^j / j! * chi_j(y), where
/// chi_0 = 1 and chi_j(y) = chi(sigma' |y| / t_{j-1}) with chi = 1 on [0, 1/2],
/// 0 on [1, inf), t_j = M_j / M_{j+1} and sigma' = e sigma.
class AlmostAnalyticExtension {
 public:
  /// `reach` is the half-width of the x-range where f is sampled (cosh of the largest eps used).
  AlmostAnalyticExtension(SmoothFunctionModel f, WeightSequence M, double sigma, double reach = std::cosh(1.0),
                          std::size_t J = kExtensionOrder)
      : f_(std::move(f)), M_(std::move(M)), sigma_(sigma), reach_(reach) {
    if (!(sigma > 0)) throw DomainError("almost-analytic extension: sigma must be > 0");
    J_ = std::min(J, f_.j_max() - 1);
    sigma_prime_ = std::numbers::e * sigma_;
    tau_.assign(J_ + 2, 0.0);
    tau_[0] = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= J_; ++j) tau_[j] = M_.breakpoint(j - 1) / sigma_prime_;
    check_growth_scaling();
  }

  const SmoothFunctionModel& model() const { return f_; }
  const WeightSequence& sequence() const { return M_; }
  double sigma() const { return sigma_; }
  double sigma_prime() const { return sigma_prime_; }
  std::size_t order() const { return J_; }
  double reach() const { return reach_; }

  /// |y| beyond which term j is switched off.
  double cutoff_height(std::size_t j) const { return tau_.at(j); }

  double chi(std::size_t j, double y) const {
    if (j == 0) return 1;
    if (j > J_) return 0;
    return 1 - detail::smooth_step(2 * std::abs(y) / tau_[j] - 1);
  }

  /// d chi_j / dy.
  double chi_prime(std::size_t j, double y) const {
    if (j == 0 || j > J_ || y == 0) return 0;
    double d = -detail::smooth_step_prime(2 * std::abs(y) / tau_[j] - 1) * 2 / tau_[j];
    return y > 0 ? d : -d;
  }

  Complex value(Complex z) const {
    const double y = z.imag();
    const std::size_t top = active_terms(y);
    auto c = f_.jet(z.real(), top);
    Complex sum = 0.0, p = 1.0;
    for (std::size_t j = 0; j <= top; ++j) {
      sum += static_cast<double>(c[j]) * p * chi(j, y);
      p *= Complex(0, y);
    }
    return sum;
  }

  /// Closed form: (1/2)[sum f^{(j+1)}(iy)^j/j! (chi_j - chi_{j+1}) + i sum f^{(j)} (iy)^j/j! chi_j'].
  Complex dbar(Complex z) const {
    const double y = z.imag();
    const std::size_t top = active_terms(y);
    auto c = f_.jet(z.real(), top + 1);
    Complex a = 0.0, b = 0.0, p = 1.0;
    for (std::size_t j = 0; j <= top; ++j) {
      double dchi = chi(j, y) - chi(j + 1, y);
      if (dchi != 0) a += static_cast<double>(c[j + 1]) * static_cast<double>(j + 1) * p * dchi;
      double cp = chi_prime(j, y);
      if (cp != 0) b += static_cast<double>(c[j]) * p * cp;
      p *= Complex(0, y);
    }
    return 0.5 * (a + Complex(0, 1) * b);
  }

  /// Fits |dbar g(x + iy)| <= c1 h_M(c2 |y|) over |x| <= reach, |y| <= y_max.
  FlatnessFit fit_flatness(double y_max) const {
    FlatnessFit fit;
    std::vector<double> ys = log_grid(std::max(tau_[J_] / 8, 1e-6 * y_max), y_max, 160);
    for (std::size_t j = 1; j <= J_; ++j)
      for (int k = 0; k <= 8; ++k) {
        double y = tau_[j] * (0.5 + 0.5 * k / 8.0);
        if (y <= y_max) ys.push_back(y);
      }
    std::sort(ys.begin(), ys.end());
    auto xs = chebyshev_points(-reach_, reach_, 201);
    double gsup = 0;
    for (double y : ys) {
      double d = 0;
      for (double x : xs) {
        d = std::max(d, std::abs(dbar(Complex(x, y))));
        gsup = std::max(gsup, std::abs(value(Complex(x, y))));
      }
      fit.profile.emplace_back(y, d);
      fit.sup_dbar = std::max(fit.sup_dbar, d);
    }
    fit.noise_floor = 1e-13 * std::max(1.0, gsup);
    auto c1_for = [&](double c2) {
      double worst = -std::numeric_limits<double>::infinity();
      for (auto [y, d] : fit.profile) {
        if (d <= fit.noise_floor) continue;
        double lh;
        try {
          lh = log_h(M_, c2 * y);
        } catch (const DomainError&) {
          return std::numeric_limits<double>::infinity();
        }
        worst = std::max(worst, std::log(d) - lh);
      }
      return std::exp(worst);
    };
    if (fit.sup_dbar <= fit.noise_floor) {
      fit.c1 = fit.sup_dbar == 0 ? 0.0 : fit.noise_floor;
      fit.c2 = sigma_prime_;
      return fit;
    }
    // smallest c2 on a geometric grid whose c1 stays within 10x of sup |dbar g|
    const double target = 10 * fit.sup_dbar;
    double chosen = 0, chosen_c1 = 0;
    for (double c2 = 1e-3; c2 <= 1e5; c2 *= std::pow(2.0, 0.25)) {
      double c1 = c1_for(c2);
      if (c1 <= target) {
        chosen = c2;
        chosen_c1 = c1;
        break;
      }
    }
    if (chosen == 0) throw BoundViolation("flatness", "almost-analytic extension: no (c1, c2) fit for dbar g");
    fit.c1 = chosen_c1;
    fit.c2 = chosen;
    return fit;
  }

  /// Samples g on a grid.
  GridFunction sample(const Grid& grid) const {
    return GridFunction::sample(grid, [this](Complex z) { return value(z); });
  }

 private:
  // Largest j with chi_j(y) != 0.
  std::size_t active_terms(double y) const {
    const double a = std::abs(y);
    std::size_t j = 0;
    while (j < J_ && a < tau_[j + 1]) ++j;
    return j;
  }

  void check_growth_scaling() const {
    auto xs = chebyshev_points(-reach_, reach_, 201);
    auto lsup = detail::log_taylor_sup(f_, xs, J_ + 1, false);
    double ref = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= std::min<std::size_t>(2, J_ + 1); ++j)
      ref = std::max(ref, lsup[j] - static_cast<double>(j) * std::log(sigma_) - M_.log_m(j));
    if (!std::isfinite(ref)) return;
    for (std::size_t j = 3; j <= J_ + 1; ++j) {
      double l = lsup[j] - static_cast<double>(j) * std::log(sigma_) - M_.log_m(j);
      if (l > ref + std::log(kBlowupFactor)) {
        // locate the offending x for the message
        double worst_x = xs.front(), worst = -std::numeric_limits<double>::infinity();
        for (double x : xs) {
          double v = std::log(std::abs(static_cast<double>(f_.jet(x, j)[j])));
          if (v > worst) worst = v, worst_x = x;
        }
        throw DomainError("derivative blowup beyond C_{M,sigma} scaling at x = " + std::to_string(worst_x) +
                          ", j = " + std::to_string(j) + " (sigma = " + std::to_string(sigma_) + ")");
      }
    }
  }

  SmoothFunctionModel f_;
  WeightSequence M_;
  double sigma_, sigma_prime_ = 0, reach_;
  std::size_t J_ = 0;
  std::vector<double> tau_;
};

struct ExtensionResult {
  AlmostAnalyticExtension extension;
  FlatnessFit flatness;
};

/// Builds the extension with sigma fitted on [-reach, reach] when not given,
/// and fits the flatness constants for |y| <= sinh(eps_max).
inline ExtensionResult almost_analytic_extension(const SmoothFunctionModel& f, const WeightSequence& M,
                                                 std::optional<double> sigma = std::nullopt, double eps_max = 1.0) {
  const double reach = std::cosh(eps_max);
  const std::size_t J = std::min(kExtensionOrder, f.j_max() - 1);
  double s = sigma ? *sigma : fit_sigma(f, -reach, reach, J + 1, M);
  AlmostAnalyticExtension ext(f, M, s, reach, J);
  auto fit = ext.fit_flatness(std::sinh(eps_max));
  return {std::move(ext), std::move(fit)};
}

// ---------------------------------------------------------------------------
// Approximant families

/// Holomorphic approximants f_eps on Omega_eps, eps = eps0 2^{-k}, k < depth,
/// each stored as a Chebyshev series. Constants K, c1, c2 live in `constants`.
struct ApproximantFamily {
  std::string target;
  WeightSequence sequence;
  double eps0 = 1;
  std::vector<double> eps;
  std::vector<ChebyshevSeries> series;
  ConstantLedger constants;

  std::size_t depth() const { return eps.size(); }
  double K() const { return constants.get("K"); }
  double c1() const { return constants.get("c1"); }
  double c2() const { return constants.get("c2"); }
  double interval_bound(double e) const { return c1() * h_M(sequence, c2() * e); }

  /// The rung sampled on grid_for(eps) over Omega_eps.
  GridFunction grid_function(std::size_t k) const {
    const auto& s = series.at(k);
    return sample_on_domain([&s](Complex z) { return s(z); }, eps.at(k));
  }
};

struct RungCheck {
  double eps = 0;
  double holomorphy_residual = 0, holomorphy_tolerance = 0;
  bool holomorphic = false;
  double sup_domain = 0;
  bool bounded = false;
  double interval_error = 0, interval_bound = 0;
  bool interval_ok = true;
  std::optional<double> grid_route_difference;
};

struct FamilyReport {
  std::vector<RungCheck> rungs;
  bool ok = true;
  std::string failure;
  double noise_floor = 0;
  /// Least-squares slope of log(interval error) against log(eps) over rungs
  /// above 10x the noise floor; NaN when fewer than two such rungs.
  double error_slope = std::numeric_limits<double>::quiet_NaN();
  bool floor_reached = false;
};

inline void to_json(nlohmann::json& j, const RungCheck& r) {
  j = {{"eps", r.eps},
       {"holomorphy_residual", r.holomorphy_residual},
       {"holomorphy_tolerance", r.holomorphy_tolerance},
       {"holomorphic", r.holomorphic},
       {"sup_domain", r.sup_domain},
       {"bounded", r.bounded},
       {"interval_error", r.interval_error},
       {"interval_bound", r.interval_bound},
       {"interval_ok", r.interval_ok}};
  if (r.grid_route_difference) j["grid_route_difference"] = *r.grid_route_difference;
}

inline void to_json(nlohmann::json& j, const FamilyReport& r) {
  j = {{"rungs", r.rungs}, {"ok", r.ok}, {"failure", r.failure}, {"noise_floor", r.noise_floor},
       {"floor_reached", r.floor_reached}};
  j["error_slope"] = std::isnan(r.error_slope) ? nlohmann::json(nullptr) : nlohmann::json(r.error_slope);
}

inline double fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += std::log(xs[i]), my += std::log(ys[i]);
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

struct VerifyOptions {
  bool check_grids = true;
  /// Relative size of the numerical floor added to the interval bound.
  double floor_relative = 1e-12;
};

/// Re-checks holomorphy, the uniform bound K on Omega_eps and, when `target` is
/// given, |f - f_eps| <= c1 h_M(c2 eps) on kIntervalSamples Chebyshev points of [-1,1].
inline FamilyReport verify_family(const ApproximantFamily& fam, const SmoothFunctionModel* target,
                                  const VerifyOptions& opt = {}) {
  FamilyReport rep;
  const double K = fam.K();
  rep.noise_floor = opt.floor_relative * std::max(1.0, K);
  auto fail = [&](const std::string& msg) {
    if (rep.ok) rep.failure = msg;
    rep.ok = false;
  };
  auto xs = chebyshev_points(-1, 1, kIntervalSamples);
  std::vector<double> fx;
  if (target)
    for (double x : xs) fx.push_back(static_cast<double>(target->value(x)));
  std::vector<double> slope_eps, slope_err;
  for (std::size_t k = 0; k < fam.depth(); ++k) {
    RungCheck rc;
    rc.eps = fam.eps[k];
    const auto& s = fam.series[k];
    if (opt.check_grids) {
      auto hc = series_holomorphy_check(s, rc.eps);
      rc.holomorphy_residual = hc.residual;
      rc.holomorphy_tolerance = hc.tolerance;
      rc.holomorphic = hc.accepted;
      rc.sup_domain = hc.sup_norm;
    } else {
      rc.holomorphic = true;
    }
    for (auto z : domain_samples(rc.eps)) rc.sup_domain = std::max(rc.sup_domain, std::abs(s(z)));
    rc.bounded = rc.sup_domain <= K * (1 + 1e-12);
    if (target) {
      for (std::size_t i = 0; i < xs.size(); ++i) rc.interval_error = std::max(rc.interval_error, std::abs(s(xs[i]) - fx[i]));
      rc.interval_bound = fam.interval_bound(rc.eps);
      rc.interval_ok = rc.interval_error <= rc.interval_bound + rep.noise_floor;
      if (rc.interval_error > 10 * rep.noise_floor) {
        slope_eps.push_back(rc.eps);
        slope_err.push_back(rc.interval_error);
      } else {
        rep.floor_reached = true;
      }
    }
    char where[64];
    std::snprintf(where, sizeof where, " at rung %zu (eps = %.6g)", k, rc.eps);
    if (!rc.holomorphic)
      fail("holomorphy failed" + std::string(where) + ": residual " + std::to_string(rc.holomorphy_residual) +
           " > tolerance " + std::to_string(rc.holomorphy_tolerance));
    if (!rc.bounded) fail("uniform bound failed" + std::string(where) + ": sup " + std::to_string(rc.sup_domain) + " > K");
    if (!rc.interval_ok)
      fail("interval approximation failed" + std::string(where) + ": error " + std::to_string(rc.interval_error) +
           " > bound " + std::to_string(rc.interval_bound));
    rep.rungs.push_back(rc);
  }
  rep.error_slope = fit_log_slope(slope_eps, slope_err);
  return rep;
}

struct FamilyOptions {
  std::optional<double> sigma;
  /// Compare against g - K*(1_Omega dbar g) computed on a grid of at most this many cells (0 = skip).
  std::int64_t grid_route_cells = 0;
  bool verify = true;
  bool throw_on_failure = true;
  VerifyOptions verify_options;
};

struct FamilyBuild {
  ApproximantFamily family;
  FlatnessFit flatness;
  double sigma = 0;
  FamilyReport report;
};

/// Grid-route comparison: max over Omega_{eps/2} cells of |(g - K*(1_Omega dbar g)) - f_eps|.
inline double grid_route_difference(const AlmostAnalyticExtension& ext, const ChebyshevSeries& s, double eps,
                                    std::int64_t max_cells) {
  Grid grid = grid_for(eps, max_cells);
  auto inside = [eps](Complex z) { return s_parameter(z) < eps; };
  auto w = GridFunction::sample(grid, [&](Complex z) { return ext.dbar(z); }, inside);
  auto v = cauchy_convolve(w);
  double worst = 0;
  for (std::int64_t j = 0; j < grid.ny; ++j)
    for (std::int64_t i = 0; i < grid.nx; ++i) {
      Complex z = grid.point(i, j);
      if (s_parameter(z) >= eps / 2) continue;
      worst = std::max(worst, std::abs(ext.value(z) - v.at(i, j) - s(z)));
    }
  return worst;
}

/// f_eps is the Cauchy integral over the boundary of Omega_eps of the
/// almost-analytic extension g, which equals g - K*(1_{Omega_eps} dbar g) inside.
/// K = sup |g| + c1' h_M(c2') with the flatness constants (c1', c2'); the family
/// constants follow from |K*(1_Omega w)| <= 2 sqrt(area/pi) sup|w| and
/// sinh(eps) <= eps sinh(eps0)/eps0.
inline FamilyBuild build_family(const SmoothFunctionModel& f, const WeightSequence& M, double eps0, std::size_t depth,
                                const FamilyOptions& opt = {}) {
  if (!(eps0 > 0) || eps0 > 1) throw DomainError("build_family: eps0 must lie in (0, 1]");
  if (depth < 1) throw DomainError("build_family: depth must be >= 1");
  auto ext = almost_analytic_extension(f, M, opt.sigma, eps0);
  FamilyBuild out{ApproximantFamily{}, ext.flatness, ext.extension.sigma(), {}};
  auto& fam = out.family;
  fam.target = f.name();
  fam.sequence = M;
  fam.eps0 = eps0;
  const auto& g = ext.extension;
  double gsup = 0;
  for (auto z : domain_samples(eps0)) gsup = std::max(gsup, std::abs(g.value(z)));
  const double fc1 = ext.flatness.c1, fc2 = ext.flatness.c2;
  fam.constants.record("sigma", g.sigma(), Provenance::fitted, "C_M scale of the input on [-cosh eps0, cosh eps0]");
  fam.constants.record("flat_c1", fc1, Provenance::fitted, "|dbar g| <= flat_c1 h_M(flat_c2 |y|)");
  fam.constants.record("flat_c2", fc2, Provenance::fitted, "|dbar g| <= flat_c1 h_M(flat_c2 |y|)");
  fam.constants.record("K", gsup + fc1 * h_M(M, fc2), Provenance::closed_form, "sup|g| + c1 h_M(c2)");
  fam.constants.record("c1", 2 * std::sqrt(std::cosh(eps0) * std::sinh(eps0)) * fc1, Provenance::derived,
                       "2 sqrt(cosh eps0 sinh eps0) flat_c1");
  fam.constants.record("c2", fc2 * std::sinh(eps0) / eps0, Provenance::derived, "flat_c2 sinh(eps0)/eps0");
  for (std::size_t k = 0; k < depth; ++k) {
    double e = std::ldexp(eps0, -static_cast<int>(k));
    fam.eps.push_back(e);
    fam.series.push_back(cauchy_approximant([&g](Complex z) { return g.value(z); }, e));
  }
  if (opt.verify) {
    out.report = verify_family(fam, &f, opt.verify_options);
    if (opt.grid_route_cells > 0)
      for (std::size_t k = 0; k < depth; ++k)
        out.report.rungs[k].grid_route_difference = grid_route_difference(g, fam.series[k], fam.eps[k], opt.grid_route_cells);
    if (!out.report.ok && opt.throw_on_failure) throw BoundViolation("family", out.report.failure);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: <dir>/manifest.json plus one binary grid function per rung.

inline void save_family(const ApproximantFamily& fam, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json man;
  man["target"] = fam.target;
  man["sequence"] = fam.sequence.spec_string();
  man["eps0"] = fam.eps0;
  man["constants"] = fam.constants.to_json();
  man["ladder"] = nlohmann::json::array();
  for (std::size_t k = 0; k < fam.depth(); ++k) {
    std::string file = "rung_" + std::to_string(k) + ".bin";
    write_binary(fam.grid_function(k), (fs::path(dir) / file).string());
    nlohmann::json coeffs = nlohmann::json::array();
    for (auto c : fam.series[k].coeffs) coeffs.push_back({c.real(), c.imag()});
    man["ladder"].push_back({{"eps", fam.eps[k]}, {"file", file}, {"coefficients", coeffs}});
  }
  write_file_atomic((fs::path(dir) / "manifest.json").string(), man.dump(1));
}

struct LoadedFamily {
  ApproximantFamily family;
  std::vector<GridFunction> grids;
};

inline LoadedFamily load_family(const std::string& dir) {
  namespace fs = std::filesystem;
  nlohmann::json man;
  try {
    man = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("family manifest: ") + e.what());
  }
  LoadedFamily out;
  auto& fam = out.family;
  try {
    fam.target = man.at("target").get<std::string>();
    fam.sequence = parse_sequence(man.at("sequence").get<std::string>());
    fam.eps0 = man.at("eps0").get<double>();
    for (auto& [name, e] : man.at("constants").items()) {
      std::string p = e.at("provenance").get<std::string>();
      Provenance pv = p == "fitted" ? Provenance::fitted
                      : p == "closed-form" ? Provenance::closed_form
                      : p == "assumed" ? Provenance::assumed
                                       : Provenance::derived;
      fam.constants.record(name, e.at("value").get<double>(), pv, e.value("note", ""));
    }
    for (const auto& r : man.at("ladder")) {
      fam.eps.push_back(r.at("eps").get<double>());
      ChebyshevSeries s;
      for (const auto& c : r.at("coefficients")) s.coeffs.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
      fam.series.push_back(std::move(s));
      out.grids.push_back(read_binary((fs::path(dir) / r.at("file").get<std::string>()).string()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("family manifest: ") + e.what());
  }
  fam.constants.require({"K", "c1", "c2"});
  // stored grids must agree with the series they were sampled from
  for (std::size_t k = 0; k < fam.depth(); ++k) {
    const auto& gf = out.grids[k];
    const Grid& gr = gf.grid();
    const double tol = 1e-9 * std::max(1.0, fam.K());
    for (std::int64_t j = 0; j < gr.ny; j += std::max<std::int64_t>(1, gr.ny / 17))
      for (std::int64_t i = 0; i < gr.nx; i += std::max<std::int64_t>(1, gr.nx / 17)) {
        Complex z = gr.point(i, j);
        if (s_parameter(z) >= fam.eps[k]) continue;
        if (std::abs(gf.at(i, j) - fam.series[k](z)) > tol)
          throw DataError("family rung " + std::to_string(k) + ": stored grid disagrees with its coefficients");
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

struct IncrementCheck {
  std::size_t rung = 0;
  double eps = 0;
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0;
  double worst_ratio = 0;
  bool verified = false;
};

struct Reconstruction {
  SmoothFunctionModel model;
  NormReport norm;
  std::vector<IncrementCheck> increments;
  double kappa2 = 0;
  double tail_bound = 0;      // sum over rungs beyond the ladder of a3 h_M(a4 eps)
  double value_bound = 0;     // c1 h_M(c2 eps_min) + tail
  double cauchy_radius_factor = 0;  // rho = factor * eps
};

/// Real part of a Chebyshev series on [-1,1] as a model (jets from derivative series).
inline SmoothFunctionModel series_model(std::string name, const ChebyshevSeries& s, std::size_t j_max = kExtensionOrder) {
  auto ders = std::make_shared<std::vector<std::vector<double>>>();
  ChebyshevSeries cur = s;
  for (std::size_t j = 0; j <= j_max; ++j) {
    std::vector<double> re;
    for (auto c : cur.coeffs) re.push_back(c.real());
    ders->push_back(std::move(re));
    cur = cur.derivative();
  }
  auto eval = [](const std::vector<double>& c, auto u) {
    using T = decltype(u);
    T b1(0), b2(0);
    if (c.empty()) return T(0);
    for (std::size_t k = c.size(); k-- > 1;) {
      T t = T(2) * u * b1 - b2 + T(c[k]);
      b2 = b1;
      b1 = t;
    }
    return T(u * b1 - b2 + T(c[0]));
  };
  auto ld = [ders, eval](long double x, std::size_t n) {
    Jet out(n + 1);
    long double fact = 1;
    for (std::size_t j = 0; j <= n; ++j) {
      if (j) fact *= static_cast<long double>(j);
      out[j] = eval((*ders)[j], x) / fact;
    }
    return out;
  };
  auto mp = [ders, eval](const Real& x, std::size_t n) {
    JetMp out(n + 1);
    Real fact(1);
    for (std::size_t j = 0; j <= n; ++j) {
      if (j) fact *= Real(static_cast<double>(j));
      out[j] = eval((*ders)[j], x) / fact;
    }
    return out;
  };
  return SmoothFunctionModel(std::move(name), "chebyshev", j_max, ld, mp);
}

/// Telescoping sum f_{eps0} + sum (f_{eps_k} - f_{eps_{k-1}}) on [-b, b]. Each
/// increment is checked against the propagated bound a3 h_M(a4 eps) on
/// Omega_{eps/2}; derivative bounds use Cauchy estimates on circles of radius
/// (1-b) eps/4 and give the norm report at sigma = 4 kappa_2 a4 / (1-b) unless
/// sigma_hint > 0.
inline Reconstruction reconstruct_from_family(const ApproximantFamily& fam, double b, double sigma_hint = 0,
                                              std::size_t J = kExtensionOrder) {
  if (!(b > 0) || !(b < 1)) throw DomainError("reconstruct_from_family: b must lie in (0, 1)");
  if (fam.depth() < 2) throw DomainError("reconstruct_from_family: need at least two rungs");
  Reconstruction rec;
  const auto& M = fam.sequence;
  const double K = fam.K(), c1 = fam.c1(), c2 = fam.c2();
  if (K == 0) {
    // |f_eps| <= 0: every rung vanishes
    rec.norm = detail::norm_from_log_sup(std::vector<double>(J + 1, -std::numeric_limits<double>::infinity()), -b, b,
                                         sigma_hint > 0 ? sigma_hint : 1.0, M);
    rec.model = series_model("reconstruction(" + fam.target + ")", ChebyshevSeries{});
    return rec;
  }
  rec.kappa2 = kappa_for(M, 2.0);
  const double L = 2 * K;
  const double floor = 1e-12 * std::max(1.0, K);
  double a3 = 0, a4 = 0;
  for (std::size_t k = 1; k < fam.depth(); ++k) {
    const double e = fam.eps[k];
    ChebyshevSeries d = fam.series[k] - fam.series[k - 1];
    auto gf = sample_on_domain([&d](Complex z) { return d(z); }, e);
    IncrementCheck ic;
    ic.rung = k;
    ic.eps = e;
    ic.a2 = 2 * c2;
    // |d| <= |f - f_eps| + |f - f_{2 eps}| <= 2 c1 h_M(2 c2 eps) on [-1,1], up to the numerical floor
    double hline = h_M(M, ic.a2 * e);
    double measured = 0;
    for (double x : chebyshev_points(-1, 1, kIntervalSamples)) measured = std::max(measured, std::abs(d(x)));
    const Grid& gr = gf.grid();
    for (std::int64_t i = 0; i < gr.nx; ++i) {
      std::int64_t j0 = (gr.ny - 1) / 2;
      if (std::abs(gr.point(i, j0).real()) <= 1) measured = std::max(measured, std::abs(gf.at(i, j0)));
    }
    ic.a1 = 2 * c1;
    if (measured > ic.a1 * hline) {
      if (measured > 2 * c1 * hline + 2 * floor)
        throw BoundViolation("increment", "rung " + std::to_string(k) + ": increment exceeds 2 c1 h_M(2 c2 eps) on [-1,1]");
      ic.a1 = 1.01 * measured / hline;  // absorbs the numerical floor
    }
    auto tl = three_lines_propagate(gf, e, L, ic.a1, ic.a2, M, rec.kappa2);
    ic.a3 = tl.a3;
    ic.a4 = tl.a4;
    ic.worst_ratio = tl.worst_ratio;
    ic.verified = tl.verified;
    if (!ic.verified)
      throw BoundViolation("increment", "rung " + std::to_string(k) + " (eps = " + std::to_string(e) +
                                            "): increment exceeds a3 h_M(a4 eps) on Omega_{eps/2}, ratio " +
                                            std::to_string(ic.worst_ratio));
    a3 = std::max(a3, ic.a3);
    a4 = std::max(a4, ic.a4);
    rec.increments.push_back(ic);
  }
  // tail beyond the ladder
  double e = fam.eps.back() / 2;
  for (int it = 0; it < 2000; ++it, e /= 2) {
    double t;
    try {
      t = a3 * h_M(M, a4 * e);
    } catch (const DomainError&) {
      break;
    }
    rec.tail_bound += t;
    if (t <= 1e-18 * std::max(rec.tail_bound, 1e-300)) break;
  }
  rec.value_bound = fam.interval_bound(fam.eps.back()) + rec.tail_bound;
  // Cauchy estimates: rho_k = (1-b) eps_k / 4, circles centred on [-b, b] inside Omega_{eps_k/2}
  rec.cauchy_radius_factor = (1 - b) / 4;
  for (double x : {-b, 0.0, b})
    for (int i = 0; i < 64; ++i)
      for (double ek : {fam.eps.front(), fam.eps.back()}) {
        Complex z = x + std::polar(rec.cauchy_radius_factor * ek, 2 * std::numbers::pi * i / 64);
        if (s_parameter(z) >= ek / 2) throw PreconditionError("reconstruction: Cauchy circle leaves Omega_{eps/2}");
      }
  const double sigma = sigma_hint > 0 ? sigma_hint : 4 * rec.kappa2 * a4 / (1 - b);
  // per_j = sum_k rho_k^{-j} S_k / (sigma^j M_j), S_0 = K, S_k = a3 h_M(a4 eps_k)
  std::vector<double> lsup(J + 1, -std::numeric_limits<double>::infinity());
  auto lse = [](double a, double c) {
    if (!std::isfinite(a)) return c;
    if (!std::isfinite(c)) return a;
    double m = std::max(a, c);
    return m + std::log(std::exp(a - m) + std::exp(c - m));
  };
  double ek = fam.eps.front();
  for (int k = 0; k < 4000; ++k, ek /= 2) {
    double lS;
    if (k == 0) {
      lS = std::log(K);
    } else {
      try {
        lS = std::log(a3) + log_h(M, a4 * ek);
      } catch (const DomainError&) {
        break;
      }
    }
    const double lrho = std::log(rec.cauchy_radius_factor * ek);
    bool negligible = k > 0;
    for (std::size_t j = 0; j <= J; ++j) {
      // Cauchy: |d^{(j)}|/j! <= rho^{-j} S
      double term = lS - static_cast<double>(j) * lrho;
      double before = lsup[j];
      lsup[j] = lse(lsup[j], term);
      if (!(term < before - 40)) negligible = false;
    }
    if (negligible) break;
  }
  rec.norm = detail::norm_from_log_sup(lsup, -b, b, sigma, M);
  rec.model = series_model("reconstruction(" + fam.target + ")", fam.series.back());
  return rec;
}

// ---------------------------------------------------------------------------
// Regularity classification

struct RegularityVerdict {
  enum class Kind { member, non_member, inconclusive } kind = Kind::inconclusive;
  double sigma_fit = 0;
  double excess_exponent = 0;  // fitted beta in (j!)^beta beyond the onset
  std::string evidence;
  std::vector<double> log_profile;  // ln sup|f^{(j)}|/(j! M_j) on [-b, b]
};

inline const char* to_string(RegularityVerdict::Kind k) {
  switch (k) {
    case RegularityVerdict::Kind::member: return "member";
    case RegularityVerdict::Kind::non_member: return "non_member";
    case RegularityVerdict::Kind::inconclusive: return "inconclusive";
  }
  return "?";
}

inline constexpr std::size_t kRatioOnset = 15;
inline constexpr double kExcessExponentLimit = 0.5;

/// non_member when the profile over the sample points beyond j = 15 fits
/// a + b j + beta (j ln j - j) with beta > 1/2; member(sigma) when for some sigma
/// in 2^{-4..16} the tail never exceeds the maximum up to j = 15; inconclusive
/// otherwise. Extended precision jets are used when the model provides them.
inline RegularityVerdict classify_regularity_at(const SmoothFunctionModel& f, const WeightSequence& M,
                                                const std::vector<double>& xs,
                                                std::size_t J = models::kChebyshevTrustedOrder) {
  if (f.j_max() < 20) throw DomainError("classify_regularity: need J_max >= 20");
  J = std::min(J, f.j_max());
  auto lsup = detail::log_taylor_sup(f, xs, J, f.has_mp());
  RegularityVerdict v;
  for (std::size_t j = 0; j <= J; ++j) v.log_profile.push_back(lsup[j] - M.log_m(j));
  // polynomial-like tails: everything beyond the onset vanishes
  bool tail_zero = true;
  for (std::size_t j = kRatioOnset; j <= J; ++j) tail_zero = tail_zero && !std::isfinite(v.log_profile[j]);
  if (tail_zero) {
    v.kind = RegularityVerdict::Kind::member;
    v.sigma_fit = std::ldexp(1.0, -4);
    v.evidence = "derivatives vanish beyond j = " + std::to_string(kRatioOnset);
    return v;
  }
  // excess factorial growth: least squares lp_j ~ a + b j + beta (j ln j - j) over the tail
  std::vector<std::array<double, 3>> rows;
  std::vector<double> rhs;
  for (std::size_t j = kRatioOnset; j <= J; ++j) {
    if (!std::isfinite(v.log_profile[j])) continue;
    double t = static_cast<double>(j);
    rows.push_back({1.0, t, t * std::log(t) - t});
    rhs.push_back(v.log_profile[j]);
  }
  if (rows.size() >= 8) {
    double A[3][4] = {};
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) A[r][c] += rows[i][r] * rows[i][c];
        A[r][3] += rows[i][r] * rhs[i];
      }
    for (int c = 0; c < 3; ++c)
      for (int r = c + 1; r < 3; ++r) {
        double m = A[r][c] / A[c][c];
        for (int k = c; k < 4; ++k) A[r][k] -= m * A[c][k];
      }
    double beta = A[2][3] / A[2][2];
    v.excess_exponent = beta;
    if (beta > kExcessExponentLimit) {
      v.kind = RegularityVerdict::Kind::non_member;
      v.evidence = "profile outgrows the weights by (j!)^" + std::to_string(beta) + " beyond j = " +
                   std::to_string(kRatioOnset);
      return v;
    }
  }
  for (int e = -4; e <= 16; ++e) {
    double ls = std::log(std::ldexp(1.0, e));
    double head = -std::numeric_limits<double>::infinity(), tail = head;
    for (std::size_t j = 0; j <= J; ++j) {
      double l = v.log_profile[j] - static_cast<double>(j) * ls;
      (j <= kRatioOnset ? head : tail) = std::max(j <= kRatioOnset ? head : tail, l);
    }
    if (tail <= head) {
      v.kind = RegularityVerdict::Kind::member;
      v.sigma_fit = std::ldexp(1.0, e);
      v.evidence = "profile bounded by its head at sigma = " + std::to_string(v.sigma_fit);
      return v;
    }
  }
  v.evidence = "no sigma in [2^-4, 2^16] bounds the tail by the head";
  return v;
}

/// Verdict on [-b, b] from 201 Chebyshev points.
inline RegularityVerdict classify_regularity(const SmoothFunctionModel& f, const WeightSequence& M, double b,
                                             std::size_t J = models::kChebyshevTrustedOrder) {
  return classify_regularity_at(f, M, chebyshev_points(-b, b, 201), J);
}

}  // namespace joris
