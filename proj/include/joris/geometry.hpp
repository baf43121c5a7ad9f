#pragma once

// Confocal ellipses Omega_eps = phi_eps(strip) with foci +-1, semi-axes
// cosh(eps) and sinh(eps); the disk cover used to localize level-set energy;
// and the smooth cutoff chi_eps.

#include "joris/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace joris {

using Complex = std::complex<double>;

inline Complex phi_eps(double eps, Complex z) { return std::sin(eps * z); }

/// Elliptic radius: z lies on the boundary of Omega_s. Zero on [-1,1].
inline double s_parameter(Complex z) {
  // z = cosh(s + i theta); complex acosh avoids the cancellation of the
  // focal-distance form near the segment.
  return std::abs(std::acosh(z).real());
}

/// Elliptic angle theta with z = cosh(s) cos(theta) + i sinh(s) sin(theta).
inline double elliptic_angle(Complex z) {
  Complex w = std::acosh(z);
  return w.real() >= 0 ? w.imag() : -w.imag();
}

/// Derivative of s_parameter with respect to z-bar (zero on the segment by convention).
inline Complex s_parameter_dbar(Complex z) {
  Complex w = std::acosh(z);
  Complex dw = 1.0 / (std::sqrt(z - 1.0) * std::sqrt(z + 1.0));
  if (!std::isfinite(dw.real()) || !std::isfinite(dw.imag())) return 0.0;
  double sign = w.real() >= 0 ? 1.0 : -1.0;
  return 0.5 * sign * std::conj(dw);
}

struct EllipseDomain {
  double epsilon;

  explicit EllipseDomain(double eps) : epsilon(eps) {
    if (!(eps > 0) || !std::isfinite(eps)) throw DomainError("ellipse parameter must be > 0");
  }
  double semi_major() const { return std::cosh(epsilon); }
  double semi_minor() const { return std::sinh(epsilon); }
  bool contains(Complex z) const { return s_parameter(z) < epsilon; }
  Complex boundary_point(double theta) const {
    return {semi_major() * std::cos(theta), semi_minor() * std::sin(theta)};
  }
};

/// Distance from (x, y) to the ellipse curve x^2/a^2 + y^2/b^2 = 1 (a >= b > 0).
/// Robust root bisection on the Lagrange-multiplier equation.
inline double point_ellipse_distance(double a, double b, double x, double y) {
  x = std::abs(x);
  y = std::abs(y);
  if (y > 0) {
    if (x > 0) {
      double z0 = x / a, z1 = y / b;
      double g = z0 * z0 + z1 * z1 - 1;
      if (g == 0) return 0;
      double r0 = (a / b) * (a / b);
      double n0 = r0 * z0;
      double s0 = z1 - 1, s1 = g < 0 ? 0 : std::hypot(n0, z1) - 1;
      double s = 0;
      for (int i = 0; i < 200; ++i) {
        s = 0.5 * (s0 + s1);
        if (s == s0 || s == s1) break;
        double ratio0 = n0 / (s + r0), ratio1 = z1 / (s + 1);
        double gs = ratio0 * ratio0 + ratio1 * ratio1 - 1;
        if (gs > 0) s0 = s;
        else if (gs < 0) s1 = s;
        else break;
      }
      double px = r0 * x / (s + r0), py = y / (s + 1);
      return std::hypot(x - px, y - py);
    }
    return std::abs(y - b);
  }
  double numer = a * x, denom = a * a - b * b;
  if (numer < denom) {
    double xd = numer / denom;
    double px = a * xd, py = b * std::sqrt(std::max(0.0, 1 - xd * xd));
    return std::hypot(x - px, py);
  }
  return std::abs(x - a);
}

/// Distance from z to the closed set Omega_eps (zero inside).
inline double distance_to_domain(double eps, Complex z) {
  if (s_parameter(z) <= eps) return 0.0;
  return point_ellipse_distance(std::cosh(eps), std::sinh(eps), z.real(), z.imag());
}

/// Distance from z to the boundary of Omega_eps.
inline double distance_to_boundary(double eps, Complex z) {
  return point_ellipse_distance(std::cosh(eps), std::sinh(eps), z.real(), z.imag());
}

/// Minimum over sampled boundary points of Omega_{eps/2} of their distance
/// to the boundary of Omega_eps, refined by golden-section search.
inline double boundary_gap(double eps, std::size_t samples = 4096) {
  if (!(eps > 0) || eps > 1) throw DomainError("boundary_gap: need 0 < eps <= 1");
  EllipseDomain inner(eps / 2);
  const double a = std::cosh(eps), b = std::sinh(eps);
  auto f = [&](double th) {
    Complex p = inner.boundary_point(th);
    return point_ellipse_distance(a, b, p.real(), p.imag());
  };
  const double quarter = std::numbers::pi / 2;
  double best = f(0), best_th = 0;
  for (std::size_t i = 1; i <= samples; ++i) {
    double th = quarter * static_cast<double>(i) / static_cast<double>(samples);
    double v = f(th);
    if (v < best) best = v, best_th = th;
  }
  double step = quarter / static_cast<double>(samples);
  double lo = std::max(0.0, best_th - step), hi = std::min(quarter, best_th + step);
  const double gr = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 100; ++it) {
    double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
    if (f(m1) < f(m2)) hi = m2;
    else lo = m1;
  }
  return std::min(best, f(0.5 * (lo + hi)));
}

// ---------------------------------------------------------------------------
// Disk cover

/// Square-lattice cover of Omega_{eps/2} by disks D(c, eta), eta = eps^2/16,
/// lattice spacing eta*sqrt(2). Stored row by row: row y_k = k*spacing holds
/// the centers x = i*spacing for |i| <= half_width[k].
class DiskCover {
 public:
  struct Row {
    std::int64_t k;
    std::int64_t half_width;
  };

  DiskCover(double eps, double radius, double spacing, std::vector<Row> rows)
      : eps_(eps), radius_(radius), spacing_(spacing), rows_(std::move(rows)) {
    for (const auto& r : rows_) count_ += static_cast<std::size_t>(2 * r.half_width + 1);
  }

  double epsilon() const { return eps_; }
  double radius() const { return radius_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return count_; }
  const std::vector<Row>& rows() const { return rows_; }

  void for_each_center(const std::function<void(Complex)>& fn) const {
    for (const auto& r : rows_)
      for (std::int64_t i = -r.half_width; i <= r.half_width; ++i)
        fn({static_cast<double>(i) * spacing_, static_cast<double>(r.k) * spacing_});
  }

  std::vector<Complex> centers() const {
    std::vector<Complex> out;
    out.reserve(count_);
    for_each_center([&](Complex c) { out.push_back(c); });
    return out;
  }

  /// Whether the lattice point (i, k) is a center.
  bool has_center(std::int64_t i, std::int64_t k) const {
    if (rows_.empty()) return false;
    std::int64_t k0 = rows_.front().k;
    if (k < k0 || k > rows_.back().k) return false;
    const auto& r = rows_[static_cast<std::size_t>(k - k0)];
    return std::abs(i) <= r.half_width;
  }

  /// Whether z lies in some closed disk D(c, radius) of the cover.
  bool covers(Complex z) const {
    double fx = z.real() / spacing_, fy = z.imag() / spacing_;
    std::int64_t i0 = static_cast<std::int64_t>(std::floor(fx)), k0 = static_cast<std::int64_t>(std::floor(fy));
    const double tol = radius_ * (1 + 1e-12);
    for (std::int64_t di = 0; di <= 1; ++di)
      for (std::int64_t dk = 0; dk <= 1; ++dk) {
        std::int64_t i = i0 + di, k = k0 + dk;
        Complex c(static_cast<double>(i) * spacing_, static_cast<double>(k) * spacing_);
        if (std::abs(z - c) <= tol && has_center(i, k)) return true;
      }
    return false;
  }

  /// Largest disk radius rho such that every D(c, rho) lies in Omega_eps
  /// (min over centers of the distance to the boundary). Uses concavity of the
  /// boundary distance inside a convex set: row endpoints attain the minimum.
  double min_boundary_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : rows_) {
      Complex c(static_cast<double>(r.half_width) * spacing_, static_cast<double>(r.k) * spacing_);
      if (s_parameter(c) >= eps_) return 0.0;
      best = std::min(best, distance_to_boundary(eps_, c));
    }
    return best;
  }

 private:
  double eps_, radius_, spacing_;
  std::vector<Row> rows_;
  std::size_t count_ = 0;
};

inline DiskCover build_cover(double eps) {
  if (!(eps > 0) || eps > 1) throw DomainError("build_cover: need 0 < eps <= 1");
  const double eta = eps * eps / 16;
  const double d = eta * std::sqrt(2.0);
  const double a = std::cosh(eps / 2), b = std::sinh(eps / 2);
  const double half = eps / 2;
  const auto kmax = static_cast<std::int64_t>(std::floor((b + eta) / d));
  std::vector<DiskCover::Row> rows;
  for (std::int64_t k = -kmax; k <= kmax; ++k) {
    double y = static_cast<double>(k) * d;
    auto meets = [&](double x) { return distance_to_domain(half, {x, y}) <= eta; };
    if (!meets(0)) continue;
    // Largest x >= 0 on the row with dist <= eta (convex neighbourhood -> interval).
    double lo = 0, hi = a + eta + d;
    for (int it = 0; it < 80; ++it) {
      double mid = 0.5 * (lo + hi);
      if (meets(mid)) lo = mid;
      else hi = mid;
    }
    rows.push_back({k, static_cast<std::int64_t>(std::floor(lo / d))});
  }
  // Rows are contiguous in k by convexity; keep the invariant explicit.
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].k != rows[i - 1].k + 1) throw PreconditionError("build_cover: non-contiguous rows");
  return DiskCover(eps, eta, d, std::move(rows));
}

struct CoverCheck {
  bool covering = false;
  bool safety = false;
  double min_boundary_distance = 0;  // must be >= 2 * radius for safety
  std::size_t samples = 0;
};

/// Covering check on a polar sample of Omega_{eps/2} (boundary included) and
/// safety check of D(c, 2 eta) inside Omega_eps.
inline CoverCheck check_cover(const DiskCover& cover, std::size_t n_radial = 100, std::size_t n_angular = 100) {
  CoverCheck out;
  const double half = cover.epsilon() / 2;
  const double a = std::cosh(half), b = std::sinh(half);
  out.covering = true;
  for (std::size_t i = 0; i <= n_radial; ++i) {
    double r = static_cast<double>(i) / static_cast<double>(n_radial);
    for (std::size_t j = 0; j < n_angular; ++j) {
      double th = 2 * std::numbers::pi * (static_cast<double>(j) + 0.5 * static_cast<double>(i % 2)) /
                  static_cast<double>(n_angular);
      Complex z(r * a * std::cos(th), r * b * std::sin(th));
      ++out.samples;
      if (!cover.covers(z)) out.covering = false;
    }
  }
  out.min_boundary_distance = cover.min_boundary_distance();
  out.safety = out.min_boundary_distance >= 2 * cover.radius();
  return out;
}

/// Disk-cover JSON: epsilon, radius, centers as [re, im] pairs.
inline nlohmann::json cover_to_json(const DiskCover& cover) {
  nlohmann::json centers = nlohmann::json::array();
  cover.for_each_center([&](Complex c) { centers.push_back({c.real(), c.imag()}); });
  return {{"epsilon", cover.epsilon()}, {"radius", cover.radius()}, {"spacing", cover.spacing()},
          {"count", cover.size()}, {"centers", std::move(centers)}};
}

// ---------------------------------------------------------------------------
// Cutoff

namespace detail {

inline double bump_psi(double t) { return t > 0 ? std::exp(-1 / t) : 0.0; }

inline double bump_psi_prime(double t) { return t > 0 ? std::exp(-1 / t) / (t * t) : 0.0; }

/// Smooth step: 0 for t <= 0, 1 for t >= 1.
inline double smooth_step(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  double p = bump_psi(t), q = bump_psi(1 - t);
  return p / (p + q);
}

inline double smooth_step_prime(double t) {
  if (t <= 0 || t >= 1) return 0;
  double p = bump_psi(t), q = bump_psi(1 - t);
  double dp = bump_psi_prime(t), dq = -bump_psi_prime(1 - t);
  return (dp * q - p * dq) / ((p + q) * (p + q));
}

}  // namespace detail

/// chi_eps: 1 on Omega_{eps/2}, 0 outside Omega_{3 eps/4}.
inline double cutoff_chi(double eps, Complex z) {
  if (!(eps > 0)) throw DomainError("cutoff_chi: eps must be > 0");
  double tau = (s_parameter(z) - eps / 2) / (eps / 4);
  return 1 - detail::smooth_step(tau);
}

/// d(chi_eps)/d(z-bar).
inline Complex cutoff_chi_dbar(double eps, Complex z) {
  if (!(eps > 0)) throw DomainError("cutoff_chi: eps must be > 0");
  double tau = (s_parameter(z) - eps / 2) / (eps / 4);
  double d = detail::smooth_step_prime(tau);
  if (d == 0) return 0.0;
  return -d / (eps / 4) * s_parameter_dbar(z);
}

}  // namespace joris
