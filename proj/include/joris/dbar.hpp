#pragma once

// Cauchy transform v = K * w, K(z) = 1/(pi z), on a uniform grid (so that
// dv/dz-bar = w), plus the estimates built on it: the refined sup bound, the
// level-set energy of a holomorphic function and three-lines propagation.

#include "joris/errors.hpp"
#include "joris/geometry.hpp"
#include "joris/grid.hpp"
#include "joris/weights.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <vector>

namespace joris {

namespace detail {

// Antiderivative in x and y of x / (x^2 + y^2).
inline double cauchy_prim(double x, double y) {
  double r2 = x * x + y * y;
  double v = -y;
  if (r2 > 0) v += 0.5 * y * std::log(r2);
  if (x != 0) v += x * std::atan(y / x);
  return v;
}

inline double rect_integral(double x0, double x1, double y0, double y1, double (*F)(double, double)) {
  return F(x1, y1) - F(x0, y1) - F(x1, y0) + F(x0, y0);
}

inline double cauchy_prim_swapped(double x, double y) { return cauchy_prim(y, x); }

}  // namespace detail

/// Offsets up to this many cells use the exact cell integral of the kernel;
/// beyond it the midpoint rule (error O((h/d)^4) since 1/z is harmonic).
inline constexpr std::int64_t kExactKernelRadius = 48;

/// (1/pi) * integral over the cell of side h centered at (dx h, dy h) of 1/zeta.
/// The central cell integrates to zero by symmetry.
inline Complex cauchy_cell_weight(std::int64_t dx, std::int64_t dy, double h) {
  if (dx == 0 && dy == 0) return 0.0;
  if (std::max(std::abs(dx), std::abs(dy)) > kExactKernelRadius) {
    Complex z(static_cast<double>(dx) * h, static_cast<double>(dy) * h);
    return h * h / (std::numbers::pi * z);
  }
  // Integrate in units of h, then scale by h (1/zeta is homogeneous of degree -1).
  double x0 = static_cast<double>(dx) - 0.5, x1 = static_cast<double>(dx) + 0.5;
  double y0 = static_cast<double>(dy) - 0.5, y1 = static_cast<double>(dy) + 0.5;
  double re = detail::rect_integral(x0, x1, y0, y1, detail::cauchy_prim);
  double im = -detail::rect_integral(x0, x1, y0, y1, detail::cauchy_prim_swapped);
  return h * Complex(re, im) / std::numbers::pi;
}

/// Grids with at most this many cells are convolved by direct summation.
inline constexpr std::int64_t kDirectConvolutionCells = 128 * 128;

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  fftw_complex* ptr = nullptr;
  explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  Complex* data() { return reinterpret_cast<Complex*>(ptr); }
};

struct Plan {
  fftw_plan p = nullptr;
  ~Plan() {
    if (p) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(p);
    }
  }
};

inline void fft2(Complex* data, std::int64_t ny, std::int64_t nx, int sign) {
  Plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    auto* d = reinterpret_cast<fftw_complex*>(data);
    plan.p = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), d, d, sign, FFTW_ESTIMATE);
  }
  if (!plan.p) throw std::runtime_error("fftw plan creation failed");
  fftw_execute(plan.p);
}

struct KernelSpectrum {
  double h = 0;
  std::int64_t px = 0, py = 0;
  std::shared_ptr<FftwBuffer> spectrum;
};

/// Transform of the kernel on the padded (2nx x 2ny) torus; the last one is cached.
inline std::shared_ptr<FftwBuffer> kernel_spectrum(double h, std::int64_t nx, std::int64_t ny) {
  static std::mutex m;
  static KernelSpectrum cache;
  const std::int64_t px = 2 * nx, py = 2 * ny;
  std::lock_guard lock(m);
  if (cache.spectrum && cache.h == h && cache.px == px && cache.py == py) return cache.spectrum;
  cache.spectrum.reset();
  auto buf = std::make_shared<FftwBuffer>(static_cast<std::size_t>(px * py));
  Complex* k = buf->data();
  for (std::int64_t j = 0; j < py; ++j) {
    std::int64_t dy = j < ny ? j : j - py;
    for (std::int64_t i = 0; i < px; ++i) {
      std::int64_t dx = i < nx ? i : i - px;
      bool live = std::abs(dx) < nx && std::abs(dy) < ny;
      k[j * px + i] = live ? cauchy_cell_weight(dx, dy, h) : Complex(0, 0);
    }
  }
  fft2(k, py, px, FFTW_FORWARD);
  cache = {h, px, py, buf};
  return buf;
}

}  // namespace detail

/// v(z) = (1/pi) * sum over cells of w(zeta) * (cell integral of 1/(z - zeta)).
/// Direct summation on small grids, zero-padded FFT convolution otherwise.
inline GridFunction cauchy_convolve(const GridFunction& w, std::optional<bool> force_direct = std::nullopt) {
  const Grid& g = w.grid();
  GridFunction v(g, "plane");
  if (w.is_zero()) return v;
  bool direct = force_direct.value_or(static_cast<std::int64_t>(g.size()) <= kDirectConvolutionCells);
  if (direct) {
    std::vector<Complex> kern(static_cast<std::size_t>((2 * g.nx - 1) * (2 * g.ny - 1)));
    const std::int64_t kx = 2 * g.nx - 1;
    for (std::int64_t dy = -(g.ny - 1); dy < g.ny; ++dy)
      for (std::int64_t dx = -(g.nx - 1); dx < g.nx; ++dx)
        kern[static_cast<std::size_t>((dy + g.ny - 1) * kx + dx + g.nx - 1)] = cauchy_cell_weight(dx, dy, g.h);
    for (std::int64_t qj = 0; qj < g.ny; ++qj)
      for (std::int64_t qi = 0; qi < g.nx; ++qi) {
        Complex wq = w.at(qi, qj);
        if (wq == Complex(0, 0)) continue;
        for (std::int64_t pj = 0; pj < g.ny; ++pj) {
          const Complex* krow = &kern[static_cast<std::size_t>((pj - qj + g.ny - 1) * kx + g.nx - 1 - qi)];
          Complex* vrow = &v.data()[g.index(0, pj)];
          for (std::int64_t pi = 0; pi < g.nx; ++pi) vrow[pi] += wq * krow[pi];
        }
      }
    return v;
  }
  const std::int64_t px = 2 * g.nx, py = 2 * g.ny;
  auto spec = detail::kernel_spectrum(g.h, g.nx, g.ny);
  detail::FftwBuffer buf(static_cast<std::size_t>(px * py));
  Complex* a = buf.data();
  std::fill(a, a + px * py, Complex(0, 0));
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i) a[j * px + i] = w.at(i, j);
  detail::fft2(a, py, px, FFTW_FORWARD);
  const Complex* k = spec->data();
  const double scale = 1.0 / static_cast<double>(px * py);
  for (std::int64_t n = 0; n < px * py; ++n) a[n] *= k[n] * scale;
  detail::fft2(a, py, px, FFTW_BACKWARD);
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i) v.at(i, j) = a[j * px + i];
  return v;
}

// ---------------------------------------------------------------------------
// Residuals and the holomorphy detector

/// max |D-bar f - target| over cells with a full stencil where `mask` holds
/// (target may be empty, meaning zero).
inline double dbar_residual(const GridFunction& f, const GridFunction* target,
                            const std::function<bool(Complex)>& mask) {
  const Grid& g = f.grid();
  double worst = 0;
  for (std::int64_t j = 2; j + 2 < g.ny; ++j)
    for (std::int64_t i = 2; i + 2 < g.nx; ++i) {
      Complex z = g.point(i, j);
      if (mask && !mask(z)) continue;
      Complex r = diff_dbar(f, i, j);
      if (target) r -= target->at(i, j);
      worst = std::max(worst, std::abs(r));
    }
  return worst;
}

struct HolomorphyReport {
  double residual = 0;  // max |D-bar g| over the probe region
  double tolerance = 0;
  double sup_norm = 0;
  bool accepted = false;
};

inline constexpr double kHolomorphyRelTol = 1e-6;

/// Accepts g as holomorphic on Omega_eps when the fourth-order D-bar residual
/// over Omega_{3 eps/4} is at most 1e-6 * sup |g| over Omega_eps.
inline HolomorphyReport holomorphy_check(const GridFunction& g, double eps) {
  HolomorphyReport out;
  const Grid& gr = g.grid();
  for (std::int64_t j = 0; j < gr.ny; ++j)
    for (std::int64_t i = 0; i < gr.nx; ++i)
      if (s_parameter(gr.point(i, j)) < eps) out.sup_norm = std::max(out.sup_norm, std::abs(g.at(i, j)));
  out.residual = dbar_residual(g, nullptr, [&](Complex z) { return s_parameter(z) < 0.75 * eps; });
  out.tolerance = kHolomorphyRelTol * out.sup_norm;
  out.accepted = out.residual <= out.tolerance;
  return out;
}

// ---------------------------------------------------------------------------
// Refined sup bound

struct SupBound {
  double bound = 0;         // r |w|_inf + sqrt|ln r| |w|_2
  double proof_bound = 0;   // 2 r |w|_inf + sqrt((2/pi) ln(R/r)) |w|_2, R = 2 max |zeta| over supp w
  double measured_sup = 0;  // sup |K * w| over supp w
};

inline SupBound refined_sup_bound(const GridFunction& w, double r) {
  if (!(r > 0) || r > 0.5) throw DomainError("refined_sup_bound: r must lie in (0, 1/2]");
  SupBound out;
  if (w.is_zero()) return out;
  const double winf = w.sup_norm(), w2 = w.l2_norm();
  out.bound = r * winf + std::sqrt(std::abs(std::log(r))) * w2;
  const Grid& g = w.grid();
  double R = 0;
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i)
      if (w.at(i, j) != Complex(0, 0)) R = std::max(R, std::abs(g.point(i, j)) + g.h);
  R = std::max(2 * R, 1.0);
  out.proof_bound = 2 * r * winf + std::sqrt(2 / std::numbers::pi * std::log(R / r)) * w2;
  auto v = cauchy_convolve(w);
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i)
      if (w.at(i, j) != Complex(0, 0)) out.measured_sup = std::max(out.measured_sup, std::abs(v.at(i, j)));
  return out;
}

// ---------------------------------------------------------------------------
// Level-set energy

namespace detail {

// Area of D(0, rho) intersected with (-inf, X] x (-inf, Y].
inline double disk_quadrant_area(double rho, double X, double Y) {
  if (X <= -rho || Y <= -rho) return 0;
  X = std::min(X, rho);
  auto F = [rho](double x) {
    x = std::clamp(x, -rho, rho);
    return 0.5 * (x * std::sqrt(std::max(0.0, rho * rho - x * x)) + rho * rho * std::asin(x / rho));
  };
  // Integral over [a, b] of 2 s(x) and of (Y + s(x)), with s(x) = sqrt(rho^2 - x^2).
  auto full = [&](double a, double b) { return b > a ? 2 * (F(b) - F(a)) : 0.0; };
  auto part = [&](double a, double b) { return b > a ? Y * (b - a) + F(b) - F(a) : 0.0; };
  if (Y >= rho) return full(-rho, X);
  double c = std::sqrt(rho * rho - Y * Y);
  if (Y >= 0) return full(-rho, std::min(X, -c)) + part(-c, std::min(X, c)) + full(c, X);
  return part(-c, std::min(X, c));
}

}  // namespace detail

/// Exact area of D(center, rho) intersected with [x0, x1] x [y0, y1].
inline double disk_rect_area(Complex center, double rho, double x0, double x1, double y0, double y1) {
  if (!(rho > 0)) return 0;
  x0 -= center.real(), x1 -= center.real();
  y0 -= center.imag(), y1 -= center.imag();
  using detail::disk_quadrant_area;
  double a = disk_quadrant_area(rho, x1, y1) - disk_quadrant_area(rho, x0, y1) - disk_quadrant_area(rho, x1, y0) +
             disk_quadrant_area(rho, x0, y0);
  return std::max(0.0, a);
}

struct LevelSetEnergy {
  double energy = 0;
  double scaling_bound = 0;     // r^2 / eps^3 * ln(K^2/r^2 + 1)
  double explicit_bound = 0;  // (2 pi / ln 2) N_eps r^2 ln(K^2/r^2 + 1), N_eps = cover size
  double fitted_constant = 0; // energy / scaling_bound
  std::size_t cells_used = 0;
};

/// Integral over Omega_{eps/2} of |g'|^2 1_{|g| < r}. Per cell, g is replaced
/// by its linear model so the sublevel set is a disk whose exact overlap with
/// the cell is used; cells within 2h of the boundary of Omega_{eps/2} are skipped.
inline LevelSetEnergy level_set_energy(const GridFunction& g, double eps, double r, double K) {
  if (!(eps > 0) || eps > 1) throw DomainError("level_set_energy: need 0 < eps <= 1");
  if (!(r > 0) || !(K > 0)) throw DomainError("level_set_energy: r and K must be > 0");
  const Grid& gr = g.grid();
  for (std::int64_t j = 0; j < gr.ny; ++j)
    for (std::int64_t i = 0; i < gr.nx; ++i)
      if (s_parameter(gr.point(i, j)) < eps && std::abs(g.at(i, j)) > K * (1 + 1e-12))
        throw PreconditionError("level_set_energy: |g| exceeds K on Omega_eps");
  LevelSetEnergy out;
  const double h = gr.h, half = eps / 2;
  for (std::int64_t j = 2; j + 2 < gr.ny; ++j)
    for (std::int64_t i = 2; i + 2 < gr.nx; ++i) {
      Complex c = gr.point(i, j);
      if (s_parameter(c) >= half || distance_to_boundary(half, c) <= 2 * h) continue;
      ++out.cells_used;
      Complex d = diff_dz(g, i, j);
      double ad = std::abs(d);
      if (ad == 0) continue;
      Complex z0 = c - g.at(i, j) / d;
      double rho = r / ad;
      double area = disk_rect_area(z0, rho, c.real() - h / 2, c.real() + h / 2, c.imag() - h / 2, c.imag() + h / 2);
      out.energy += ad * ad * area;
    }
  const double lg = std::log(K * K / (r * r) + 1);
  out.scaling_bound = r * r / (eps * eps * eps) * lg;
  out.explicit_bound = 2 * std::numbers::pi / std::log(2.0) * static_cast<double>(build_cover(eps).size()) * r * r * lg;
  out.fitted_constant = out.energy / out.scaling_bound;
  return out;
}

// ---------------------------------------------------------------------------
// Three-lines propagation

struct ThreeLines {
  double a3 = 0;
  double a4 = 0;
  bool verified = false;
  double worst_ratio = 0;  // max over Omega_{eps/2} of |g| / (a3 h_M(a4 eps))
};

/// From |g| <= L on Omega_eps and |g| <= a1 h_M(a2 eps) on [-1,1], derives
/// |g| <= a3 h_M(a4 eps) on Omega_{eps/2} with a3 = max(sqrt a1, sqrt L, sqrt(a1 L))
/// and a4 = kappa_2 a2, then checks it on the grid.
inline ThreeLines three_lines_propagate(const GridFunction& g, double eps, double L, double a1, double a2,
                                        const WeightSequence& M, std::optional<double> kappa2 = std::nullopt) {
  if (!(eps > 0) || !(L > 0) || !(a1 > 0) || !(a2 > 0)) throw DomainError("three_lines: constants must be > 0");
  const Grid& gr = g.grid();
  const double line_bound = a1 * h_M(M, a2 * eps);
  for (std::int64_t j = 0; j < gr.ny; ++j)
    for (std::int64_t i = 0; i < gr.nx; ++i) {
      Complex z = gr.point(i, j);
      double v = std::abs(g.at(i, j));
      if (s_parameter(z) < eps && v > L * (1 + 1e-12))
        throw PreconditionError("three_lines: |g| = " + std::to_string(v) + " > L at (" + std::to_string(z.real()) +
                                ", " + std::to_string(z.imag()) + ")");
      if (std::abs(z.imag()) < gr.h / 2 && std::abs(z.real()) <= 1 && v > line_bound * (1 + 1e-9) + 1e-300)
        throw PreconditionError("three_lines: |g| = " + std::to_string(v) + " > a1 h_M(a2 eps) at x = " +
                                std::to_string(z.real()));
    }
  ThreeLines out;
  double k2 = kappa2 ? *kappa2 : kappa_for(M, 2.0);
  out.a3 = std::max({std::sqrt(a1), std::sqrt(L), std::sqrt(a1 * L)});
  out.a4 = k2 * a2;
  const double target = out.a3 * h_M(M, out.a4 * eps);
  for (std::int64_t j = 0; j < gr.ny; ++j)
    for (std::int64_t i = 0; i < gr.nx; ++i)
      if (s_parameter(gr.point(i, j)) < eps / 2)
        out.worst_ratio = std::max(out.worst_ratio, std::abs(g.at(i, j)) / target);
  out.verified = out.worst_ratio <= 1 + 1e-9;
  return out;
}

}  // namespace joris
