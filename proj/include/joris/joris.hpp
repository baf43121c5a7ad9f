#pragma once

// Reconstruction of f from approximants of two consecutive powers f^m, f^{m+1}:
// regularized quotient u_eps, D-bar correction v_eps, and the family f_eps = u_{2eps} - v_{2eps}.

#include "joris/dbar.hpp"
#include "joris/errors.hpp"
#include "joris/extension.hpp"
#include "joris/geometry.hpp"
#include "joris/grid.hpp"
#include "joris/ledger.hpp"
#include "joris/smooth_model.hpp"
#include "joris/weights.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace joris {

// ---------------------------------------------------------------------------
// Reduction to consecutive powers

/// Least m such that every j >= m is p k + q l with k, l >= 0, i.e. (p-1)(q-1).
inline int frobenius_threshold(int p, int q) {
  if (p < 1 || q < 1) throw DomainError("frobenius_threshold: p and q must be >= 1");
  if (std::gcd(p, q) != 1)
    throw DomainError("frobenius_threshold: gcd(" + std::to_string(p) + ", " + std::to_string(q) + ") != 1");
  return (p - 1) * (q - 1);
}

/// (k, l) with p k + q l = j, smallest l first.
inline std::pair<int, int> power_decompose(int j, int p, int q) {
  if (p < 1 || q < 1 || j < 0) throw DomainError("power_decompose: need p, q >= 1 and j >= 0");
  for (int l = 0; l * q <= j; ++l)
    if ((j - l * q) % p == 0) return {(j - l * q) / p, l};
  throw DomainError("power_decompose: " + std::to_string(j) + " is not of the form " + std::to_string(p) + " k + " +
                    std::to_string(q) + " l");
}

/// f^j as a product of powers of the supplied f^p and f^q.
inline SmoothFunctionModel power_from(const SmoothFunctionModel& fp, const SmoothFunctionModel& fq, int j, int p, int q) {
  auto [k, l] = power_decompose(j, p, q);
  if (l == 0) return models::power(fp, static_cast<unsigned>(k));
  if (k == 0) return models::power(fq, static_cast<unsigned>(l));
  return models::product(models::power(fp, static_cast<unsigned>(k)), models::power(fq, static_cast<unsigned>(l)));
}

/// Coarser ladders leave delta > 1 on every rung: the extension cutoffs cost O(1) there.
inline constexpr double kDefaultPipelineEps0 = 0.125;

struct PipelineConfig {
  int p = 2, q = 3;
  int m = 2;
  double eps0 = kDefaultPipelineEps0;
  std::size_t depth = 4;
  double s = 12;
  WeightSequence sequence;
  std::int64_t max_cells = kMaxGridCells;

  /// m = max(1, (p-1)(q-1)); s defaults to 2 m (m+1).
  static PipelineConfig make(int p, int q, WeightSequence M, double eps0 = kDefaultPipelineEps0, std::size_t depth = 4,
                             std::optional<double> s = std::nullopt) {
    PipelineConfig c;
    c.p = p;
    c.q = q;
    c.m = std::max(1, frobenius_threshold(p, q));
    c.eps0 = eps0;
    c.depth = depth;
    c.s = s ? *s : 2.0 * c.m * (c.m + 1);
    c.sequence = std::move(M);
    c.validate();
    return c;
  }

  void validate() const {
    (void)frobenius_threshold(p, q);
    if (m < 1 || m < frobenius_threshold(p, q)) throw DomainError("pipeline: m below the Frobenius threshold");
    if (!(s > m * (m + 1.0))) throw DomainError("pipeline: need s > m(m+1)");
    if (depth < 3) throw DomainError("pipeline: depth must be >= 3");
    if (!(eps0 > 0) || eps0 > 1) throw DomainError("pipeline: eps0 must lie in (0, 1]");
  }

  nlohmann::json to_json() const {
    return {{"p", p}, {"q", q}, {"m", m}, {"eps0", eps0}, {"depth", depth}, {"s", s}, {"sequence", sequence.spec_string()}};
  }
};

// ---------------------------------------------------------------------------
// Power approximants

struct PowerRung {
  double eps = 0;
  ChebyshevSeries g, h, dg;
  bool g_constant = false;
  Grid grid;
  GridFunction g_grid, h_grid, dg_grid;  // sampled on Omega_eps plus a 3h band
  double err_g = 0, err_h = 0;           // interval errors against f^m, f^{m+1}
  double gap_interval = 0;               // max |h^m - g^{m+1}| on the interval row
  double gap_half = 0;                   // max over Omega_{eps/2}
  ThreeLines three_lines;
  double three_lines_a1 = 0;
  std::string three_lines_error;
  double delta = 0, r = 0;
  bool small_enough = false;  // delta <= r <= 1
};

struct PowerApproximants {
  PipelineConfig config;
  ApproximantFamily g_family, h_family;
  FamilyReport g_report, h_report;
  std::vector<PowerRung> rungs;
  ConstantLedger constants;

  double K() const { return constants.get("K"); }
  int m() const { return config.m; }
};

inline void to_json(nlohmann::json& j, const PowerRung& r) {
  j = {{"eps", r.eps},
       {"interval_error_g", r.err_g},
       {"interval_error_h", r.err_h},
       {"power_gap_interval", r.gap_interval},
       {"power_gap_half_domain", r.gap_half},
       {"three_lines", {{"a1", r.three_lines_a1},
                        {"a3", r.three_lines.a3},
                        {"a4", r.three_lines.a4},
                        {"worst_ratio", r.three_lines.worst_ratio},
                        {"verified", r.three_lines.verified && r.three_lines_error.empty()},
                        {"error", r.three_lines_error}}},
       {"delta", r.delta},
       {"r", r.r},
       {"small_enough", r.small_enough},
       {"g_constant", r.g_constant}};
}

namespace detail {

inline bool series_is_constant(const ChebyshevSeries& s) {
  if (s.coeffs.empty()) return true;
  double tail = 0;
  for (std::size_t k = 1; k < s.coeffs.size(); ++k) tail = std::max(tail, std::abs(s.coeffs[k]));
  return tail <= 1e-13 * std::max(1.0, std::abs(s.coeffs[0]));
}

inline Complex ipow(Complex z, int e) {
  Complex out = 1;
  for (int k = 0; k < e; ++k) out *= z;
  return out;
}

}  // namespace detail

/// Fitted (c4, c5): c5 runs over c2 2^{i/4}; c4 is the least constant with
/// meas_k <= c4 h_M(c5 eps_k) on every rung; the pair minimizing sum_k ln delta_k wins.
inline std::pair<double, double> fit_delta_constants(const WeightSequence& M, const std::vector<double>& eps,
                                                     const std::vector<double>& meas, double c2) {
  double best = std::numeric_limits<double>::infinity(), best_c4 = 0, best_c5 = c2;
  for (int i = 0; i <= 96; ++i) {
    double c5 = c2 * std::exp2(i / 4.0);
    double lc4 = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < eps.size(); ++k) lc4 = std::max(lc4, std::log(meas[k]) - log_h(M, c5 * eps[k]));
    double obj = 0;
    for (double e : eps) obj += lc4 + log_h(M, c5 * e);
    if (obj < best - 1e-12) {
      best = obj;
      best_c4 = std::exp(lc4);
      best_c5 = c5;
    }
  }
  return {best_c4 * (1 + 1e-9), best_c5};
}

inline constexpr double kMinWeightScale = 1e-3;

/// Builds the families for f^m and f^{m+1}, checks the power-gap bound through
/// three lines on every rung, and fixes delta_eps = c4 h_M(c5 eps), r_eps = delta_eps^{1/(m+1)}.
inline PowerApproximants build_power_approximants(const SmoothFunctionModel& fm, const SmoothFunctionModel& fm1,
                                                  const PipelineConfig& cfg) {
  cfg.validate();
  PowerApproximants pa;
  pa.config = cfg;
  const auto& M = cfg.sequence;
  const int m = cfg.m;
  FamilyOptions fo;
  fo.throw_on_failure = false;
  auto gb = build_family(fm, M, cfg.eps0, cfg.depth, fo);
  auto hb = build_family(fm1, M, cfg.eps0, cfg.depth, fo);
  if (!gb.report.ok) throw BoundViolation("power_family", "f^m: " + gb.report.failure);
  if (!hb.report.ok) throw BoundViolation("power_family", "f^(m+1): " + hb.report.failure);
  pa.g_family = gb.family;
  pa.h_family = hb.family;
  pa.g_report = gb.report;
  pa.h_report = hb.report;

  auto& L = pa.constants;
  const double K = std::max({1.0, pa.g_family.K(), pa.h_family.K()});
  const double c1 = std::max(pa.g_family.c1(), pa.h_family.c1());
  const double c2 = std::max(pa.g_family.c2(), pa.h_family.c2());
  L.record("K", K, Provenance::derived, "max(1, K of the f^m and f^{m+1} families)");
  L.record("c1", c1, Provenance::derived, "max of the family c1");
  L.record("c2", c2, Provenance::derived, "max of the family c2");
  const double c3 = c1 * (m * std::pow(K, m - 1) + (m + 1) * std::pow(K, m));
  L.record("c3", c3, Provenance::closed_form, "c1 (m K^{m-1} + (m+1) K^m)");
  const double Lgap = 2 * std::pow(K, m + 1);
  L.record("L_power_gap", Lgap, Provenance::closed_form, "2 K^{m+1}");
  const double kappa2 = kappa_for(M, 2.0);
  L.record("kappa2", kappa2, Provenance::fitted, "h_M(t) <= h_M(kappa2 t)^2 on the kappa grid");

  const auto xs = chebyshev_points(-1, 1, kIntervalSamples);
  std::vector<double> fmx, fm1x;
  for (double x : xs) {
    fmx.push_back(static_cast<double>(fm.value(x)));
    fm1x.push_back(static_cast<double>(fm1.value(x)));
  }
  std::vector<double> meas;
  double scale = 1;
  for (std::size_t k = 0; k < cfg.depth; ++k) {
    PowerRung pr;
    pr.eps = pa.g_family.eps[k];
    pr.g = pa.g_family.series[k];
    pr.h = pa.h_family.series[k];
    pr.g_constant = detail::series_is_constant(pr.g);
    pr.dg = pr.g_constant ? ChebyshevSeries{{Complex(0)}} : pr.g.derivative();
    pr.grid = grid_for(pr.eps, cfg.max_cells);
    pr.g_grid = sample_on_domain([&](Complex z) { return pr.g(z); }, pr.eps, pr.grid);
    pr.h_grid = sample_on_domain([&](Complex z) { return pr.h(z); }, pr.eps, pr.grid);
    pr.dg_grid = sample_on_domain([&](Complex z) { return pr.dg(z); }, pr.eps, pr.grid);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Complex gx = pr.g(xs[i]), hx = pr.h(xs[i]);
      pr.err_g = std::max(pr.err_g, std::abs(gx - fmx[i]));
      pr.err_h = std::max(pr.err_h, std::abs(hx - fm1x[i]));
      pr.gap_interval = std::max(pr.gap_interval, std::abs(detail::ipow(hx, m) - detail::ipow(gx, m + 1)));
    }
    GridFunction gap(pr.grid, "Omega_eps+3h");
    const Grid& gr = pr.grid;
    for (std::size_t n = 0; n < gr.size(); ++n)
      gap.data()[n] = detail::ipow(pr.h_grid.data()[n], m) - detail::ipow(pr.g_grid.data()[n], m + 1);
    for (std::int64_t j = 0; j < gr.ny; ++j)
      for (std::int64_t i = 0; i < gr.nx; ++i) {
        Complex z = gr.point(i, j);
        if (s_parameter(z) < pr.eps / 2) {
          pr.gap_half = std::max(pr.gap_half, std::abs(gap.at(i, j)));
          scale = std::max(scale, std::pow(std::abs(pr.h_grid.at(i, j)), m) + std::pow(std::abs(pr.g_grid.at(i, j)), m + 1));
        }
        if (std::abs(z.imag()) < gr.h / 2 && std::abs(z.real()) <= 1)
          pr.gap_interval = std::max(pr.gap_interval, std::abs(gap.at(i, j)));
      }
    // stated a1 = c3, raised to the measured row value when rounding dominates
    const double line = h_M(M, c2 * pr.eps);
    pr.three_lines_a1 =
        std::max({c3, 1.01 * pr.gap_interval / std::max(line, 1e-300), std::numeric_limits<double>::min()});
    try {
      pr.three_lines = three_lines_propagate(gap, pr.eps, Lgap, pr.three_lines_a1, c2, M, kappa2);
      if (!pr.three_lines.verified)
        pr.three_lines_error = "power gap exceeds a3 h_M(a4 eps) on Omega_{eps/2}: ratio " +
                               std::to_string(pr.three_lines.worst_ratio);
    } catch (const PreconditionError& e) {
      pr.three_lines_error = e.what();
    }
    meas.push_back(std::max({pr.err_g, pr.err_h, pr.gap_half}));
    pa.rungs.push_back(std::move(pr));
  }
  // rounding level of h^m - g^{m+1}
  const double floor = 1e-13 * scale;
  for (auto& v : meas) v = std::max(v, floor);
  std::vector<double> eps;
  for (const auto& pr : pa.rungs) eps.push_back(pr.eps);
  auto [c4, c5] = fit_delta_constants(M, eps, meas, c2);
  L.record("c4", c4, Provenance::fitted, "least c4 with the three power inequalities <= c4 h_M(c5 eps) on all rungs");
  L.record("c5", c5, Provenance::fitted, "c2 2^{i/4} minimizing sum of ln delta over the ladder");
  L.record("c4_three_lines", pa.rungs.front().three_lines.a3, Provenance::derived, "a3 from three lines at rung 0");
  L.record("c5_three_lines", pa.rungs.front().three_lines.a4, Provenance::derived, "kappa2 c2");
  L.record("power_floor", floor, Provenance::assumed, "1e-13 max(1, sup |h|^m + |g|^{m+1} over Omega_{eps/2})");
  double c1_fit = 0;
  for (auto& pr : pa.rungs) {
    pr.delta = c4 * h_M(M, c5 * pr.eps);
    pr.r = std::pow(pr.delta, 1.0 / (m + 1));
    pr.small_enough = pr.delta <= pr.r && pr.r <= 1;
    c1_fit = std::max(c1_fit, std::max(pr.err_g, pr.err_h) / h_M(M, c5 * pr.eps));
  }
  L.record("c1_interval", c1_fit, Provenance::fitted, "interval errors of g, h against h_M(c5 eps); <= c4");
  return pa;
}

// ---------------------------------------------------------------------------
// Regularized quotient and its D-bar derivative

/// u_eps = chi_eps conj(g) h / max(|g|, r)^2 at a point.
inline Complex quotient_value(const PowerRung& pr, Complex g, Complex h, Complex z) {
  double chi = cutoff_chi(pr.eps, z);
  if (chi == 0) return 0;
  double d = std::max(std::abs(g), pr.r);
  return chi * std::conj(g) * h / (d * d);
}

struct QuotientBoundCheck {
  double measured = 0;  // sup |u_eps| over Omega_{eps/2}
  double bound = 0;     // (2K)^{1/m}
  bool ok = false;
};

/// u_eps on the rung grid (zero outside Omega_eps).
inline GridFunction build_u(const PowerApproximants& pa, std::size_t k, QuotientBoundCheck* check = nullptr) {
  const auto& pr = pa.rungs.at(k);
  const Grid& gr = pr.grid;
  GridFunction u(gr, "Omega_eps");
  QuotientBoundCheck qc;
  qc.bound = std::pow(2 * pa.K(), 1.0 / pa.m());
  for (std::int64_t j = 0; j < gr.ny; ++j)
    for (std::int64_t i = 0; i < gr.nx; ++i) {
      Complex z = gr.point(i, j);
      double sp = s_parameter(z);
      if (sp >= pr.eps) continue;
      Complex v = quotient_value(pr, pr.g_grid.at(i, j), pr.h_grid.at(i, j), z);
      u.at(i, j) = v;
      if (sp < pr.eps / 2) qc.measured = std::max(qc.measured, std::abs(v));
    }
  qc.ok = qc.measured <= qc.bound * (1 + 1e-12);
  if (check) *check = qc;
  if (!qc.ok && pr.small_enough)
    throw BoundViolation("quotient_bound", "sup |u_eps| = " + std::to_string(qc.measured) + " > (2K)^{1/m} = " +
                                               std::to_string(qc.bound) + " at eps = " + std::to_string(pr.eps));
  return u;
}

/// w_eps = r^{-2} conj(g') h 1_{|g| < r} on Omega_{eps/2}, zero elsewhere.
/// A constant g gives w = 0 (u is then a constant multiple of h).
inline GridFunction dbar_u_closed_form(const PowerApproximants& pa, std::size_t k) {
  const auto& pr = pa.rungs.at(k);
  const Grid& gr = pr.grid;
  GridFunction w(gr, "Omega_eps/2");
  if (pr.g_constant) return w;
  const double r2 = pr.r * pr.r;
  for (std::int64_t j = 0; j < gr.ny; ++j)
    for (std::int64_t i = 0; i < gr.nx; ++i) {
      if (s_parameter(gr.point(i, j)) >= pr.eps / 2) continue;
      if (std::abs(pr.g_grid.at(i, j)) < pr.r) w.at(i, j) = std::conj(pr.dg_grid.at(i, j)) * pr.h_grid.at(i, j) / r2;
    }
  return w;
}

struct ClosedFormCheck {
  std::size_t cells = 0, agreeing = 0, banded = 0;
  double fraction = 1, tolerance = 0, worst = 0;
  bool ok = false;
};

inline constexpr double kClosedFormAgreement = 0.99;

/// Fourth-order D-bar of u against w on interior cells of Omega_{eps/2}; cells whose
/// stencil may meet the level set |g| = r (within 2.5 h |g'|) are left out.
inline ClosedFormCheck check_closed_form(const PowerApproximants& pa, std::size_t k, const GridFunction& u,
                                         const GridFunction& w) {
  const auto& pr = pa.rungs.at(k);
  const Grid& gr = pr.grid;
  ClosedFormCheck out;
  out.tolerance = 10 * gr.h * std::max(1.0, w.sup_norm());
  for (std::int64_t j = 2; j + 2 < gr.ny; ++j)
    for (std::int64_t i = 2; i + 2 < gr.nx; ++i) {
      Complex z = gr.point(i, j);
      if (s_parameter(z) >= pr.eps / 2 || distance_to_boundary(pr.eps / 2, z) <= 2 * gr.h) continue;
      if (!pr.g_constant && std::abs(std::abs(pr.g_grid.at(i, j)) - pr.r) <= 2.5 * gr.h * std::abs(pr.dg_grid.at(i, j))) {
        ++out.banded;
        continue;
      }
      ++out.cells;
      double d = std::abs(diff_dbar(u, i, j) - w.at(i, j));
      out.worst = std::max(out.worst, d);
      if (d <= out.tolerance) ++out.agreeing;
    }
  out.fraction = out.cells ? static_cast<double>(out.agreeing) / static_cast<double>(out.cells) : 1.0;
  out.ok = out.fraction >= kClosedFormAgreement;
  return out;
}

// ---------------------------------------------------------------------------
// Correction and assembly

struct CorrectionRung {
  double eps = 0;  // rung of the power families; the assembled rung is eps/2
  QuotientBoundCheck quotient;
  ClosedFormCheck closed_form;
  double w_sup = 0, w_sup_bound = 0;  // against c10 r^{1/m-1}/eps^2
  double w_l2 = 0, w_l2_bound = 0;    // against c11 r^{1/m} eps^{-3/2} sqrt(ln(K^2/r^2+1))
  double level_set_energy = 0;
  double v_sup = 0;                   // sup |K * w| over Omega_{eps/2}
  double v_bound_measured = 0;        // 2 r |w|_inf + sqrt((2/pi) ln(R/r)) |w|_2 from measured norms
  double v_bound_formula = 0;         // same with the closed-form norm bounds
  double v_bound = 0;                 // c9 delta^{1/s}
  double correction_agreement = 0;    // max |f_{eps/2} - (u - v)| on sampled cells of Omega_{eps/2}
  bool w_ok = false, v_ok = false;
};

inline void to_json(nlohmann::json& j, const QuotientBoundCheck& q) {
  j = {{"measured", q.measured}, {"bound", q.bound}, {"ok", q.ok}};
}
inline void to_json(nlohmann::json& j, const ClosedFormCheck& c) {
  j = {{"cells", c.cells}, {"agreeing", c.agreeing}, {"excluded_near_level_set", c.banded}, {"fraction", c.fraction},
       {"tolerance", c.tolerance}, {"worst", c.worst}, {"ok", c.ok}};
}
inline void to_json(nlohmann::json& j, const CorrectionRung& c) {
  j = {{"eps", c.eps},
       {"quotient_bound", c.quotient},
       {"closed_form", c.closed_form},
       {"w_sup", {{"measured", c.w_sup}, {"bound", c.w_sup_bound}}},
       {"w_l2", {{"measured", c.w_l2}, {"bound", c.w_l2_bound}, {"level_set_energy", c.level_set_energy}}},
       {"correction_bound",
        {{"measured", c.v_sup}, {"from_measured_norms", c.v_bound_measured}, {"from_norm_bounds", c.v_bound_formula},
         {"bound", c.v_bound}, {"ok", c.v_ok}}},
       {"correction_agreement", c.correction_agreement}};
}

struct Assembly {
  ApproximantFamily family;
  std::vector<CorrectionRung> rungs;
  FamilyReport report;  // holomorphy and uniform bound K' (no interval target)
  std::size_t regime_rungs = 0;  // rungs with delta <= r <= 1
  bool ok = true;
  std::string failure;
};

inline constexpr std::size_t kQuotientOversample = 32;

/// f_{eps/2} = u_eps - v_eps on Omega_{eps/2}. By the Cauchy-Pompeiu formula this equals
/// the Cauchy integral of u_eps over the boundary of Omega_{eps/2}, which is what the
/// assembled series stores; v_eps = K * w_eps on the grid is used for the bounds and
/// as a cross-check.
inline Assembly correct_and_assemble(const PowerApproximants& pa) {
  const auto& cfg = pa.config;
  const auto& M = cfg.sequence;
  const int m = cfg.m;
  const double K = pa.K(), s = cfg.s;
  Assembly out;
  auto fail = [&](const std::string& msg) {
    if (out.ok) out.failure = msg;
    out.ok = false;
  };
  ConstantLedger L = pa.constants;
  const double c10 = 8 * std::pow(2.0, 1.0 / m) * K;
  L.record("c10", c10, Provenance::closed_form, "8 2^{1/m} K");
  double c11 = 0;
  for (const auto& pr : pa.rungs)
    c11 = std::max(c11, std::pow(2.0, 1.0 / m) *
                            std::sqrt(2 * std::numbers::pi / std::log(2.0) * static_cast<double>(build_cover(pr.eps).size())) *
                            std::pow(pr.eps, 1.5));
  L.record("c11", c11, Provenance::derived, "2^{1/m} sqrt((2 pi/ln 2) N_eps) eps^{3/2}, max over the ladder");

  std::vector<ChebyshevSeries> series;
  for (std::size_t k = 0; k < pa.rungs.size(); ++k) {
    const auto& pr = pa.rungs[k];
    CorrectionRung cr;
    cr.eps = pr.eps;
    auto u = build_u(pa, k, &cr.quotient);
    auto w = dbar_u_closed_form(pa, k);
    cr.closed_form = check_closed_form(pa, k, u, w);
    cr.w_sup = w.sup_norm();
    cr.w_l2 = w.l2_norm();
    const double r = pr.r, e = pr.eps;
    const double lg = std::log(K * K / (r * r) + 1);
    cr.w_sup_bound = c10 * std::pow(r, 1.0 / m - 1) / (e * e);
    cr.w_l2_bound = c11 * std::pow(r, 1.0 / m) * std::pow(e, -1.5) * std::sqrt(lg);
    if (!pr.g_constant) cr.level_set_energy = level_set_energy(pr.g_grid, e, r, K).energy;
    cr.w_ok = cr.w_sup <= cr.w_sup_bound * (1 + 1e-9) && cr.w_l2 <= cr.w_l2_bound * (1 + 1e-9);
    auto v = cauchy_convolve(w);
    double R = 1;
    const Grid& gr = pr.grid;
    for (std::int64_t j = 0; j < gr.ny; ++j)
      for (std::int64_t i = 0; i < gr.nx; ++i) {
        Complex z = gr.point(i, j);
        if (s_parameter(z) >= e / 2) continue;
        cr.v_sup = std::max(cr.v_sup, std::abs(v.at(i, j)));
        R = std::max(R, 2 * (std::abs(z) + gr.h));
      }
    const double lr = std::sqrt(2 / std::numbers::pi * std::max(0.0, std::log(R / r)));
    cr.v_bound_measured = 2 * r * cr.w_sup + lr * cr.w_l2;
    cr.v_bound_formula = 2 * r * cr.w_sup_bound + lr * cr.w_l2_bound;

    const PowerRung* prp = &pr;
    series.push_back(cauchy_approximant(
        [prp](Complex z) {
          Complex g = prp->g(z), h = prp->h(z);
          double d = std::max(std::abs(g), prp->r);
          return std::conj(g) * h / (d * d);
        },
        e / 2, std::nullopt, kQuotientOversample));
    const auto& fs = series.back();
    const std::int64_t stride = std::max<std::int64_t>(1, gr.nx / 256);
    for (std::int64_t j = 0; j < gr.ny; j += stride)
      for (std::int64_t i = 0; i < gr.nx; i += stride) {
        Complex z = gr.point(i, j);
        if (s_parameter(z) >= e / 2 || distance_to_boundary(e / 2, z) <= 2 * gr.h) continue;
        cr.correction_agreement = std::max(cr.correction_agreement, std::abs(fs(z) - (u.at(i, j) - v.at(i, j))));
      }
    out.rungs.push_back(cr);
  }

  double c9 = 0;
  for (std::size_t k = 0; k < pa.rungs.size(); ++k)
    c9 = std::max(c9, out.rungs[k].v_bound_formula / std::pow(pa.rungs[k].delta, 1.0 / s));
  L.record("c9", c9, Provenance::derived, "max over the ladder of the norm-bound chain / delta^{1/s}");
  const double c7 = std::pow(2.0, 1.0 + 1.0 / m), c8 = std::pow(K + 1, 1.0 / m) + 1;
  L.record("c7", c7, Provenance::closed_form, "2^{1+1/m}");
  L.record("c8", c8, Provenance::closed_form, "(K+1)^{1/m} + 1");
  const double c12 = std::max(c7, c8) + c9;
  L.record("c12", c12, Provenance::derived, "max(c7, c8) + c9");
  const double c4 = L.get("c4"), c5 = L.get("c5");
  const double kappa_s = kappa_for(M, s);
  L.record("kappa_s", kappa_s, Provenance::fitted, "h_M(t) <= h_M(kappa_s t)^s on the kappa grid");
  const double c13 = std::pow(c4, 1.0 / s), c14 = 2 * kappa_s * c5;
  L.record("c13", c13, Provenance::closed_form, "c4^{1/s}");
  L.record("c14", c14, Provenance::closed_form, "2 kappa_s c5");
  const double Kp = std::pow(2 * K, 1.0 / m) + c9;

  for (std::size_t k = 0; k < pa.rungs.size(); ++k) {
    auto& cr = out.rungs[k];
    const auto& pr = pa.rungs[k];
    char where[64];
    std::snprintf(where, sizeof where, " at eps = %.6g", pr.eps);
    cr.v_bound = c9 * std::pow(pr.delta, 1.0 / s);
    cr.v_ok = cr.v_sup <= cr.v_bound_measured * (1 + 1e-9) + 1e-14 && cr.v_sup <= cr.v_bound * (1 + 1e-9);
    if (!pr.three_lines_error.empty()) fail("power gap" + std::string(where) + ": " + pr.three_lines_error);
    if (!cr.closed_form.ok)
      fail("closed-form D-bar agreement" + std::string(where) + ": " + std::to_string(cr.closed_form.fraction));
    // the remaining bounds are asserted for small eps only
    if (!pr.small_enough) continue;
    ++out.regime_rungs;
    if (!cr.quotient.ok)
      fail("quotient bound" + std::string(where) + ": " + std::to_string(cr.quotient.measured) + " > " +
           std::to_string(cr.quotient.bound));
    if (!cr.w_ok) fail("closed-form norm bounds for w" + std::string(where));
    if (!cr.v_ok)
      fail("correction bound" + std::string(where) + ": " + std::to_string(cr.v_sup) + " > " + std::to_string(cr.v_bound));
  }

  if (out.regime_rungs < 2)
    fail("small-parameter regime (delta <= r <= 1) reached on " + std::to_string(out.regime_rungs) +
         " rungs; need at least 2");
  auto& fam = out.family;
  fam.target = "f from (" + pa.g_family.target + ", " + pa.h_family.target + ")";
  fam.sequence = M;
  fam.eps0 = cfg.eps0 / 2;
  for (std::size_t k = 0; k < pa.rungs.size(); ++k) {
    fam.eps.push_back(pa.rungs[k].eps / 2);
    fam.series.push_back(series[k]);
  }
  fam.constants.merge(L, "power.");
  fam.constants.record("K", Kp, Provenance::closed_form, "(2K)^{1/m} + c9");
  fam.constants.record("c1", c12 * c13, Provenance::closed_form, "c12 c13");
  fam.constants.record("c2", c14, Provenance::closed_form, "c14 = 2 kappa_s c5");
  out.report = verify_family(fam, nullptr);
  if (!out.report.ok) fail(out.report.failure);
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end run (the target f enters only the verification)

struct QuotientErrorCheck {
  double small_set = 0, small_bound = 0;  // on {|g| <= r}: c7 r^{1/m}
  double large_set = 0, large_bound = 0;  // on {|g| > r}: c8 delta / r
  std::size_t small_count = 0, large_count = 0;
  bool ok = false;
};

inline void to_json(nlohmann::json& j, const QuotientErrorCheck& c) {
  j = {{"small_set", {{"measured", c.small_set}, {"bound", c.small_bound}, {"samples", c.small_count}}},
       {"large_set", {{"measured", c.large_set}, {"bound", c.large_bound}, {"samples", c.large_count}}},
       {"ok", c.ok}};
}

inline QuotientErrorCheck quotient_error_check(const PowerApproximants& pa, std::size_t k,
                                               const SmoothFunctionModel& f_oracle) {
  const auto& pr = pa.rungs.at(k);
  const int m = pa.m();
  QuotientErrorCheck out;
  out.small_bound = std::pow(2.0, 1.0 + 1.0 / m) * std::pow(pr.r, 1.0 / m);
  out.large_bound = (std::pow(pa.K() + 1, 1.0 / m) + 1) * pr.delta / pr.r;
  for (double x : chebyshev_points(-1, 1, kIntervalSamples)) {
    Complex g = pr.g(x), h = pr.h(x);
    double d = std::abs(static_cast<double>(f_oracle.value(x)) - quotient_value(pr, g, h, x));
    if (std::abs(g) <= pr.r) {
      out.small_set = std::max(out.small_set, d);
      ++out.small_count;
    } else {
      out.large_set = std::max(out.large_set, d);
      ++out.large_count;
    }
  }
  const double slack = 1e-12;
  out.ok = out.small_set <= out.small_bound * (1 + 1e-9) + slack && out.large_set <= out.large_bound * (1 + 1e-9) + slack;
  return out;
}

struct PipelineReport {
  PipelineConfig config;
  PowerApproximants power;
  Assembly assembly;
  std::vector<QuotientErrorCheck> quotient_error;
  FamilyReport final_report;         // assembled family against f
  std::vector<double> direct_bound;  // c12 delta^{1/s} per assembled rung
  bool ok = false;
  std::string failure;
  double error_slope = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const;
};

inline PipelineReport run_pipeline(const SmoothFunctionModel& fp, const SmoothFunctionModel& fq,
                                   const SmoothFunctionModel& f_oracle, const PipelineConfig& cfg) {
  cfg.validate();
  PipelineReport rep;
  rep.config = cfg;
  auto fm = power_from(fp, fq, cfg.m, cfg.p, cfg.q);
  auto fm1 = power_from(fp, fq, cfg.m + 1, cfg.p, cfg.q);
  rep.power = build_power_approximants(fm, fm1, cfg);
  rep.assembly = correct_and_assemble(rep.power);
  rep.ok = rep.assembly.ok;
  rep.failure = rep.assembly.failure;
  auto fail = [&](const std::string& msg) {
    if (rep.ok) rep.failure = msg;
    rep.ok = false;
  };
  for (std::size_t k = 0; k < rep.power.rungs.size(); ++k) {
    rep.quotient_error.push_back(quotient_error_check(rep.power, k, f_oracle));
    if (rep.power.rungs[k].small_enough && !rep.quotient_error.back().ok)
      fail("quotient error at eps = " + std::to_string(rep.power.rungs[k].eps) + ": " +
           std::to_string(rep.quotient_error.back().small_set) + " / " + std::to_string(rep.quotient_error.back().large_set));
  }
  rep.final_report = verify_family(rep.assembly.family, &f_oracle);
  rep.error_slope = rep.final_report.error_slope;
  if (!rep.final_report.ok) fail(rep.final_report.failure);
  const auto& C = rep.assembly.family.constants;
  for (std::size_t k = 0; k < rep.power.rungs.size(); ++k) {
    double b = C.get("power.c12") * std::pow(rep.power.rungs[k].delta, 1.0 / cfg.s);
    rep.direct_bound.push_back(b);
    if (rep.power.rungs[k].small_enough && rep.final_report.rungs[k].interval_error > b + rep.final_report.noise_floor)
      fail("interval error above c12 delta^{1/s} at eps = " + std::to_string(rep.final_report.rungs[k].eps));
  }
  return rep;
}

inline nlohmann::json PipelineReport::to_json() const {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["per_rung"] = nlohmann::json::array();
  for (std::size_t k = 0; k < power.rungs.size(); ++k) {
    const auto& pr = power.rungs[k];
    nlohmann::json r;
    r["eps"] = final_report.rungs.empty() ? pr.eps / 2 : final_report.rungs[k].eps;
    r["power_eps"] = pr.eps;
    if (!final_report.rungs.empty()) {
      r["sup_err_interval"] = final_report.rungs[k].interval_error;
      r["interval_bound"] = final_report.rungs[k].interval_bound;
      r["direct_bound"] = direct_bound[k];
    }
    r["power"] = pr;
    r["quotient_bound"] = assembly.rungs[k].quotient;
    if (k < quotient_error.size()) r["quotient_error"] = quotient_error[k];
    r["closed_form_agreement"] = assembly.rungs[k].closed_form;
    r["correction"] = assembly.rungs[k];
    r["delta"] = pr.delta;
    r["r"] = pr.r;
    j["per_rung"].push_back(r);
  }
  j["constants"] = assembly.family.constants.to_json();
  j["error_slope"] = std::isfinite(error_slope) ? nlohmann::json(error_slope) : nlohmann::json(nullptr);
  j["floor_reached"] = final_report.floor_reached;
  j["regime_rungs"] = assembly.regime_rungs;
  j["verdict"] = {{"pass", ok}, {"failure", failure}};
  return j;
}

}  // namespace joris
