#pragma once

// Counter-examples for single powers: g_lambda and its sharp class, flat
// majorants eta, the two-variable F(x, y) and the lower bound on its
// x-derivatives at (0, y_l).

#include "joris/errors.hpp"
#include "joris/extension.hpp"
#include "joris/precision.hpp"
#include "joris/smooth_model.hpp"
#include "joris/weights.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace joris {

inline constexpr std::size_t kGalleryJetOrder = 30;
inline constexpr std::size_t kSharpClassOrder = 25;

// ---------------------------------------------------------------------------
// g_lambda

/// f^{(j)} = f P_j(u, v) for f = g_lambda, u = ln x, v = 1/x. Every P_j has the
/// form v^j Q_j(u) with deg Q_j = j.
struct LogPolyDerivative {
  std::string base = "g_lambda";
  double lambda = 1;
  std::size_t order = 0;
  std::vector<Real> q;  // Q_j coefficients, q[a] for u^a

  /// Coefficient of u^a v^b in P_j.
  Real coefficient(std::size_t a, std::size_t b) const {
    if (b != order || a >= q.size()) return Real(0);
    return q[a];
  }

  /// Q_{j+1} = Q_j' - (j + 2u/lambda) Q_j, from u' = v, v' = -v^2, f' = -2uv/lambda f.
  LogPolyDerivative next() const {
    LogPolyDerivative d{base, lambda, order + 1, std::vector<Real>(q.size() + 1, Real(0))};
    const Real jj(static_cast<double>(order)), two_over = Real(2) / Real(lambda);
    for (std::size_t a = 0; a < q.size(); ++a) {
      if (a > 0) d.q[a - 1] += Real(static_cast<double>(a)) * q[a];
      d.q[a] -= jj * q[a];
      d.q[a + 1] -= two_over * q[a];
    }
    return d;
  }

  /// P_j(ln x, 1/x) for x > 0.
  Real evaluate(const Real& x) const {
    const Real u = log(x);
    Real acc(0);
    for (std::size_t a = q.size(); a-- > 0;) acc = acc * u + q[a];
    return acc * pow(1 / x, static_cast<long>(order));
  }
};

/// P_0, ..., P_J with coefficients at the gallery precision.
inline std::vector<LogPolyDerivative> log_poly_table(double lambda, std::size_t J) {
  if (!(lambda > 0)) throw DomainError("g_lambda: lambda must be > 0");
  ScopedPrecision prec(kGalleryPrecisionBits);
  std::vector<LogPolyDerivative> t{LogPolyDerivative{"g_lambda", lambda, 0, {Real(1)}}};
  for (std::size_t j = 0; j < J; ++j) t.push_back(t.back().next());
  return t;
}

namespace detail {

inline JetMp g_lambda_jet(const std::vector<LogPolyDerivative>& table, double lambda, const Real& x, std::size_t n) {
  JetMp out(n + 1, Real(0));
  if (!(x > 0)) return out;
  const Real u = log(x), v = 1 / x;
  const Real g = exp(-u * u / Real(lambda));
  Real vj(1), fact(1);
  for (std::size_t j = 0; j <= n; ++j) {
    if (j) {
      vj *= v;
      fact *= Real(static_cast<double>(j));
    }
    Real acc(0);
    const auto& q = table[j].q;
    for (std::size_t a = q.size(); a-- > 0;) acc = acc * u + q[a];
    out[j] = g * vj * acc / fact;
  }
  return out;
}

}  // namespace detail

/// g_lambda(x) = exp(-(ln x)^2 / lambda) for x > 0, 0 for x <= 0.
inline SmoothFunctionModel g_lambda(double lambda, std::size_t j_max = kGalleryJetOrder) {
  auto table = std::make_shared<const std::vector<LogPolyDerivative>>(log_poly_table(lambda, j_max));
  auto mp = [table, lambda](const Real& x, std::size_t n) { return detail::g_lambda_jet(*table, lambda, x, n); };
  auto ld = [mp](long double x, std::size_t n) {
    auto c = mp(Real(static_cast<double>(x)), n);
    Jet out(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) out[j] = c[j].convert_to<long double>();
    return out;
  };
  std::ostringstream os;
  os << "g_lambda(" << lambda << ')';
  return SmoothFunctionModel(os.str(), "recurrence", j_max, ld, mp);
}

/// x = +-exp(-s) for s on a uniform grid in [0, s_max], plus Chebyshev points of [-1, 1].
inline std::vector<double> germ_points(double s_max, std::size_t n = 601) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::exp(-s_max * static_cast<double>(i) / static_cast<double>(n - 1));
    xs.push_back(x);
    xs.push_back(-x);
  }
  for (double x : chebyshev_points(-1, 1, 201)) xs.push_back(x);
  return xs;
}

struct SharpClassReport {
  double lambda = 1;
  int p = 2;
  std::string sequence;
  std::size_t J = kSharpClassOrder;
  unsigned precision_bits = kGalleryPrecisionBits;
  RegularityVerdict power_verdict;  // g_lambda = (g_{p lambda})^p against M^lambda
  RegularityVerdict root_verdict;   // g_{p lambda} against M^lambda
  double identity_residual = 0;     // max relative |g_{p lambda}^p - g_lambda| on 1000 points
  bool reproduces = false;

  nlohmann::json to_json() const {
    auto verdict = [](const RegularityVerdict& v) {
      return nlohmann::json{{"verdict", to_string(v.kind)},
                            {"sigma_fit", v.sigma_fit},
                            {"excess_exponent", v.excess_exponent},
                            {"evidence", v.evidence},
                            {"log_profile", v.log_profile}};
    };
    return {{"lambda", lambda},         {"p", p},
            {"sequence", sequence},     {"J", J},
            {"precision_bits", precision_bits},
            {"power", verdict(power_verdict)},
            {"root", verdict(root_verdict)},
            {"identity_residual", identity_residual},
            {"reproduces", reproduces}};
  }
};

/// f = g_{p lambda} has f^p = g_lambda in C_{M^lambda} while f itself is not.
inline SharpClassReport sharp_class_demo(double lambda, int p, std::size_t J = kSharpClassOrder) {
  if (!(lambda > 0)) throw DomainError("sharp_class_demo: lambda must be > 0");
  if (p < 2) throw DomainError("sharp_class_demo: p must be >= 2");
  ScopedPrecision prec(kGalleryPrecisionBits);
  SharpClassReport rep;
  rep.lambda = lambda;
  rep.p = p;
  rep.J = J;
  auto M = make_qgevrey(lambda);
  rep.sequence = M.spec_string();
  auto power = g_lambda(lambda, std::max<std::size_t>(J, 20));
  auto root = g_lambda(p * lambda, std::max<std::size_t>(J, 20));
  // derivatives of g_mu peak near x = exp(-mu j / 2)
  auto xs = germ_points(p * lambda * static_cast<double>(J) / 2 + 20);
  rep.power_verdict = classify_regularity_at(power, M, xs, J);
  rep.root_verdict = classify_regularity_at(root, M, xs, J);
  for (double x : log_grid(1e-12, 1, 1000)) {
    Real a = pow(root.jet_mp(Real(x), 0)[0], p), b = power.jet_mp(Real(x), 0)[0];
    rep.identity_residual = std::max(rep.identity_residual, (abs(a - b) / b).convert_to<double>());
  }
  rep.reproduces = rep.power_verdict.kind == RegularityVerdict::Kind::member &&
                   rep.root_verdict.kind == RegularityVerdict::Kind::non_member;
  return rep;
}

// ---------------------------------------------------------------------------
// Flat majorants

/// Divergence test for sum M_j/((j+1) M_{j+1}) from the power-law decay of its terms.
inline bool non_quasianalytic(const WeightSequence& M, std::size_t far = 4000) {
  if (M.max_index()) far = std::min(far, *M.max_index() - 1);
  if (far < 64) throw DomainError("non_quasianalytic: sequence table too short");
  auto term = [&](std::size_t j) { return M.breakpoint(j) / static_cast<double>(j + 1); };
  double t_far = term(far), t_half = term(far / 2);
  if (t_far == 0) return true;
  double p = std::log(t_half / t_far) / std::log(static_cast<double>(far) / static_cast<double>(far / 2));
  return p > 1.05;
}

struct FlatMajorant {
  SmoothFunctionModel eta;
  std::function<double(double)> log_eta;  // ln eta(t), t > 0
  std::string construction;
  double b0 = 1;
  double b = 0;                  // largest 2^{-i/4} <= b0 with eta(t) >= h_M(b t) on the grid
  double worst_margin = 0;       // min ln eta(t) - ln h_M(b t) on the grid
  double grid_lo = 1e-6, grid_hi = 1;
  std::vector<double> flat_t;    // 10^{-3}, ..., 10^{-12}
  std::vector<std::vector<double>> log10_quotients;  // [j][k]: log10 eta(t_k)/t_k^j, j <= 10
  double quotient_at_1e3 = 0;    // max_j eta(1e-3)/1e-3^j
  bool flat = false;
  RegularityVerdict regularity;
  bool ok = false;

  nlohmann::json to_json() const {
    return {{"construction", construction}, {"b0", b0}, {"b", b}, {"worst_margin", worst_margin},
            {"grid", {grid_lo, grid_hi}}, {"flat_t", flat_t}, {"log10_quotients", log10_quotients},
            {"quotient_at_1e-3", quotient_at_1e3}, {"flat", flat},
            {"regularity", {{"verdict", to_string(regularity.kind)}, {"evidence", regularity.evidence}}},
            {"ok", ok}};
  }
};

namespace detail {

/// Jets of exp(-|t|^{-1/alpha}).
template <class T>
std::vector<T> gevrey_eta_jet(const T& x, std::size_t n, double alpha) {
  using std::abs;
  std::vector<T> c(n + 1, T(0));
  if (x == 0) return c;
  const T ax = abs(x), e(-1.0 / alpha);
  // -(ax + s)^e = -ax^e sum binom(e, k) (s/ax)^k
  T term = -pow(ax, e);
  for (std::size_t k = 0; k <= n; ++k) {
    c[k] = term;
    term *= (e - T(static_cast<double>(k))) / (T(static_cast<double>(k + 1)) * ax);
  }
  auto out = jets::exp_series(c);
  if (x < 0)
    for (std::size_t k = 1; k <= n; k += 2) out[k] = -out[k];
  return out;
}

}  // namespace detail

/// eta in C_M, flat at 0, with eta(t) >= h_M(b |t|). Closed forms: exp(-|t|^{-1/alpha})
/// for Gevrey (j!)^alpha and g_lambda(|t|) for M^lambda.
inline FlatMajorant flat_majorant_eta(const WeightSequence& M) {
  if (!non_quasianalytic(M)) throw DomainError("flat_majorant_eta: " + M.name() + " is quasianalytic");
  FlatMajorant out;
  const auto& prm = M.params();
  if (M.kind() == SequenceKind::gevrey && (prm.size() < 2 || prm[1] == 0)) {
    const double alpha = prm.at(0);
    out.construction = "exp(-|t|^(-1/alpha))";
    out.log_eta = [alpha](double t) { return -std::pow(t, -1.0 / alpha); };
    out.eta = SmoothFunctionModel(
        "eta_gevrey", "closed-form", kGalleryJetOrder,
        [alpha](long double x, std::size_t n) { return detail::gevrey_eta_jet<long double>(x, n, alpha); },
        [alpha](const Real& x, std::size_t n) { return detail::gevrey_eta_jet<Real>(x, n, alpha); });
  } else if (M.kind() == SequenceKind::qgevrey) {
    const double lambda = prm.at(0);
    out.construction = "g_lambda(|t|)";
    out.log_eta = [lambda](double t) { return -std::log(t) * std::log(t) / lambda; };
    auto g = g_lambda(lambda);
    auto reflect = [](auto c, bool neg) {
      if (neg)
        for (std::size_t k = 1; k < c.size(); k += 2) c[k] = -c[k];
      return c;
    };
    out.eta = SmoothFunctionModel(
        "eta_qgevrey", "recurrence", kGalleryJetOrder,
        [g, reflect](long double x, std::size_t n) { return reflect(g.jet(std::abs(x), n), x < 0); },
        [g, reflect](const Real& x, std::size_t n) { return reflect(g.jet_mp(abs(x), n), x < 0); });
  } else {
    throw DomainError("flat_majorant_eta: no closed-form majorant for " + M.name());
  }

  const auto grid = log_grid(out.grid_lo, out.grid_hi, 400);
  for (int i = 0; i <= 120; ++i) {
    double b = out.b0 * std::pow(2.0, -i / 4.0);
    double margin = std::numeric_limits<double>::infinity();
    for (double t : grid) margin = std::min(margin, out.log_eta(t) - log_h(M, b * t));
    if (margin >= 0) {
      out.b = b;
      out.worst_margin = margin;
      break;
    }
  }

  out.flat = true;
  for (int k = 3; k <= 12; ++k) out.flat_t.push_back(std::pow(10.0, -k));
  for (int j = 0; j <= 10; ++j) {
    std::vector<double> row;
    for (double t : out.flat_t) row.push_back((out.log_eta(t) - j * std::log(t)) / std::log(10.0));
    out.flat = out.flat && row.back() < -8 && row.back() < row[row.size() - 2];
    out.quotient_at_1e3 = std::max(out.quotient_at_1e3, std::pow(10.0, row.front()));
    out.log10_quotients.push_back(std::move(row));
  }

  ScopedPrecision prec(kGalleryPrecisionBits);
  out.regularity = classify_regularity_at(out.eta, M, germ_points(40), kGalleryJetOrder);
  out.ok = out.b > 0 && out.flat && out.regularity.kind == RegularityVerdict::Kind::member;
  return out;
}

// ---------------------------------------------------------------------------
// Two-variable counter-example

using Rational = boost::multiprecision::cpp_rational;

/// a_j = (p-1)(2p-1)...(jp-1) / (p^{j+1} (j+1)!).
inline Rational expansion_coeff_a(int j, int p) {
  if (j < 1 || p < 2) throw DomainError("expansion_coeff_a: need j >= 1 and p >= 2");
  boost::multiprecision::cpp_int num = 1, den = p;
  for (int i = 1; i <= j; ++i) {
    num *= i * p - 1;
    den *= p;
    den *= i + 1;
  }
  return Rational(num, den);
}

inline Real to_real(const Rational& r) {
  return Real(boost::multiprecision::numerator(r).str()) / Real(boost::multiprecision::denominator(r).str());
}

inline Real eta_value(const SmoothFunctionModel& eta, const Real& y) { return eta.jet_mp(y, 0)[0]; }

/// c_l(y) = y^{-2ml} sum_{j=1}^{l} a_j binom(l-1, j-1) eta(y)^{j+1}.
inline Real c_l(int l, const Real& y, int p, const SmoothFunctionModel& eta, int m) {
  if (l < 1) throw DomainError("c_l: l must be >= 1");
  if (!(y > 0)) throw DomainError("c_l: y must be > 0");
  const Real e = eta_value(eta, y);
  Real sum(0), binom(1), ej = e * e;
  for (int j = 1; j <= l; ++j) {
    sum += to_real(expansion_coeff_a(j, p)) * binom * ej;
    binom = binom * Real(l - j) / Real(j);
    ej *= e;
  }
  return sum * pow(y, -2L * m * l);
}

/// F(x, y) = (x^2 + y^{2m}) (1 + x^2 eta(y) / (x^2 + y^{2m}))^{1/p}, (x, y) != 0.
inline Real two_variable_F(const Real& x, const Real& y, int p, int m, const SmoothFunctionModel& eta) {
  const Real s = x * x + pow(y, 2L * m);
  if (s == 0) throw DomainError("two_variable_F: undefined at the origin");
  return s * pow(1 + x * x * eta_value(eta, y) / s, Real(1) / p);
}

/// (x^2 + y^{2m})^p + x^2 (x^2 + y^{2m})^{p-1} eta(y), which equals F^p.
inline Real two_variable_F_power(const Real& x, const Real& y, int p, int m, const SmoothFunctionModel& eta) {
  const Real s = x * x + pow(y, 2L * m);
  return pow(s, static_cast<long>(p)) + x * x * pow(s, static_cast<long>(p - 1)) * eta_value(eta, y);
}

/// G(x, y) + sum_{l=1}^{L} (-1)^l c_l(y) x^{2l+2}, convergent for 0 <= x < y^m.
inline Real two_variable_F_expansion(const Real& x, const Real& y, int p, int m, const SmoothFunctionModel& eta,
                                     int L) {
  Real out = x * x * (1 + eta_value(eta, y) / p) + pow(y, 2L * m);
  for (int l = 1; l <= L; ++l) {
    Real t = c_l(l, y, p, eta, m) * pow(x, 2L * l + 2);
    out += (l % 2) ? Real(-t) : t;
  }
  return out;
}

struct BlowupWitness {
  int l = 0;
  double y = 0;
  double ln_measured = 0;      // ln (2l+2)! c_l(y_l)
  double ln_required = 0;      // ln C^{l+1} (2l+2)! (M_{2l+2})^m
  double ln_intermediate = 0;  // ln a_1 b^{2ml} (M_{ml})^2
  double breakpoint_residual = 0;  // |ln h_M(b y_l) - ln (b y_l)^{ml} M_{ml}|
  double ln_excess = 0;        // ln (2l+2)! c_l(y_l) / ((2l+2)! M_{2l+2})
  bool intermediate_ok = false, chain_ok = false, ok = false;
};

struct BlowupCertificate {
  std::string sequence;
  int p = 2, m = 2;
  double b = 0;
  double A = 0;        // moderate growth constant on the scan window
  double C = 0;        // min(a_1 M_2^{-m} A^{-2m}, b^{2m} A^{-4m})
  double C_fitted = 0; // largest C passing every witness
  unsigned precision_bits = kGalleryPrecisionBits;
  std::vector<BlowupWitness> witnesses;
  bool ok = false;
  std::string failure;

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& x : witnesses)
      w.push_back({{"l", x.l}, {"y", x.y}, {"ln_measured", x.ln_measured}, {"ln_required", x.ln_required},
                   {"ln_intermediate", x.ln_intermediate}, {"breakpoint_residual", x.breakpoint_residual},
                   {"ln_excess", x.ln_excess}, {"intermediate_ok", x.intermediate_ok}, {"chain_ok", x.chain_ok},
                   {"ok", x.ok}});
    return {{"sequence", sequence}, {"p", p}, {"m", m}, {"b", b}, {"A", A}, {"C", C}, {"C_fitted", C_fitted},
            {"precision_bits", precision_bits}, {"witnesses", w}, {"pass", ok}, {"failure", failure}};
  }
};

/// |d^{2l+2}F/dx^{2l+2}(0, y_l)| = (2l+2)! c_l(y_l) >= C^{l+1} (2l+2)! (M_{2l+2})^m at
/// y_l = t_{ml}/b, through c_l(y_l) >= a_1 b^{2ml} (M_{ml})^2 and the moderate growth chain.
inline BlowupCertificate verify_blowup(const WeightSequence& M, int p, int m, int l_lo, int l_hi) {
  if (p < 2 || m < 2) throw DomainError("verify_blowup: need p >= 2 and m >= 2");
  if (l_lo < 1 || l_hi < l_lo) throw DomainError("verify_blowup: bad l range");
  const std::size_t J = std::max<std::size_t>(2 * static_cast<std::size_t>(m * l_hi) + 4, 32);
  auto mg = check_growth(M, GrowthCondition::moderate_growth, J);
  if (!mg.holds) throw DomainError("verify_blowup: " + M.name() + " fails moderate growth on j <= " + std::to_string(J));
  if (!check_growth(M, GrowthCondition::snqa, J).holds)
    throw DomainError("verify_blowup: " + M.name() + " fails strong non-quasianalyticity on j <= " + std::to_string(J));
  auto fm = flat_majorant_eta(M);
  if (!fm.ok) throw BoundViolation("flat_majorant", "no certified flat majorant for " + M.name());

  ScopedPrecision prec(kGalleryPrecisionBits);
  BlowupCertificate cert;
  cert.sequence = M.spec_string();
  cert.p = p;
  cert.m = m;
  cert.b = fm.b;
  cert.A = mg.witness_constant;
  const double lnA = std::log(cert.A), lnb = std::log(cert.b);
  const double a1 = to_real(expansion_coeff_a(1, p)).convert_to<double>();
  auto lnM = [&](std::size_t j) { return M.log_value(j).convert_to<double>(); };
  const double lnK0 = std::log(a1) - m * lnM(2) - 2 * m * lnA;
  const double lnq = 2 * m * lnb - 4 * m * lnA;
  cert.C = std::exp(std::min(lnK0, lnq));
  double ln_fit = std::numeric_limits<double>::infinity();
  const double slack = 1e-12;

  for (int l = l_lo; l <= l_hi; ++l) {
    BlowupWitness w;
    w.l = l;
    const auto ml = static_cast<std::size_t>(m * l);
    const Real t = exp(M.log_value(ml) - M.log_value(ml + 1));
    const Real y = t / Real(cert.b);
    w.y = y.convert_to<double>();
    const double ln_fact = std::lgamma(2.0 * l + 3);
    w.ln_measured = ln_fact + log(c_l(l, y, p, fm.eta, m)).convert_to<double>();
    w.ln_intermediate = ln_fact + std::log(a1) + 2 * m * l * lnb + 2 * lnM(ml);
    w.intermediate_ok = w.ln_measured >= w.ln_intermediate - slack;
    w.breakpoint_residual = std::abs(log(h_M_exact(M, t)).convert_to<double>() -
                                     (static_cast<double>(ml) * log(t).convert_to<double>() + lnM(ml)));
    // (M_{ml})^2 >= A^{-2ml} M_{2ml} >= A^{-2ml} (M_{2l})^m >= A^{-4ml-2m} M_2^{-m} (M_{2l+2})^m
    const auto L2 = static_cast<std::size_t>(2 * l);
    const double link1 = 2 * lnM(ml) - (lnM(2 * ml) - 2.0 * m * l * lnA);
    const double link2 = lnM(2 * ml) - m * lnM(L2);
    const double link3 = m * lnM(L2) - (-(2.0 * m * l + 2 * m) * lnA - m * lnM(2) + m * lnM(L2 + 2));
    w.chain_ok = link1 >= -slack && link2 >= -slack && link3 >= -slack;
    const double ln_base = ln_fact + m * lnM(L2 + 2);
    w.ln_required = (l + 1) * std::log(cert.C) + ln_base;
    w.ln_excess = w.ln_measured - ln_fact - lnM(L2 + 2);
    w.ok = w.intermediate_ok && w.chain_ok && w.ln_measured >= w.ln_required - slack;
    ln_fit = std::min(ln_fit, (w.ln_measured - ln_base) / (l + 1));
    if (!w.ok && cert.failure.empty())
      cert.failure = "witness l = " + std::to_string(l) +
                     (!w.intermediate_ok ? ": c_l(y_l) below a_1 b^{2ml} M_{ml}^2"
                      : !w.chain_ok      ? ": moderate growth chain broken"
                                         : ": measured derivative below C^{l+1} (2l+2)! M_{2l+2}^m");
    cert.witnesses.push_back(w);
  }
  cert.C_fitted = std::exp(ln_fit);
  cert.ok = cert.failure.empty();
  return cert;
}

}  // namespace joris
