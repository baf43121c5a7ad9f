#pragma once

// Real functions on (a neighbourhood of) [-1,1] given by Taylor jets:
// jet(x, n)[j] = f^{(j)}(x) / j! for j <= n. Jets compose under products and
// powers, which is how f^m = (f^p)^k (f^q)^l is formed.

#include "joris/errors.hpp"
#include "joris/precision.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace joris {

using Jet = std::vector<long double>;
using JetMp = std::vector<Real>;

namespace jets {

template <class T>
std::vector<T> multiply(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k <= i; ++k) out[i] += a[k] * b[i - k];
  return out;
}

template <class T>
std::vector<T> power(const std::vector<T>& a, unsigned e) {
  std::vector<T> out(a.size(), T(0));
  if (!out.empty()) out[0] = T(1);
  std::vector<T> base = a;
  while (e) {
    if (e & 1u) out = multiply(out, base);
    e >>= 1;
    if (e) base = multiply(base, base);
  }
  return out;
}

/// exp of a series with coefficients c (c[0] included).
template <class T>
std::vector<T> exp_series(const std::vector<T>& c) {
  using std::exp;
  std::vector<T> b(c.size(), T(0));
  if (c.empty()) return b;
  b[0] = exp(c[0]);
  for (std::size_t n = 1; n < c.size(); ++n) {
    T s(0);
    for (std::size_t k = 1; k <= n; ++k) s += T(static_cast<double>(k)) * c[k] * b[n - k];
    b[n] = s / T(static_cast<double>(n));
  }
  return b;
}

/// Taylor coefficients of exp(-1/x) at x0 > 0 (zero for x0 <= 0).
template <class T>
std::vector<T> exp_inv(const T& x0, std::size_t n) {
  std::vector<T> c(n + 1, T(0));
  if (!(x0 > 0)) return c;
  // -1/(x0 + t) = -sum (-1)^k t^k / x0^{k+1}
  T p = T(1) / x0;
  for (std::size_t k = 0; k <= n; ++k) {
    c[k] = (k % 2 == 0) ? -p : p;
    p /= x0;
  }
  return exp_series(c);
}

}  // namespace jets

/// Function model with Taylor-jet access in long double and in extended precision.
class SmoothFunctionModel {
 public:
  using JetFn = std::function<Jet(long double, std::size_t)>;
  using JetMpFn = std::function<JetMp(const Real&, std::size_t)>;

  SmoothFunctionModel() = default;
  SmoothFunctionModel(std::string name, std::string tag, std::size_t j_max, JetFn jet, JetMpFn jet_mp)
      : name_(std::move(name)), tag_(std::move(tag)), j_max_(j_max), jet_(std::move(jet)), jet_mp_(std::move(jet_mp)) {}

  const std::string& name() const { return name_; }
  /// Derivative source: "closed-form", "recurrence", "product" or "chebyshev".
  const std::string& tag() const { return tag_; }
  std::size_t j_max() const { return j_max_; }
  bool valid() const { return static_cast<bool>(jet_); }
  bool has_mp() const { return static_cast<bool>(jet_mp_); }

  Jet jet(long double x, std::size_t n) const {
    if (n > j_max_) throw DomainError("model '" + name_ + "': derivative order beyond J_max");
    return jet_(x, n);
  }
  JetMp jet_mp(const Real& x, std::size_t n) const {
    if (!jet_mp_) throw DomainError("model '" + name_ + "' has no extended-precision jets");
    if (n > j_max_) throw DomainError("model '" + name_ + "': derivative order beyond J_max");
    return jet_mp_(x, n);
  }

  long double value(long double x) const { return jet_(x, 0)[0]; }

  /// f^{(j)}(x) = j! * jet[j].
  long double derivative(long double x, std::size_t j) const {
    Jet c = jet(x, j);
    return c[j] * std::tgamma(static_cast<long double>(j) + 1);
  }

  Real derivative_mp(const Real& x, std::size_t j) const {
    JetMp c = jet_mp(x, j);
    return c[j] * exp(lgamma_real(Real(static_cast<double>(j + 1))));
  }

 private:
  std::string name_, tag_;
  std::size_t j_max_ = 0;
  JetFn jet_;
  JetMpFn jet_mp_;
};

inline constexpr std::size_t kDefaultJetOrder = 40;

namespace models {

/// Polynomial sum c_k x^k.
inline SmoothFunctionModel polynomial(std::string name, std::vector<double> coeffs,
                                      std::size_t j_max = kDefaultJetOrder) {
  auto make = [coeffs](auto x, std::size_t n) {
    using T = decltype(x);
    std::vector<T> out(n + 1, T(0));
    // Taylor shift: coefficient of t^j in sum c_k (x + t)^k.
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      T binom(1);
      // j = 0..min(k, n): C(k, j) x^{k-j}
      std::vector<T> pows(k + 1, T(1));
      for (std::size_t i = 1; i <= k; ++i) pows[i] = pows[i - 1] * x;
      for (std::size_t j = 0; j <= std::min(k, n); ++j) {
        out[j] += T(coeffs[k]) * binom * pows[k - j];
        binom = binom * T(static_cast<double>(k - j)) / T(static_cast<double>(j + 1));
      }
    }
    return out;
  };
  return SmoothFunctionModel(
      std::move(name), "closed-form", j_max, [make](long double x, std::size_t n) { return make(x, n); },
      [make](const Real& x, std::size_t n) { return make(x, n); });
}

inline SmoothFunctionModel zero() { return polynomial("zero", {}); }
inline SmoothFunctionModel constant(double c) { return polynomial("const", {c}); }
inline SmoothFunctionModel identity() { return polynomial("identity", {0.0, 1.0}); }
inline SmoothFunctionModel square() { return polynomial("square", {0.0, 0.0, 1.0}); }

/// exp(-1/x) for x > 0, 0 otherwise.
inline SmoothFunctionModel exp_inv(std::size_t j_max = kDefaultJetOrder) {
  return SmoothFunctionModel(
      "exp_inv", "recurrence", j_max, [](long double x, std::size_t n) { return jets::exp_inv<long double>(x, n); },
      [](const Real& x, std::size_t n) { return jets::exp_inv<Real>(x, n); });
}

/// exp(a x) (entire; used to exercise analytic inputs).
inline SmoothFunctionModel exp_linear(double a, std::size_t j_max = kDefaultJetOrder) {
  auto make = [a](auto x, std::size_t n) {
    using T = decltype(x);
    using std::exp;
    std::vector<T> out(n + 1);
    out[0] = exp(T(a) * x);
    for (std::size_t j = 1; j <= n; ++j) out[j] = out[j - 1] * T(a) / T(static_cast<double>(j));
    return out;
  };
  return SmoothFunctionModel(
      "exp_linear", "closed-form", j_max, [make](long double x, std::size_t n) { return make(x, n); },
      [make](const Real& x, std::size_t n) { return make(x, n); });
}

/// sin(x).
inline SmoothFunctionModel sine(std::size_t j_max = kDefaultJetOrder) {
  auto make = [](auto x, std::size_t n) {
    using T = decltype(x);
    using std::cos;
    using std::sin;
    std::vector<T> out(n + 1);
    T s = sin(x), c = cos(x), fact(1);
    for (std::size_t j = 0; j <= n; ++j) {
      if (j) fact *= T(static_cast<double>(j));
      T d = (j % 4 == 0) ? s : (j % 4 == 1) ? c : (j % 4 == 2) ? T(-s) : T(-c);
      out[j] = d / fact;
    }
    return out;
  };
  return SmoothFunctionModel(
      "sin", "closed-form", j_max, [make](long double x, std::size_t n) { return make(x, n); },
      [make](const Real& x, std::size_t n) { return make(x, n); });
}

/// 1 / (1 - x/2).
inline SmoothFunctionModel geometric_half(std::size_t j_max = kDefaultJetOrder) {
  auto make = [](auto x, std::size_t n) {
    using T = decltype(x);
    std::vector<T> out(n + 1);
    // 1/(1 - (x+t)/2) = (1/d) * 1/(1 - t/(2d)), d = 1 - x/2
    T d = T(1) - x / T(2);
    T v = T(1) / d;
    for (std::size_t j = 0; j <= n; ++j) {
      out[j] = v;
      v /= (T(2) * d);
    }
    return out;
  };
  return SmoothFunctionModel(
      "geometric_half", "closed-form", j_max, [make](long double x, std::size_t n) { return make(x, n); },
      [make](const Real& x, std::size_t n) { return make(x, n); });
}

/// Product of models (jets multiply).
inline SmoothFunctionModel product(const SmoothFunctionModel& a, const SmoothFunctionModel& b) {
  std::size_t jm = std::min(a.j_max(), b.j_max());
  SmoothFunctionModel::JetMpFn mp;
  if (a.has_mp() && b.has_mp())
    mp = [a, b](const Real& x, std::size_t n) { return jets::multiply(a.jet_mp(x, n), b.jet_mp(x, n)); };
  return SmoothFunctionModel(
      "(" + a.name() + ")*(" + b.name() + ")", "product", jm,
      [a, b](long double x, std::size_t n) { return jets::multiply(a.jet(x, n), b.jet(x, n)); }, std::move(mp));
}

/// a^e for e >= 0.
inline SmoothFunctionModel power(const SmoothFunctionModel& a, unsigned e) {
  if (e == 0) return constant(1.0);
  SmoothFunctionModel::JetMpFn mp;
  if (a.has_mp()) mp = [a, e](const Real& x, std::size_t n) { return jets::power(a.jet_mp(x, n), e); };
  return SmoothFunctionModel(
      "(" + a.name() + ")^" + std::to_string(e), "product", a.j_max(),
      [a, e](long double x, std::size_t n) { return jets::power(a.jet(x, n), e); }, std::move(mp));
}

inline constexpr std::size_t kChebyshevPoints = 2048;
inline constexpr std::size_t kChebyshevTrustedOrder = 30;

/// Chebyshev interpolant of fn on [a, b] at n first-kind points, computed in
/// extended precision. Derivative series come from the standard recurrence;
/// jets are evaluated by Clenshaw on those series.
inline SmoothFunctionModel chebyshev(std::string name, const std::function<Real(const Real&)>& fn, double a = -2,
                                     double b = 2, std::size_t n = kChebyshevPoints,
                                     std::size_t j_max = kChebyshevTrustedOrder) {
  if (!(b > a) || n < 2) throw DomainError("chebyshev model: need a < b and n >= 2");
  const Real pi = acos(Real(-1));
  const std::size_t period = 4 * n;
  std::vector<Real> cosine(period);
  for (std::size_t m = 0; m < period; ++m) cosine[m] = cos(pi * Real(static_cast<double>(m)) / Real(2.0 * n));
  std::vector<Real> samples(n);
  const Real mid = (Real(a) + Real(b)) / 2, rad = (Real(b) - Real(a)) / 2;
  for (std::size_t k = 0; k < n; ++k) samples[k] = fn(mid + rad * cosine[(2 * k + 1) % period]);
  // c_m = (2/n) sum_k f(x_k) cos(m pi (k + 1/2) / n)
  std::vector<Real> c(n);
  for (std::size_t m = 0; m < n; ++m) {
    Real s(0);
    for (std::size_t k = 0; k < n; ++k) s += samples[k] * cosine[(m * (2 * k + 1)) % period];
    c[m] = s * 2 / Real(static_cast<double>(n));
  }
  c[0] /= 2;
  // derivative series, scaled to d/dx
  auto series = std::make_shared<std::vector<std::vector<Real>>>();
  series->push_back(c);
  const Real scale = Real(1) / rad;
  for (std::size_t j = 1; j <= j_max; ++j) {
    const auto& p = series->back();
    std::vector<Real> d(n, Real(0));
    for (std::size_t k = n - 1; k >= 1; --k) {
      Real next = (k + 1 < n) ? d[k + 1] : Real(0);
      d[k - 1] = next + 2 * Real(static_cast<double>(k)) * p[k] * scale;
    }
    d[0] /= 2;
    series->push_back(std::move(d));
  }
  auto ld = std::make_shared<std::vector<std::vector<long double>>>();
  for (const auto& s : *series) {
    std::vector<long double> v(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) v[k] = s[k].convert_to<long double>();
    ld->push_back(std::move(v));
  }
  const double mid_d = 0.5 * (a + b), rad_d = 0.5 * (b - a);
  auto eval = [](const auto& coeffs, auto u) {
    using T = decltype(u);
    T b1(0), b2(0);
    for (std::size_t k = coeffs.size(); k-- > 1;) {
      T t = T(2) * u * b1 - b2 + T(coeffs[k]);
      b2 = b1;
      b1 = t;
    }
    return u * b1 - b2 + T(coeffs[0]);
  };
  auto jet_ld = [ld, eval, mid_d, rad_d](long double x, std::size_t order) {
    long double u = (x - mid_d) / rad_d;
    Jet out(order + 1);
    long double fact = 1;
    for (std::size_t j = 0; j <= order; ++j) {
      if (j) fact *= static_cast<long double>(j);
      out[j] = eval((*ld)[j], u) / fact;
    }
    return out;
  };
  auto jet_mp = [series, eval, mid, rad](const Real& x, std::size_t order) {
    Real u = (x - mid) / rad;
    JetMp out(order + 1);
    Real fact(1);
    for (std::size_t j = 0; j <= order; ++j) {
      if (j) fact *= Real(static_cast<double>(j));
      out[j] = eval((*series)[j], u) / fact;
    }
    return out;
  };
  return SmoothFunctionModel(std::move(name), "chebyshev", j_max, jet_ld, jet_mp);
}

}  // namespace models

}  // namespace joris
