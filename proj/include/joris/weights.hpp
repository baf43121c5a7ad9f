#pragma once

// Weight sequences M = (M_j), the associated function h_M(t) = inf_j t^j M_j,
// and finite-window verdicts for the growth conditions used by the
// Denjoy-Carleman machinery (moderate growth, strong non-quasianalyticity,
// stability under derivation).

#include "joris/errors.hpp"
#include "joris/precision.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace joris {

enum class SequenceKind { gevrey, qgevrey, table };

inline const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::gevrey: return "gevrey";
    case SequenceKind::qgevrey: return "qgevrey";
    case SequenceKind::table: return "table";
  }
  return "?";
}

/// Lazily evaluated weight sequence with a memoized extended-precision cache.
///
/// Values are described by ln M_j. A regularized prefix (from log-convex
/// regularization) is stored explicitly; indices past the prefix come from a
/// closed form. Copies share the cache, which is safe for concurrent readers
/// and extenders.
class WeightSequence {
 public:
  using LogFormMp = std::function<Real(std::size_t)>;
  using LogFormFast = std::function<double(std::size_t)>;
  using LogRatioFast = std::function<double(std::size_t)>;

  struct Definition {
    std::string name;
    SequenceKind kind = SequenceKind::table;
    std::vector<double> params;
    std::vector<Real> log_prefix;  // ln M_j for j < log_prefix.size()
    LogFormMp log_tail_mp;          // ln M_j past the prefix (may be empty)
    LogFormFast log_tail_fast;
    LogRatioFast log_ratio_tail;    // ln(M_{j+1}/M_j) for j >= prefix size
    std::optional<std::size_t> max_index;
  };

  WeightSequence() = default;
  explicit WeightSequence(Definition def) : impl_(std::make_shared<Impl>(std::move(def))) {}

  const std::string& name() const { return impl_->def.name; }
  SequenceKind kind() const { return impl_->def.kind; }
  const std::vector<double>& params() const { return impl_->def.params; }
  std::optional<std::size_t> max_index() const { return impl_->def.max_index; }
  bool valid() const { return static_cast<bool>(impl_); }

  /// Canonical "kind:p1,p2" string (tables list their regularized values).
  std::string spec_string() const {
    std::ostringstream os;
    os << to_string(kind()) << ':';
    if (kind() == SequenceKind::table) {
      for (std::size_t j = 0; j < impl_->def.log_prefix.size(); ++j) {
        if (j) os << ',';
        os << static_cast<double>(exp(impl_->def.log_prefix[j]));
      }
    } else {
      for (std::size_t i = 0; i < params().size(); ++i) {
        if (i) os << ',';
        os << params()[i];
      }
    }
    return os.str();
  }

  /// ln M_j in extended precision (memoized).
  Real log_value(std::size_t j) const {
    check_index(j);
    {
      std::shared_lock lock(impl_->mutex);
      if (j < impl_->cache.size()) return impl_->cache[j];
    }
    std::unique_lock lock(impl_->mutex);
    while (impl_->cache.size() <= j) {
      std::size_t i = impl_->cache.size();
      impl_->cache.push_back(compute_log_mp(i));
    }
    return impl_->cache[j];
  }

  /// M_j in extended precision.
  Real value(std::size_t j) const { return exp(log_value(j)); }

  /// Number of memoized entries.
  std::size_t cached_count() const {
    std::shared_lock lock(impl_->mutex);
    return impl_->cache.size();
  }

  /// ln M_j in double precision (no caching; O(1)).
  double log_m(std::size_t j) const {
    check_index(j);
    const auto& d = impl_->def;
    if (j < d.log_prefix.size()) return static_cast<double>(d.log_prefix[j]);
    return d.log_tail_fast(j);
  }

  /// ln(M_{j+1}/M_j) in double precision; nondecreasing in j.
  double log_ratio(std::size_t j) const {
    check_index(j + 1);
    const auto& d = impl_->def;
    if (j + 1 < d.log_prefix.size())
      return static_cast<double>(d.log_prefix[j + 1] - d.log_prefix[j]);
    if (j + 1 == d.log_prefix.size()) return d.log_tail_fast(j + 1) - static_cast<double>(d.log_prefix[j]);
    return d.log_ratio_tail(j);
  }

  /// Breakpoint t_j = M_j / M_{j+1}.
  double breakpoint(std::size_t j) const { return std::exp(-log_ratio(j)); }

 private:
  struct Impl {
    explicit Impl(Definition d) : def(std::move(d)) {}
    Definition def;
    mutable std::shared_mutex mutex;
    std::vector<Real> cache;
  };

  void check_index(std::size_t j) const {
    if (!impl_) throw DomainError("weight sequence is empty");
    if (impl_->def.max_index && j > *impl_->def.max_index)
      throw DomainError("index " + std::to_string(j) + " beyond table of sequence '" + name() + "'");
  }

  Real compute_log_mp(std::size_t j) const {
    const auto& d = impl_->def;
    if (j < d.log_prefix.size()) return d.log_prefix[j];
    return d.log_tail_mp(j);
  }

  std::shared_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Regularization

/// Largest log-convex minorant of a positive sequence after normalizing the
/// first term to 1, returned as ln values. Lower convex hull of (j, ln raw_j).
inline std::vector<Real> log_convex_minorant_log(const std::vector<Real>& raw) {
  if (raw.empty()) throw DomainError("log_convex_regularize: empty input");
  for (const auto& r : raw)
    if (!(r > 0) || !boost::multiprecision::isfinite(r))
      throw DomainError("log_convex_regularize: values must be positive and finite");
  const std::size_t n = raw.size();
  std::vector<Real> lg(n);
  Real l0 = log(raw[0]);
  for (std::size_t j = 0; j < n; ++j) lg[j] = log(raw[j]) - l0;

  // Andrew's monotone chain, lower hull only; x-coordinates are already sorted.
  std::vector<std::size_t> hull;
  for (std::size_t j = 0; j < n; ++j) {
    while (hull.size() >= 2) {
      std::size_t a = hull[hull.size() - 2], b = hull.back();
      // keep b only if it lies strictly below segment a -> j
      Real cross = (lg[b] - lg[a]) * Real(j - a) - (lg[j] - lg[a]) * Real(b - a);
      if (cross >= 0) hull.pop_back();
      else break;
    }
    hull.push_back(j);
  }
  std::vector<Real> out(n);
  for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
    std::size_t a = hull[s], b = hull[s + 1];
    for (std::size_t j = a; j <= b; ++j)
      out[j] = lg[a] + (lg[b] - lg[a]) * Real(j - a) / Real(b - a);
  }
  if (hull.size() == 1) out[0] = lg[0];
  for (std::size_t j = 1; j < n; ++j)
    if (out[j] < out[j - 1])
      throw DomainError("log_convex_regularize: regularized sequence is not nondecreasing "
                        "(raw values dip below raw[0])");
  return out;
}

/// Regularized values (M_0 = 1, nondecreasing, log-convex, pointwise <= raw/raw[0]).
inline std::vector<Real> log_convex_regularize(const std::vector<Real>& raw) {
  auto lg = log_convex_minorant_log(raw);
  std::vector<Real> out;
  out.reserve(lg.size());
  for (auto& l : lg) out.push_back(exp(l));
  return out;
}

inline std::vector<Real> log_convex_regularize(const std::vector<double>& raw) {
  std::vector<Real> r(raw.begin(), raw.end());
  return log_convex_regularize(r);
}

// ---------------------------------------------------------------------------
// Constructors

namespace detail {

inline double lnln3(double j) { return std::log(std::log(std::max(j, 3.0))); }

}  // namespace detail

/// Prefix length over which the Gevrey-type first terms are regularized.
inline constexpr std::size_t kGevreyRegularizationWindow = 64;

/// M_j = (j!)^alpha (ln max(j,3))^{beta j}, first terms log-convex regularized.
inline WeightSequence make_gevrey(double alpha, double beta = 0.0) {
  if (!(alpha > 0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("make_gevrey: alpha must be > 0");
  auto log_mp = [alpha, beta](std::size_t j) {
    Real jj(static_cast<double>(j));
    Real v = Real(alpha) * lgamma_real(jj + 1);
    if (beta != 0) v += Real(beta) * jj * log(log(jj < 3 ? Real(3) : jj));
    return v;
  };
  auto log_fast = [alpha, beta](std::size_t j) {
    double jj = static_cast<double>(j);
    double v = alpha * static_cast<double>(std::lgamma(static_cast<long double>(jj) + 1.0L));
    if (beta != 0) v += beta * jj * detail::lnln3(jj);
    return v;
  };
  auto ratio_fast = [alpha, beta](std::size_t j) {
    double jj = static_cast<double>(j);
    double v = alpha * std::log1p(jj);
    if (beta != 0) {
      double dl;
      if (jj >= 3) dl = std::log1p(std::log1p(1.0 / jj) / std::log(jj));
      else dl = detail::lnln3(jj + 1) - detail::lnln3(jj);
      v += beta * (detail::lnln3(jj + 1) + jj * dl);
    }
    return v;
  };

  WeightSequence::Definition def;
  {
    std::ostringstream os;
    os << "gevrey(" << alpha << ',' << beta << ')';
    def.name = os.str();
  }
  def.kind = SequenceKind::gevrey;
  def.params = {alpha, beta};
  if (beta == 0) {
    def.log_prefix = {Real(0)};
  } else {
    // "suitable first terms": clamp raw below by 1, then log-convex regularize.
    std::vector<Real> raw;
    for (std::size_t j = 0; j <= kGevreyRegularizationWindow; ++j) {
      Real v = exp(log_mp(j));
      raw.push_back(v < 1 ? Real(1) : v);
    }
    def.log_prefix = log_convex_minorant_log(raw);
  }
  def.log_tail_mp = log_mp;
  def.log_tail_fast = log_fast;
  def.log_ratio_tail = ratio_fast;
  return WeightSequence(std::move(def));
}

/// M^lambda_j = exp(lambda j^2 / 4).
inline WeightSequence make_qgevrey(double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw DomainError("make_qgevrey: lambda must be > 0");
  WeightSequence::Definition def;
  std::ostringstream os;
  os << "qgevrey(" << lambda << ')';
  def.name = os.str();
  def.kind = SequenceKind::qgevrey;
  def.params = {lambda};
  def.log_tail_mp = [lambda](std::size_t j) {
    Real jj(static_cast<double>(j));
    return Real(lambda) * jj * jj / 4;
  };
  def.log_tail_fast = [lambda](std::size_t j) {
    double jj = static_cast<double>(j);
    return lambda * jj * jj / 4.0;
  };
  def.log_ratio_tail = [lambda](std::size_t j) { return lambda * (2.0 * static_cast<double>(j) + 1.0) / 4.0; };
  return WeightSequence(std::move(def));
}

/// Finite table, regularized on load. Indices beyond the table are a domain error.
inline WeightSequence make_table(std::string name, const std::vector<Real>& raw) {
  WeightSequence::Definition def;
  def.name = std::move(name);
  def.kind = SequenceKind::table;
  def.log_prefix = log_convex_minorant_log(raw);
  def.max_index = raw.size() - 1;
  def.log_tail_mp = [](std::size_t) -> Real { throw DomainError("table index out of range"); };
  def.log_tail_fast = [](std::size_t) -> double { throw DomainError("table index out of range"); };
  def.log_ratio_tail = [](std::size_t) -> double { throw DomainError("table index out of range"); };
  return WeightSequence(std::move(def));
}

inline WeightSequence make_table(std::string name, const std::vector<double>& raw) {
  return make_table(std::move(name), std::vector<Real>(raw.begin(), raw.end()));
}

/// Parses "gevrey:alpha[,beta]", "qgevrey:lambda" or "table:v0,v1,...".
inline WeightSequence parse_sequence(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw DomainError("sequence spec must look like kind:params, got '" + spec + "'");
  std::string kind = spec.substr(0, colon);
  std::vector<double> vals;
  std::stringstream ss(spec.substr(colon + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DomainError("bad number '" + tok + "' in sequence spec '" + spec + "'");
    }
  }
  if (kind == "gevrey") {
    if (vals.empty() || vals.size() > 2) throw DomainError("gevrey takes alpha[,beta]");
    return make_gevrey(vals[0], vals.size() > 1 ? vals[1] : 0.0);
  }
  if (kind == "qgevrey") {
    if (vals.size() != 1) throw DomainError("qgevrey takes lambda");
    return make_qgevrey(vals[0]);
  }
  if (kind == "table") {
    if (vals.empty()) throw DomainError("table needs values");
    return make_table("table", vals);
  }
  throw DomainError("unknown sequence kind '" + kind + "'");
}

/// Sequence from a config record {name, kind, ...params}.
inline WeightSequence sequence_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  std::string name = j.value("name", kind);
  WeightSequence seq;
  if (kind == "gevrey") {
    seq = make_gevrey(j.at("alpha").get<double>(), j.value("beta", 0.0));
  } else if (kind == "qgevrey") {
    seq = make_qgevrey(j.at("lambda").get<double>());
  } else if (kind == "table") {
    seq = make_table(name, j.at("values").get<std::vector<double>>());
  } else {
    throw DomainError("unknown sequence kind '" + kind + "'");
  }
  return seq;
}

/// Loads {"sequences": [...]} into (name, sequence) pairs.
inline std::vector<std::pair<std::string, WeightSequence>> load_sequences(const nlohmann::json& cfg) {
  std::vector<std::pair<std::string, WeightSequence>> out;
  for (const auto& rec : cfg.at("sequences")) {
    std::string name = rec.value("name", rec.at("kind").get<std::string>());
    out.emplace_back(name, sequence_from_json(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Associated function h_M

/// Index j minimizing t^j M_j: the first j with t >= t_j. Galloping search over
/// the nondecreasing log-ratios (log-convexity makes the first upturn global).
inline std::size_t minimizer_index(const WeightSequence& M, double t) {
  if (!(t > 0)) throw DomainError("minimizer_index: t must be > 0");
  const double target = -std::log(t);  // need log_ratio(j) >= target
  auto ok = [&](std::size_t j) { return M.log_ratio(j) >= target; };
  if (ok(0)) return 0;
  std::size_t lo = 0, hi = 1;
  const std::size_t cap = M.max_index() ? *M.max_index() - 1 : std::numeric_limits<std::size_t>::max() / 4;
  while (!ok(hi)) {
    lo = hi;
    if (hi >= cap) throw DomainError("h_M: t below the resolution of sequence '" + M.name() + "'");
    hi = std::min(hi * 2, cap);
  }
  while (hi - lo > 1) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (ok(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

/// ln h_M(t); -inf at t = 0.
inline double log_h(const WeightSequence& M, double t) {
  if (t < 0 || std::isnan(t)) throw DomainError("h_M: t must be >= 0");
  if (t == 0) return -std::numeric_limits<double>::infinity();
  std::size_t j = minimizer_index(M, t);
  if (j == 0) return 0.0;
  return static_cast<double>(j) * std::log(t) + M.log_m(j);
}

/// h_M(t) in double precision (underflows to 0 for very small t).
inline double h_M(const WeightSequence& M, double t) { return std::exp(log_h(M, t)); }

/// h_M(t) in extended precision.
inline Real h_M_exact(const WeightSequence& M, const Real& t) {
  if (t < 0) throw DomainError("h_M: t must be >= 0");
  if (t == 0) return Real(0);
  std::size_t j = minimizer_index(M, static_cast<double>(t));
  // The double-precision index can be off by one at a breakpoint.
  Real best = pow(t, static_cast<long>(j)) * M.value(j);
  for (long d : {-1L, 1L}) {
    long i = static_cast<long>(j) + d;
    if (i < 0) continue;
    if (M.max_index() && static_cast<std::size_t>(i) > *M.max_index()) continue;
    Real v = pow(t, i) * M.value(static_cast<std::size_t>(i));
    if (v < best) best = v;
  }
  return best;
}

/// Logarithmically spaced grid of n points in [tmin, tmax].
inline std::vector<double> log_grid(double tmin, double tmax, std::size_t n) {
  if (!(tmin > 0) || !(tmax > tmin) || n < 2) throw DomainError("log_grid: need 0 < tmin < tmax, n >= 2");
  std::vector<double> g(n);
  double a = std::log(tmin), b = std::log(tmax);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = tmin;
  g.back() = tmax;
  return g;
}

struct LegendreRecovery {
  Real value;               // sup over the grid of t^{-j} h_M(t)
  bool low_confidence = false;  // no grid point in [t_j, t_{j-1}]
};

/// Recovers M_j as sup_t t^{-j} h_M(t) over a grid.
inline LegendreRecovery legendre_recover(const WeightSequence& M, std::size_t j, const std::vector<double>& t_grid) {
  LegendreRecovery out{Real(0), true};
  const double lo = M.breakpoint(j);
  const double hi = j == 0 ? std::numeric_limits<double>::infinity() : M.breakpoint(j - 1);
  for (double t : t_grid) {
    if (!(t > 0)) continue;
    Real tt(t);
    Real v = h_M_exact(M, tt) / pow(tt, static_cast<long>(j));
    if (v > out.value) out.value = v;
    if (t >= lo && t <= hi) out.low_confidence = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Growth conditions

enum class GrowthCondition { moderate_growth, snqa, stab_der };

inline const char* to_string(GrowthCondition c) {
  switch (c) {
    case GrowthCondition::moderate_growth: return "moderate_growth";
    case GrowthCondition::snqa: return "snqa";
    case GrowthCondition::stab_der: return "stab_der";
  }
  return "?";
}

inline GrowthCondition parse_condition(const std::string& s) {
  if (s == "moderate_growth" || s == "moderate-growth") return GrowthCondition::moderate_growth;
  if (s == "snqa") return GrowthCondition::snqa;
  if (s == "stab_der" || s == "stab-der") return GrowthCondition::stab_der;
  throw DomainError("unknown growth condition '" + s + "'");
}

struct GrowthReport {
  GrowthCondition condition;
  bool holds = false;
  double witness_constant = 0;               // fitted A over the whole window
  std::pair<std::size_t, std::size_t> worst_pair{0, 0};  // (j,k); (k,k) for single-index conditions
  std::size_t scan_bound = 0;
  double half_window_constant = 0;           // fitted A over the first half of the window
};

inline void to_json(nlohmann::json& j, const GrowthReport& r) {
  j = nlohmann::json{{"condition", to_string(r.condition)},
                     {"holds", r.holds},
                     {"witness_constant", r.witness_constant},
                     {"worst_pair", {r.worst_pair.first, r.worst_pair.second}},
                     {"scan_bound", r.scan_bound}};
}

/// A fitted constant counts as stable when it grows by at most this factor
/// from the first half of the scan window to the full window.
inline constexpr double kStabilizationFactor = 1.25;

namespace detail {

inline GrowthReport scan_moderate_growth(const WeightSequence& M, std::size_t J) {
  GrowthReport r{GrowthCondition::moderate_growth};
  r.scan_bound = J;
  const std::size_t half = (J + 1) / 2;
  double best = 1.0, best_half = 1.0;
  for (std::size_t j = 1; j < J; ++j)
    for (std::size_t k = j; j + k <= J; ++k) {
      double a = std::exp((M.log_m(j + k) - M.log_m(j) - M.log_m(k)) / static_cast<double>(j + k));
      if (a > best) {
        best = a;
        r.worst_pair = {j, k};
      }
      if (j + k <= half) best_half = std::max(best_half, a);
    }
  r.witness_constant = best;
  r.half_window_constant = best_half;
  r.holds = best <= kStabilizationFactor * best_half;
  return r;
}

inline GrowthReport scan_stab_der(const WeightSequence& M, std::size_t J) {
  GrowthReport r{GrowthCondition::stab_der};
  r.scan_bound = J;
  const std::size_t half = (J + 1) / 2;
  double best = 1.0, best_half = 1.0;
  for (std::size_t j = 0; j < J; ++j) {
    double a = std::exp(M.log_ratio(j) / static_cast<double>(j + 1));
    if (a > best) {
      best = a;
      r.worst_pair = {j, j};
    }
    if (j < half) best_half = std::max(best_half, a);
  }
  r.witness_constant = best;
  r.half_window_constant = best_half;
  r.holds = best <= kStabilizationFactor * best_half;
  return r;
}

inline GrowthReport scan_snqa(const WeightSequence& M, std::size_t J) {
  GrowthReport r{GrowthCondition::snqa};
  r.scan_bound = J;
  std::size_t far = std::max<std::size_t>(50 * J, 4000);
  if (M.max_index()) far = std::min(far, *M.max_index() - 1);
  if (far <= J + 2) throw DomainError("snqa check: sequence table too short for the scan window");
  auto term = [&](std::size_t j) { return std::exp(-M.log_ratio(j)) / static_cast<double>(j + 1); };
  // Tail past `far` from a power-law fit of the terms; p <= 1 means divergence.
  double t_far = term(far), t_half = term(far / 2);
  double p = std::log(t_half / t_far) / std::log(static_cast<double>(far) / static_cast<double>(far / 2));
  double tail = 0;
  bool divergent = false;
  if (t_far == 0 || !std::isfinite(p)) tail = 0;
  else if (p > 1.05) tail = t_far * static_cast<double>(far) / (p - 1.0);
  else divergent = true;

  std::vector<double> suffix(far + 2, 0.0);
  suffix[far + 1] = tail;
  for (std::size_t j = far + 1; j-- > 0;) suffix[j] = suffix[j + 1] + term(j);

  const std::size_t half = (J + 1) / 2;
  double best = 0, best_half = 0;
  for (std::size_t k = 0; k <= J; ++k) {
    double a = suffix[k] / M.breakpoint(k);
    if (a > best) {
      best = a;
      r.worst_pair = {k, k};
    }
    if (k < half) best_half = std::max(best_half, a);
  }
  r.witness_constant = best;
  r.half_window_constant = best_half;
  r.holds = !divergent && best <= kStabilizationFactor * best_half;
  return r;
}

}  // namespace detail

/// Finite-window verdict on a growth condition; the report states the window.
inline GrowthReport check_growth(const WeightSequence& M, GrowthCondition c, std::size_t j_scan) {
  if (j_scan < 2) throw DomainError("check_growth: j_scan must be >= 2");
  switch (c) {
    case GrowthCondition::moderate_growth: return detail::scan_moderate_growth(M, j_scan);
    case GrowthCondition::stab_der: return detail::scan_stab_der(M, j_scan);
    case GrowthCondition::snqa: return detail::scan_snqa(M, j_scan);
  }
  throw DomainError("unknown condition");
}

/// First pair (j <= k, ordered by j + k) with M_{j+k} > A^{j+k} M_j M_k, if any.
inline std::optional<std::pair<std::size_t, std::size_t>> moderate_growth_violation(const WeightSequence& M, double A,
                                                                                    std::size_t max_sum) {
  const double la = std::log(A);
  for (std::size_t s = 2; s <= max_sum; ++s)
    for (std::size_t j = 1; j <= s / 2; ++j) {
      std::size_t k = s - j;
      if (M.log_m(s) - M.log_m(j) - M.log_m(k) > la * static_cast<double>(s)) return std::make_pair(j, k);
    }
  return std::nullopt;
}

/// Default t-grid for kappa searches: 1000 log-spaced points from the
/// breakpoint t_J (J = 10^6, floored at 1e-300) up to 10.
inline std::vector<double> default_kappa_grid(const WeightSequence& M) {
  std::size_t J = 1000000;
  if (M.max_index()) J = std::min(J, *M.max_index() - 1);
  double tmin = std::max(M.breakpoint(J), 1e-300);
  return log_grid(std::min(tmin, 1e-2), 10.0, 1000);
}

inline constexpr double kKappaCap = 1e6;

/// Whether h_M(t) <= h_M(kappa t)^s holds at every grid point.
inline bool kappa_feasible(const WeightSequence& M, double s, double kappa, const std::vector<double>& t_grid) {
  for (double t : t_grid) {
    double lhs = log_h(M, t);
    double rhs = s * log_h(M, kappa * t);
    if (lhs > rhs + 1e-12 * std::max(1.0, std::abs(lhs))) return false;
  }
  return true;
}

/// Smallest grid-feasible kappa_s >= 1 with h_M(t) <= h_M(kappa_s t)^s.
/// Throws DomainError when no kappa below `cap` works (moderate growth fails).
inline double kappa_for(const WeightSequence& M, double s, const std::vector<double>& t_grid,
                        double cap = kKappaCap) {
  if (!(s >= 1)) throw DomainError("kappa_for: s must be >= 1");
  if (kappa_feasible(M, s, 1.0, t_grid)) return 1.0;
  if (!kappa_feasible(M, s, cap, t_grid))
    throw DomainError("kappa_for: no kappa below cap " + std::to_string(cap) + " for sequence '" + M.name() +
                      "' (moderate growth violated numerically)");
  double lo = 0.0, hi = std::log(cap);  // log-kappa bracket: lo infeasible, hi feasible
  while (hi - lo > 1e-7) {
    double mid = 0.5 * (lo + hi);
    if (kappa_feasible(M, s, std::exp(mid), t_grid)) hi = mid;
    else lo = mid;
  }
  return std::exp(hi);
}

inline double kappa_for(const WeightSequence& M, double s) { return kappa_for(M, s, default_kappa_grid(M)); }

}  // namespace joris
