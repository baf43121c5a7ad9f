#pragma once

// Command-line surface: option parsing, run manifests and the command bodies.
// tools/joris_cli.cpp is a thin main() around run().

#include "joris/gallery.hpp"
#include "joris/geometry.hpp"
#include "joris/joris.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>

#ifndef JORIS_VERSION
#define JORIS_VERSION "0.1.0"
#endif
#ifndef JORIS_DATA_DIR
#define JORIS_DATA_DIR "data"
#endif

namespace joris::cli {

using nlohmann::json;

inline constexpr int kExitPass = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBound = 3;
inline constexpr int kExitData = 4;

/// Everything needed to regenerate a report from the same build.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json sequences = json::array();
  unsigned precision_bits = 0;
  std::uint64_t seed = 0;
  std::string version = JORIS_VERSION;

  json to_json() const {
    return {{"command", command},
            {"argv", argv},
            {"config", config},
            {"sequences", sequences},
            {"precision", {{"default_bits", precision_bits}, {"gallery_bits", kGalleryPrecisionBits}}},
            {"seed", seed},
            {"version", version}};
  }

  static RunManifest from_json(const json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.value("config", json::object());
    m.sequences = j.value("sequences", json::array());
    m.precision_bits = j.at("precision").at("default_bits").get<unsigned>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.version = j.value("version", std::string());
    return m;
  }

  void add_sequence(const WeightSequence& M) { sequences.push_back({{"name", M.name()}, {"spec", M.spec_string()}}); }
};

/// Where reports go. In capture mode nothing touches the filesystem.
struct Sink {
  bool capture = false;
  std::string report;  // last report dump (capture mode)
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

inline std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

inline void emit(Sink& sink, const std::string& path, const std::string& text) {
  if (sink.capture) return;
  if (path.empty() || path == "-") {
    *sink.out << text;
  } else {
    write_file_atomic(path, text);
  }
}

inline void emit_report(Sink& sink, const std::string& path, const json& report) {
  auto text = dump_report(report);
  if (sink.capture) {
    sink.report = text;
    return;
  }
  emit(sink, path, text);
}

// ---------------------------------------------------------------------------
// Builtin functions

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"zero", "one", "identity", "square", "expinv", "sine"};
  return names;
}

/// A builtin name or "poly:c0,c1,...".
inline SmoothFunctionModel builtin_function(const std::string& name) {
  if (name == "zero") return models::zero();
  if (name == "one") return models::constant(1.0);
  if (name == "identity") return models::identity();
  if (name == "square") return models::square();
  if (name == "expinv") return models::exp_inv();
  if (name == "sine") return models::sine();
  if (name.rfind("poly:", 0) == 0) {
    std::vector<double> c;
    std::stringstream ss(name.substr(5));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        c.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DomainError("bad coefficient '" + tok + "' in '" + name + "'");
      }
    }
    return models::polynomial(name, c);
  }
  throw DomainError("unknown function '" + name + "'");
}

/// {"fp": [coeffs], "fq": [coeffs], "oracle": [coeffs]} with power-basis coefficients.
struct FileModels {
  SmoothFunctionModel fp, fq, oracle;
};

inline FileModels load_models(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  auto poly = [&](const char* key) {
    if (!j.contains(key)) throw DataError(path + ": missing '" + std::string(key) + "'");
    try {
      return models::polynomial(key, j.at(key).get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
  };
  return {poly("fp"), poly("fq"), poly("oracle")};
}

// ---------------------------------------------------------------------------
// weights

struct WeightsOptions {
  std::string sequence;
  std::vector<std::string> checks;
  std::size_t j_scan = 40;
  std::size_t j_breakpoints = 30;
  bool hm = false;
  double tmin = 1e-6, tmax = 10;
  std::size_t points = 200;
  std::string out, csv;
};

/// Max relative error of h_M(t_j) = t_j^j M_j for 1 <= j <= J at t_j = M_j / M_{j+1}.
inline double breakpoint_identity_error(const WeightSequence& M, std::size_t J) {
  Real worst(0);
  for (std::size_t j = 1; j <= J; ++j) {
    if (M.max_index() && j + 1 > *M.max_index()) break;
    Real tj = M.value(j) / M.value(j + 1);
    Real direct = pow(tj, static_cast<long>(j)) * M.value(j);
    Real rel = abs(h_M_exact(M, tj) - direct) / direct;
    if (rel > worst) worst = rel;
  }
  return worst.convert_to<double>();
}

inline constexpr double kBreakpointTolerance = 1e-12;

inline int cmd_weights(const WeightsOptions& o, RunManifest man, Sink& sink) {
  auto M = parse_sequence(o.sequence);
  man.add_sequence(M);
  man.config = {{"sequence", o.sequence}, {"checks", o.checks}, {"j_scan", o.j_scan},
                {"j_breakpoints", o.j_breakpoints}, {"hm", o.hm}, {"tmin", o.tmin}, {"tmax", o.tmax},
                {"points", o.points}};
  std::vector<GrowthCondition> conds;
  for (const auto& c : o.checks) {
    if (c == "all") {
      conds = {GrowthCondition::moderate_growth, GrowthCondition::snqa, GrowthCondition::stab_der};
      break;
    }
    conds.push_back(parse_condition(c));
  }
  json rep{{"manifest", man.to_json()}, {"sequence", M.spec_string()}};
  bool pass = true;
  rep["growth"] = json::array();
  for (auto c : conds) {
    auto g = check_growth(M, c, o.j_scan);
    pass &= g.holds;
    rep["growth"].push_back(g);
  }
  double bp = breakpoint_identity_error(M, o.j_breakpoints);
  rep["breakpoint_identity"] = {{"j_max", o.j_breakpoints}, {"max_relative_error", bp},
                                {"tolerance", kBreakpointTolerance}, {"holds", bp <= kBreakpointTolerance}};
  pass &= bp <= kBreakpointTolerance;
  if (o.hm) {
    std::ostringstream csv;
    csv << std::setprecision(17) << "t,h_M,log_h_M\n";
    for (double t : log_grid(o.tmin, o.tmax, o.points)) csv << t << ',' << h_M(M, t) << ',' << log_h(M, t) << '\n';
    if (o.csv.empty() && o.out.empty() && !sink.capture) {
      emit(sink, "", csv.str());
      return pass ? kExitPass : kExitBound;
    }
    emit(sink, o.csv, csv.str());
    rep["hm_csv"] = o.csv.empty() ? "-" : o.csv;
  }
  rep["verdict"] = {{"pass", pass}};
  emit_report(sink, o.out, rep);
  return pass ? kExitPass : kExitBound;
}

// ---------------------------------------------------------------------------
// cover

struct CoverOptions {
  double eps = 1;
  std::string out;
};

inline int cmd_cover(const CoverOptions& o, RunManifest man, Sink& sink) {
  man.config = {{"eps", o.eps}};
  auto cover = build_cover(o.eps);
  auto chk = check_cover(cover);
  double gap = boundary_gap(o.eps);
  bool pass = chk.covering && chk.safety && gap >= o.eps * o.eps / 4;
  json rep{{"manifest", man.to_json()},
           {"cover", cover_to_json(cover)},
           {"check",
            {{"covering", chk.covering}, {"safety", chk.safety}, {"min_boundary_distance", chk.min_boundary_distance},
             {"samples", chk.samples}}},
           {"boundary_gap", gap},
           {"verdict", {{"pass", pass}}}};
  emit_report(sink, o.out, rep);
  return pass ? kExitPass : kExitBound;
}

// ---------------------------------------------------------------------------
// dbar-selftest

struct DiskGolden {
  double h = 0;
  double sup_error = 0;     // max |v - closed form| at probes >= 2h from the circle
  double dbar_residual = 0; // max |dbar v - 1_D| at interior probes
  std::size_t probes = 0;
};

/// Closed-form Cauchy transform of the indicator of the unit disk.
inline Complex disk_transform(Complex z) { return std::abs(z) <= 1 ? std::conj(z) : 1.0 / z; }

/// Indicator of the unit disk as exact per-cell area fractions.
inline GridFunction disk_indicator(const Grid& g) {
  const double h = g.h;
  return GridFunction::sample(
      g,
      [h](Complex z) {
        return Complex(disk_rect_area(0, 1, z.real() - h / 2, z.real() + h / 2, z.imag() - h / 2, z.imag() + h / 2) /
                           (h * h),
                       0);
      },
      [h](Complex z) { return std::abs(z) < 1 + h; }, "disk");
}

/// Probes are cell centers at distance >= `margin` from the unit circle; a ladder
/// of spacings shares one margin so every grid is probed on the same region.
inline DiskGolden disk_golden(double h, double margin) {
  auto g = make_centered_grid(1.6, 1.6, h);
  auto w = disk_indicator(g);
  auto v = cauchy_convolve(w);
  DiskGolden out;
  out.h = h;
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i) {
      Complex z = g.point(i, j);
      if (std::abs(std::abs(z) - 1) < margin) continue;
      ++out.probes;
      out.sup_error = std::max(out.sup_error, std::abs(v.at(i, j) - disk_transform(z)));
    }
  out.dbar_residual = dbar_residual(v, &w, [margin](Complex z) { return std::abs(z) < 1 - margin; });
  return out;
}

struct DbarOptions {
  std::vector<double> h{1.0 / 32, 1.0 / 64, 1.0 / 128};
  std::string out;
};

struct DiskLadder {
  double margin = 0;
  std::vector<DiskGolden> rows;
  double error_slope = 0;
  bool residual_ok = true;  // dbar residual <= 5h on every grid
  bool ok = false;
};

/// Golden disk test across spacings: error slope in h at least 1 on the common
/// probe region, dbar residual at most 5h at interior probes.
inline DiskLadder disk_ladder(const std::vector<double>& hs) {
  if (hs.size() < 2) throw DomainError("disk_ladder: need at least two spacings");
  DiskLadder out;
  for (double h : hs)
    if (!(h > 0) || h > 0.25) throw DomainError("disk_ladder: spacing must lie in (0, 1/4]");
  out.margin = 2 * *std::max_element(hs.begin(), hs.end());
  std::vector<double> errs;
  for (double h : hs) {
    out.rows.push_back(disk_golden(h, out.margin));
    out.residual_ok &= out.rows.back().dbar_residual <= 5 * h;
    errs.push_back(out.rows.back().sup_error);
  }
  out.error_slope = fit_log_slope(hs, errs);
  out.ok = out.residual_ok && out.error_slope >= 1.0;
  return out;
}

inline int cmd_dbar_selftest(const DbarOptions& o, RunManifest man, Sink& sink) {
  man.config = {{"h", o.h}};
  auto L = disk_ladder(o.h);
  json rows = json::array();
  for (const auto& d : L.rows)
    rows.push_back({{"h", d.h}, {"sup_error", d.sup_error}, {"dbar_residual", d.dbar_residual},
                    {"residual_bound", 5 * d.h}, {"probes", d.probes}});
  json rep{{"manifest", man.to_json()}, {"probe_margin", L.margin}, {"rows", rows},
           {"error_slope", L.error_slope}, {"verdict", {{"pass", L.ok}}}};
  emit_report(sink, o.out, rep);
  return L.ok ? kExitPass : kExitBound;
}

// ---------------------------------------------------------------------------
// pm-build / pm-verify

struct PmBuildOptions {
  std::string f = "identity";
  std::string sequence = "gevrey:1,0";
  double eps0 = 1;
  std::size_t depth = 5;
  std::string dir, out;
};

inline json family_report_json(const FamilyReport& r) {
  json j = r;
  j["error_slope"] = std::isfinite(r.error_slope) ? json(r.error_slope) : json(nullptr);
  return j;
}

inline int cmd_pm_build(const PmBuildOptions& o, RunManifest man, Sink& sink) {
  auto M = parse_sequence(o.sequence);
  man.add_sequence(M);
  man.config = {{"f", o.f}, {"sequence", o.sequence}, {"eps0", o.eps0}, {"depth", o.depth}, {"dir", o.dir}};
  auto f = builtin_function(o.f);
  FamilyOptions fo;
  fo.throw_on_failure = false;
  auto fb = build_family(f, M, o.eps0, o.depth, fo);
  if (!sink.capture && !o.dir.empty()) save_family(fb.family, o.dir);
  json rep{{"manifest", man.to_json()},
           {"sigma", fb.sigma},
           {"flatness", fb.flatness},
           {"constants", fb.family.constants.to_json()},
           {"report", family_report_json(fb.report)},
           {"verdict", {{"pass", fb.report.ok}, {"failure", fb.report.failure}}}};
  emit_report(sink, o.out, rep);
  return fb.report.ok ? kExitPass : kExitBound;
}

struct PmVerifyOptions {
  std::string dir;
  std::string f;  // optional target
  std::string out;
};

inline int cmd_pm_verify(const PmVerifyOptions& o, RunManifest man, Sink& sink) {
  man.config = {{"dir", o.dir}, {"f", o.f}};
  auto loaded = load_family(o.dir);
  man.add_sequence(loaded.family.sequence);
  std::optional<SmoothFunctionModel> target;
  if (!o.f.empty()) target = builtin_function(o.f);
  auto r = verify_family(loaded.family, target ? &*target : nullptr);
  // stored grids must match the series they were sampled from
  double grid_diff = 0;
  for (std::size_t k = 0; k < loaded.grids.size(); ++k)
    grid_diff = std::max(grid_diff, (loaded.grids[k] - loaded.family.grid_function(k)).sup_norm());
  bool grids_ok = grid_diff <= 1e-12 * std::max(1.0, loaded.family.K());
  bool pass = r.ok && grids_ok;
  json rep{{"manifest", man.to_json()},
           {"target", loaded.family.target},
           {"report", family_report_json(r)},
           {"stored_grid_difference", grid_diff},
           {"verdict", {{"pass", pass}, {"failure", grids_ok ? r.failure : "stored grids differ from the series"}}}};
  emit_report(sink, o.out, rep);
  return pass ? kExitPass : kExitBound;
}

// ---------------------------------------------------------------------------
// joris-run

struct JorisOptions {
  int p = 2, q = 3;
  std::string f = "identity";
  std::string models_file;
  std::string sequence = "gevrey:1,0";
  double eps0 = kDefaultPipelineEps0;
  std::size_t depth = 4;
  std::optional<double> s;
  std::string out, family_dir;
};

inline int cmd_joris(const JorisOptions& o, RunManifest man, Sink& sink) {
  auto M = parse_sequence(o.sequence);
  man.add_sequence(M);
  auto cfg = PipelineConfig::make(o.p, o.q, M, o.eps0, o.depth, o.s);
  man.config = cfg.to_json();
  man.config["f"] = o.models_file.empty() ? o.f : "file:" + o.models_file;
  SmoothFunctionModel fp, fq, oracle;
  if (!o.models_file.empty()) {
    auto fm = load_models(o.models_file);
    fp = fm.fp;
    fq = fm.fq;
    oracle = fm.oracle;
  } else {
    oracle = builtin_function(o.f);
    fp = models::power(oracle, static_cast<unsigned>(o.p));
    fq = models::power(oracle, static_cast<unsigned>(o.q));
  }
  auto rep = run_pipeline(fp, fq, oracle, cfg);
  if (!sink.capture && !o.family_dir.empty()) save_family(rep.assembly.family, o.family_dir);
  json j = rep.to_json();
  j["manifest"] = man.to_json();
  emit_report(sink, o.out, j);
  if (!rep.ok && !sink.capture) *sink.err << "joris-run: failed check: " << rep.failure << "\n";
  return rep.ok ? kExitPass : kExitBound;
}

// ---------------------------------------------------------------------------
// gallery

struct GalleryOptions {
  std::string demo;
  std::string sequence = "gevrey:1,0";
  double lambda = 1;
  int p = 2, m = 2;
  int l_lo = 1, l_hi = 6;
  std::string out;
};

inline int cmd_gallery(const GalleryOptions& o, RunManifest man, Sink& sink) {
  man.config = {{"demo", o.demo}, {"sequence", o.sequence}, {"lambda", o.lambda}, {"p", o.p},
                {"m", o.m}, {"l", {o.l_lo, o.l_hi}}};
  json rep{{"manifest", json()}};
  bool pass = false;
  if (o.demo == "sharp-class") {
    auto r = sharp_class_demo(o.lambda, o.p);
    man.add_sequence(make_qgevrey(o.lambda));
    rep["sharp_class"] = r.to_json();
    pass = r.reproduces;
  } else if (o.demo == "blowup") {
    auto M = parse_sequence(o.sequence);
    man.add_sequence(M);
    auto c = verify_blowup(M, o.p, o.m, o.l_lo, o.l_hi);
    rep["certificate"] = c.to_json();
    pass = c.ok;
  } else if (o.demo == "eta") {
    auto M = parse_sequence(o.sequence);
    man.add_sequence(M);
    auto e = flat_majorant_eta(M);
    rep["eta"] = e.to_json();
    pass = e.ok;
  } else {
    throw DomainError("unknown demo '" + o.demo + "'");
  }
  rep["manifest"] = man.to_json();
  rep["verdict"] = {{"pass", pass}};
  emit_report(sink, o.out, rep);
  return pass ? kExitPass : kExitBound;
}

// ---------------------------------------------------------------------------
// selftest

/// FNV-1a over the compact dump of the golden cases.
inline std::string goldens_checksum(const json& cases) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : cases.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline json load_goldens(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!j.contains("cases") || !j.contains("checksum") || !j["checksum"].is_string())
    throw DataError(path + ": golden file needs 'cases' and 'checksum'");
  if (j["checksum"].get<std::string>() != goldens_checksum(j["cases"]))
    throw DataError(path + ": checksum mismatch, golden file is corrupted");
  return j["cases"];
}

struct SelftestOptions {
  std::string goldens = std::string(JORIS_DATA_DIR) + "/goldens.json";
  std::string filter;
  bool seal = false;
  std::string out;
};

struct CheckResult {
  std::string group, name;
  bool pass = false;
  std::string detail;
};

inline json to_json(const CheckResult& c) {
  return {{"group", c.group}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}};
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::vector<CheckResult> selftest_checks(const json& cases, const std::string& filter, std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto want = [&](const char* g) { return filter.empty() || filter == g; };
  auto get = [&](const char* key) -> const json& {
    if (!cases.contains(key)) throw DataError(std::string("goldens: missing group '") + key + "'");
    return cases.at(key);
  };
  std::mt19937_64 rng(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  try {
    if (want("dbar")) {
      const auto& d = get("dbar");
      for (const auto& rec : d.at("disk")) {
        double h = rec.at("h").get<double>();
        auto g = make_centered_grid(1.6, 1.6, h);
        auto v = cauchy_convolve(disk_indicator(g));
        double worst = 0;
        for (const auto& pr : rec.at("probes")) {
          Complex z(pr.at("z")[0].get<double>(), pr.at("z")[1].get<double>());
          Complex want_v(pr.at("v")[0].get<double>(), pr.at("v")[1].get<double>());
          auto i = static_cast<std::int64_t>(std::llround((z.real() - g.origin.real()) / h));
          auto j = static_cast<std::int64_t>(std::llround((z.imag() - g.origin.imag()) / h));
          Complex zc = g.point(i, j);
          double tol = 2 * h + std::abs(zc - z);
          worst = std::max(worst, std::abs(v.at(i, j) - want_v) / tol);
        }
        out.push_back({"dbar", "disk transform h=" + fmt(h), worst <= 1, "worst error/tolerance " + fmt(worst)});
      }
    }
    if (want("weights")) {
      for (const auto& rec : get("weights").at("log_m")) {
        auto M = parse_sequence(rec.at("sequence").get<std::string>());
        auto j = rec.at("j").get<std::size_t>();
        Real ref(rec.at("value").get<std::string>());
        double rel = (abs(M.log_value(j) - ref) / max(Real(1), abs(ref))).convert_to<double>();
        out.push_back({"weights", "ln M_" + std::to_string(j) + " " + M.name(), rel <= 1e-25, "relative " + fmt(rel)});
      }
      for (const auto& spec : get("weights").at("breakpoint_sequences")) {
        auto M = parse_sequence(spec.get<std::string>());
        double e = breakpoint_identity_error(M, 30);
        out.push_back({"weights", "breakpoint identity " + M.name(), e <= kBreakpointTolerance, "relative " + fmt(e)});
      }
      for (const auto& rec : get("weights").at("moderate_growth")) {
        auto M = parse_sequence(rec.at("sequence").get<std::string>());
        bool expect = rec.at("holds").get<bool>();
        auto r = check_growth(M, GrowthCondition::moderate_growth, 40);
        out.push_back({"weights", "moderate growth " + M.name(), r.holds == expect,
                       "A = " + fmt(r.witness_constant)});
      }
      // h_M is nondecreasing and below t^j M_j at random t
      auto G = make_gevrey(1.0);
      bool mono = true;
      for (int k = 0; k < 200; ++k) {
        double t = std::exp(uniform(std::log(1e-6), std::log(10.0)));
        double t2 = t * uniform(1.0, 2.0);
        mono &= h_M(G, t) <= h_M(G, t2) * (1 + 1e-14);
      }
      out.push_back({"weights", "h_M monotone at random points", mono, ""});
    }
    if (want("joris")) {
      std::size_t bad = 0;
      for (const auto& rec : get("joris").at("frobenius")) {
        int p = rec[0], q = rec[1], m = rec[2];
        if (frobenius_threshold(p, q) != m) ++bad;
      }
      out.push_back({"joris", "frobenius thresholds", bad == 0, std::to_string(bad) + " mismatches"});
      bool decomp = true;
      for (int k = 0; k < 200; ++k) {
        int q = static_cast<int>(uniform(2, 13)), p = static_cast<int>(uniform(1, q));
        if (std::gcd(p, q) != 1) continue;
        int j = frobenius_threshold(p, q) + static_cast<int>(uniform(0, 100));
        auto [a, b] = power_decompose(j, p, q);
        decomp &= a >= 0 && b >= 0 && p * a + q * b == j;
      }
      out.push_back({"joris", "power decomposition at random exponents", decomp, ""});
    }
    if (want("geometry")) {
      for (double eps : get("geometry").at("eps")) {
        auto chk = check_cover(build_cover(eps), 40, 40);
        double gap = boundary_gap(eps);
        out.push_back({"geometry", "cover eps=" + fmt(eps), chk.covering && chk.safety && gap >= eps * eps / 4,
                       "gap " + fmt(gap)});
      }
    }
    if (want("extension")) {
      for (const auto& name : get("extension").at("functions")) {
        auto f = builtin_function(name.get<std::string>());
        FamilyOptions fo;
        fo.throw_on_failure = false;
        auto fb = build_family(f, make_gevrey(1.0), 1.0, 3, fo);
        out.push_back({"extension", "family " + f.name(), fb.report.ok, fb.report.failure});
      }
    }
    if (want("gallery")) {
      for (const auto& rec : get("gallery").at("expansion_coeff")) {
        int j = rec[0], p = rec[1];
        Rational want_v(rec[2].get<std::string>());
        out.push_back({"gallery", "expansion coefficient a_" + std::to_string(j) + " p=" + std::to_string(p),
                       expansion_coeff_a(j, p) == want_v, ""});
      }
      auto g1 = g_lambda(1.0, 2), g2 = g_lambda(2.0, 2);
      double worst = 0;
      for (int k = 0; k < 100; ++k) {
        double x = uniform(0.01, 0.9);
        double a = static_cast<double>(g1.value(x)), b = static_cast<double>(g2.value(x));
        if (a > 0) worst = std::max(worst, std::abs(b * b - a) / a);
      }
      out.push_back({"gallery", "g_2^2 = g_1 at random points", worst <= 1e-12, "relative " + fmt(worst)});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("goldens: ") + e.what());
  }
  if (out.empty()) throw DomainError("selftest: filter '" + filter + "' selects no checks");
  return out;
}

inline int cmd_selftest(const SelftestOptions& o, RunManifest man, Sink& sink) {
  if (o.seal) {
    json j;
    try {
      j = json::parse(read_file(o.goldens));
    } catch (const json::exception& e) {
      throw DataError(o.goldens + ": " + e.what());
    }
    j["checksum"] = goldens_checksum(j.at("cases"));
    if (!sink.capture) write_file_atomic(o.goldens, j.dump(2) + "\n");
    return kExitPass;
  }
  man.config = {{"goldens", std::filesystem::path(o.goldens).filename().string()}, {"filter", o.filter}};
  auto cases = load_goldens(o.goldens);
  auto checks = selftest_checks(cases, o.filter, man.seed);
  json rows = json::array();
  const CheckResult* first_bad = nullptr;
  for (const auto& c : checks) {
    rows.push_back(to_json(c));
    if (!c.pass && !first_bad) first_bad = &c;
  }
  json rep{{"manifest", man.to_json()}, {"checks", rows},
           {"verdict", {{"pass", !first_bad}, {"failure", first_bad ? first_bad->name : ""}}}};
  emit_report(sink, o.out, rep);
  if (first_bad && !sink.capture) *sink.err << "selftest: failed " << first_bad->group << ": " << first_bad->name << "\n";
  return first_bad ? kExitBound : kExitPass;
}

// ---------------------------------------------------------------------------
// Dispatch

inline int run(const std::vector<std::string>& args, Sink& sink);

struct RerunOptions {
  std::string report;
  std::string out;
};

/// Re-executes the manifest embedded in a report and compares the bytes.
inline int cmd_rerun(const RerunOptions& o, Sink& sink) {
  std::string original = read_file(o.report);
  json j;
  try {
    j = json::parse(original);
  } catch (const json::exception& e) {
    throw DataError(o.report + ": " + e.what());
  }
  if (!j.contains("manifest")) throw DataError(o.report + ": no manifest");
  auto man = RunManifest::from_json(j["manifest"]);
  ScopedPrecision prec(man.precision_bits);
  Sink inner;
  inner.capture = true;
  run(man.argv, inner);
  bool same = inner.report == original;
  if (!sink.capture) {
    if (!o.out.empty()) write_file_atomic(o.out, inner.report);
    *sink.out << (same ? "reproduced " : "differs ") << o.report << "\n";
  }
  return same ? kExitPass : kExitBound;
}

inline int run(const std::vector<std::string>& args, Sink& sink) {
  CLI::App app{"Denjoy-Carleman approximation and power-root reconstruction experiments", "joris"};
  app.set_version_flag("--version", JORIS_VERSION);
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for randomized sample points")->capture_default_str();

  WeightsOptions wo;
  auto* w = app.add_subcommand("weights", "Growth checks and the associated function of a weight sequence");
  w->add_option("--sequence", wo.sequence, "gevrey:alpha[,beta] | qgevrey:lambda | table:v0,v1,...")->required();
  w->add_option("--check", wo.checks, "all | moderate-growth | snqa | stab-der")->delimiter(',');
  w->add_option("--jmax", wo.j_scan, "Scan window for growth checks")->capture_default_str();
  w->add_flag("--hm", wo.hm, "Emit the table (t, h_M(t)) as CSV");
  w->add_option("--tmin", wo.tmin)->capture_default_str();
  w->add_option("--tmax", wo.tmax)->capture_default_str();
  w->add_option("--points", wo.points)->capture_default_str();
  w->add_option("--csv", wo.csv, "CSV path (default: stdout)");
  w->add_option("--out", wo.out, "Report path (default: stdout)");

  CoverOptions co;
  auto* c = app.add_subcommand("cover", "Disk cover of the half-size ellipse");
  c->add_option("--eps", co.eps)->required();
  c->add_option("--out", co.out);

  DbarOptions dopt;
  auto* d = app.add_subcommand("dbar-selftest", "Cauchy transform of the unit disk against its closed form");
  d->add_option("--spacing", dopt.h, "Grid spacings")->delimiter(',');
  d->add_option("--out", dopt.out);

  PmBuildOptions pb;
  auto* b = app.add_subcommand("pm-build", "Build and save an approximant family");
  b->add_option("--f", pb.f)->capture_default_str();
  b->add_option("--sequence", pb.sequence)->capture_default_str();
  b->add_option("--eps0", pb.eps0)->capture_default_str();
  b->add_option("--depth", pb.depth)->capture_default_str();
  b->add_option("--dir", pb.dir, "Family directory")->required();
  b->add_option("--out", pb.out);

  PmVerifyOptions pv;
  auto* v = app.add_subcommand("pm-verify", "Re-verify a saved approximant family");
  v->add_option("--dir", pv.dir)->required();
  v->add_option("--f", pv.f, "Target function for the interval check");
  v->add_option("--out", pv.out);

  JorisOptions jo;
  auto* r = app.add_subcommand("joris-run", "Reconstruct f from approximants of f^p and f^q");
  r->add_option("--p", jo.p)->capture_default_str();
  r->add_option("--q", jo.q)->capture_default_str();
  r->add_option("--f", jo.f, "Builtin name or poly:c0,c1,...")->capture_default_str();
  r->add_option("--models", jo.models_file, "JSON file with fp, fq, oracle coefficient lists");
  r->add_option("--sequence", jo.sequence)->capture_default_str();
  r->add_option("--eps0", jo.eps0)->capture_default_str();
  r->add_option("--depth", jo.depth)->capture_default_str();
  r->add_option("--s", jo.s, "Exponent s > m(m+1)");
  r->add_option("--family-out", jo.family_dir, "Save the assembled family here");
  r->add_option("--out", jo.out);

  GalleryOptions go;
  auto* g = app.add_subcommand("gallery", "Counterexample certificates");
  g->add_option("--demo", go.demo)->required()->check(CLI::IsMember({"sharp-class", "blowup", "eta"}));
  g->add_option("--sequence", go.sequence)->capture_default_str();
  g->add_option("--lambda", go.lambda)->capture_default_str();
  g->add_option("--p", go.p)->capture_default_str();
  g->add_option("--m", go.m)->capture_default_str();
  g->add_option("--lmin", go.l_lo)->capture_default_str();
  g->add_option("--lmax", go.l_hi)->capture_default_str();
  g->add_option("--out", go.out);

  SelftestOptions so;
  auto* s = app.add_subcommand("selftest", "Golden-value battery");
  s->add_option("--goldens", so.goldens)->capture_default_str();
  s->add_option("--filter", so.filter, "dbar | weights | joris | geometry | extension | gallery");
  s->add_flag("--seal", so.seal, "Rewrite the checksum of the golden file");
  s->add_option("--out", so.out);

  RerunOptions ro;
  auto* rr = app.add_subcommand("rerun", "Re-execute the manifest of a report and compare");
  rr->add_option("--report", ro.report)->required();
  rr->add_option("--out", ro.out, "Write the regenerated report here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    if (!sink.capture) *sink.out << app.help();
    return kExitPass;
  } catch (const CLI::CallForVersion&) {
    if (!sink.capture) *sink.out << JORIS_VERSION << "\n";
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    if (!sink.capture) *sink.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  RunManifest man;
  man.argv = args;
  man.precision_bits = precision_bits();
  man.seed = seed;
  try {
    if (w->parsed()) {
      if (wo.checks.empty() && !wo.hm) wo.checks = {"all"};
      man.command = "weights";
      return cmd_weights(wo, man, sink);
    }
    const std::pair<CLI::App*, std::function<int()>> commands[] = {
        {c, [&] { return cmd_cover(co, man, sink); }},
        {d, [&] { return cmd_dbar_selftest(dopt, man, sink); }},
        {b, [&] { return cmd_pm_build(pb, man, sink); }},
        {v, [&] { return cmd_pm_verify(pv, man, sink); }},
        {r, [&] { return cmd_joris(jo, man, sink); }},
        {g, [&] { return cmd_gallery(go, man, sink); }},
        {s, [&] { return cmd_selftest(so, man, sink); }},
    };
    for (const auto& [sub, body] : commands)
      if (sub->parsed()) {
        man.command = sub->get_name();
        return body();
      }
    if (rr->parsed()) return cmd_rerun(ro, sink);
  } catch (const DomainError& e) {
    if (!sink.capture) *sink.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    if (!sink.capture) *sink.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BoundViolation& e) {
    if (!sink.capture) *sink.err << "bound failed: " << e.what() << "\n";
    return kExitBound;
  } catch (const std::exception& e) {
    if (!sink.capture) *sink.err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Sink sink;
  return run(args, sink);
}

}  // namespace joris::cli
