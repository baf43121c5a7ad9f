// Acceptance battery: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "joris/cli.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>

using namespace joris;

namespace {

// Tolerances and budgets.
constexpr double kBreakpointTol = 1e-12;
constexpr std::size_t kBreakpointJ = 30;
constexpr double kCoverConstantSpread = 2.0;
constexpr double kDiskAreaTol = 0.05;
constexpr double kMinSlope = 1.0;
constexpr double kClosedFormFraction = 0.99;
constexpr double kBudgetWeights = 10, kBudgetDbar = 60, kBudgetGeometry = 30, kBudgetLevelSet = 60;
constexpr double kBudgetFamily = 300, kBudgetJoris = 600, kBudgetFrobenius = 1, kBudgetGallery = 120;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

bool run_criterion(int id, const char* name, double budget, const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget) o.require(false, "runtime " + fmt(secs) + " s over budget " + fmt(budget) + " s");
  std::printf("[%s] %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
  std::fflush(stdout);
  return o.pass;
}

Outcome weights_suite() {
  Outcome o;
  double worst = 0;
  for (const char* spec : {"gevrey:1,0", "gevrey:2,0", "gevrey:1,1", "qgevrey:1"})
    worst = std::max(worst, cli::breakpoint_identity_error(parse_sequence(spec), kBreakpointJ));
  o.require(worst <= kBreakpointTol, "breakpoint identity error " + fmt(worst));
  o.note("breakpoint max rel err " + fmt(worst));
  for (auto [spec, alpha] : {std::pair{"gevrey:1,0", 1.0}, {"gevrey:2,0", 2.0}, {"gevrey:1,1", 1.0}}) {
    auto r = check_growth(parse_sequence(spec), GrowthCondition::moderate_growth, 40);
    double cap = std::pow(2.0, alpha) * 2;
    o.require(r.holds && r.witness_constant <= cap, std::string(spec) + " A = " + fmt(r.witness_constant));
    o.note(std::string(spec) + " A=" + fmt(r.witness_constant) + "<=" + fmt(cap));
  }
  auto q = check_growth(make_qgevrey(1.0), GrowthCondition::moderate_growth, 40);
  o.require(!q.holds, "qgevrey:1 reported moderate growth");
  o.note("qgevrey:1 moderate growth " + std::string(q.holds ? "holds" : "fails"));
  return o;
}

Outcome dbar_golden() {
  Outcome o;
  auto L = cli::disk_ladder({1.0 / 32, 1.0 / 64, 1.0 / 128});
  o.require(L.error_slope >= kMinSlope, "error slope " + fmt(L.error_slope));
  o.require(L.residual_ok, "dbar residual above 5h");
  o.note("slope " + fmt(L.error_slope));
  for (const auto& r : L.rows)
    o.note("h=" + fmt(r.h) + " err=" + fmt(r.sup_error) + " res=" + fmt(r.dbar_residual));
  return o;
}

Outcome geometry_suite() {
  Outcome o;
  std::vector<double> constants;
  for (int k = 0; k <= 6; ++k) {
    double eps = std::ldexp(1.0, -k);
    auto cover = build_cover(eps);
    auto chk = check_cover(cover, 100, 100);
    o.require(chk.samples >= 10000, "fewer than 1e4 samples");
    o.require(chk.covering && chk.safety, "cover check at eps=" + fmt(eps));
    double gap = boundary_gap(eps);
    o.require(gap >= eps * eps / 4, "boundary gap " + fmt(gap) + " at eps=" + fmt(eps));
    constants.push_back(static_cast<double>(cover.size()) * eps * eps * eps);
  }
  auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
  o.require(*hi / *lo < kCoverConstantSpread, "covering constant spread " + fmt(*hi / *lo));
  o.note("|centers| eps^3 in [" + fmt(*lo) + ", " + fmt(*hi) + "]");
  return o;
}

Outcome level_set_battery() {
  Outcome o;
  double C = 0, explicit_const = 0, worst_area = 0;
  std::size_t cells = 0;
  for (double eps : {1.0, 0.5, 0.25}) {
    auto grid = grid_for(eps);
    for (int k = 1; k <= 6; ++k) {
      auto g = GridFunction::sample(grid, [k](Complex z) { return std::pow(z, k); });
      double K = std::pow(std::cosh(eps), k);
      for (double r : {1e-1, 1e-2, 1e-3}) {
        auto e = level_set_energy(g, eps, r, K);
        ++cells;
        C = std::max(C, e.fitted_constant);
        explicit_const = std::max(explicit_const, e.explicit_bound / e.scaling_bound);
        o.require(e.energy <= e.explicit_bound, "explicit bound at k=" + std::to_string(k) + " eps=" + fmt(eps));
        if (k == 1) {
          double exact = std::numbers::pi * r * r;
          double rel = std::abs(e.energy - exact) / exact;
          worst_area = std::max(worst_area, rel);
          o.require(rel <= kDiskAreaTol, "area of |z|<" + fmt(r) + " at eps=" + fmt(eps) + " off by " + fmt(rel));
        }
      }
    }
  }
  o.require(C > 0 && C <= explicit_const, "fitted C " + fmt(C) + " above explicit constant " + fmt(explicit_const));
  o.note(std::to_string(cells) + " cells, one C=" + fmt(C) + " (explicit " + fmt(explicit_const) + ")");
  o.note("z area rel err " + fmt(worst_area));
  return o;
}

Outcome family_round_trip() {
  Outcome o;
  const std::pair<const char*, SmoothFunctionModel> fs[] = {
      {"0", models::zero()}, {"x", models::identity()}, {"x^2", models::square()}, {"exp(-1/x)", models::exp_inv()}};
  for (const auto& [label, f] : fs) {
    FamilyOptions fo;
    fo.throw_on_failure = false;
    auto fb = build_family(f, make_gevrey(1.0), 1.0, 5, fo);
    o.require(fb.report.ok, std::string(label) + ": " + fb.report.failure);
    auto rec = reconstruct_from_family(fb.family, 0.5);
    double err = 0;
    for (double x : chebyshev_points(-0.5, 0.5, 501))
      err = std::max(err, static_cast<double>(std::abs(rec.model.value(x) - f.value(x))));
    o.require(err <= rec.value_bound, std::string(label) + ": reconstruction error " + fmt(err) + " > " + fmt(rec.value_bound));
    double worst_inc = 0;
    for (const auto& ic : rec.increments) {
      worst_inc = std::max(worst_inc, ic.worst_ratio);
      o.require(ic.verified, std::string(label) + ": increment bound at rung " + std::to_string(ic.rung));
    }
    o.note(std::string(label) + " err=" + fmt(err) + "<=" + fmt(rec.value_bound) + " inc=" + fmt(worst_inc));
  }
  return o;
}

Outcome joris_end_to_end() {
  Outcome o;
  const std::pair<const char*, SmoothFunctionModel> fs[] = {
      {"1", models::constant(1.0)}, {"x", models::identity()}, {"exp(-1/x)", models::exp_inv()}};
  for (const auto& [label, f] : fs) {
    std::string tag(label);
    auto cfg = PipelineConfig::make(2, 3, make_gevrey(1.0), kDefaultPipelineEps0, 4);
    auto rep = run_pipeline(models::power(f, 2), models::power(f, 3), f, cfg);
    o.require(rep.ok, tag + ": " + rep.failure);
    const int m = cfg.m;
    const double K = rep.power.K();
    std::size_t regime = 0;
    double worst_cells = 1;
    for (std::size_t k = 0; k < rep.power.rungs.size(); ++k) {
      const auto& pr = rep.power.rungs[k];
      const auto& cr = rep.assembly.rungs[k];
      const auto& qe = rep.quotient_error[k];
      o.require(pr.three_lines.verified && pr.gap_half <= pr.delta * (1 + 1e-12), tag + ": power gap at rung " + std::to_string(k));
      if (!pr.small_enough) continue;
      ++regime;
      o.require(cr.quotient.measured <= std::pow(2 * K, 1.0 / m), tag + ": quotient bound");
      o.require(qe.small_bound == std::pow(2.0, 1.0 + 1.0 / m) * std::pow(pr.r, 1.0 / m) &&
                    qe.large_bound == (std::pow(K + 1, 1.0 / m) + 1) * pr.delta / pr.r,
                tag + ": region constants");
      o.require(qe.ok && qe.small_count + qe.large_count > 0, tag + ": quotient error regions");
      o.require(cr.closed_form.fraction >= kClosedFormFraction, tag + ": closed-form agreement " + fmt(cr.closed_form.fraction));
      worst_cells = std::min(worst_cells, cr.closed_form.fraction);
      o.require(cr.w_sup <= cr.w_sup_bound && cr.w_l2 <= cr.w_l2_bound && cr.v_sup <= cr.v_bound, tag + ": correction bound");
    }
    o.require(regime >= 2, tag + ": fewer than two rungs in the small-gap regime");
    auto again = verify_family(rep.assembly.family, &f);
    o.require(again.ok, tag + ": family verification: " + again.failure);
    bool at_floor = true;
    for (const auto& rc : rep.final_report.rungs) at_floor &= rc.interval_error <= rep.final_report.noise_floor;
    if (at_floor) {
      o.note(tag + " exact to the noise floor " + fmt(rep.final_report.noise_floor));
    } else {
      o.require(rep.error_slope >= kMinSlope, tag + ": error slope " + fmt(rep.error_slope));
      o.note(tag + " slope=" + fmt(rep.error_slope));
    }
    o.note(tag + " regime rungs=" + std::to_string(regime) + " cells>=" + fmt(worst_cells));
  }
  return o;
}

Outcome frobenius_oracle() {
  Outcome o;
  std::size_t pairs = 0;
  for (int q = 2; q <= 12; ++q)
    for (int p = 1; p < q; ++p) {
      if (std::gcd(p, q) != 1) continue;
      std::vector<bool> rep(201, false);
      for (int a = 0; p * a <= 200; ++a)
        for (int b = 0; p * a + q * b <= 200; ++b) rep[p * a + q * b] = true;
      int brute = 200;
      while (brute > 0 && rep[brute - 1]) --brute;
      ++pairs;
      o.require(frobenius_threshold(p, q) == brute, "mismatch at (" + std::to_string(p) + ", " + std::to_string(q) + ")");
    }
  o.note(std::to_string(pairs) + " coprime pairs");
  return o;
}

Outcome gallery_certificates() {
  Outcome o;
  auto sc = sharp_class_demo(1.0, 2);
  o.require(sc.power_verdict.kind == RegularityVerdict::Kind::member, "g_1 not a member");
  o.require(sc.root_verdict.kind == RegularityVerdict::Kind::non_member, "g_2 not a non-member");
  o.require(sc.J >= 25 && sc.precision_bits >= 512, "evidence below j=25 or 512 bits");
  o.note("g_1 " + std::string(to_string(sc.power_verdict.kind)) + ", g_2 " + to_string(sc.root_verdict.kind) + " (J=" +
         std::to_string(sc.J) + ", " + std::to_string(sc.precision_bits) + " bits)");
  auto cert = verify_blowup(make_gevrey(1.0), 2, 2, 1, 6);
  o.require(cert.ok, "blow-up certificate: " + cert.failure);
  o.require(cert.witnesses.size() == 6, "witness count");
  o.note("blow-up C=" + fmt(cert.C) + " over l=1..6");
  return o;
}

}  // namespace

int main() {
  bool all = true;
  all &= run_criterion(1, "weight-sequence suite", kBudgetWeights, weights_suite);
  all &= run_criterion(2, "dbar golden test", kBudgetDbar, dbar_golden);
  all &= run_criterion(3, "geometry suite", kBudgetGeometry, geometry_suite);
  all &= run_criterion(4, "level-set energy battery", kBudgetLevelSet, level_set_battery);
  all &= run_criterion(5, "approximant family round trip", kBudgetFamily, family_round_trip);
  all &= run_criterion(6, "power-root reconstruction end to end", kBudgetJoris, joris_end_to_end);
  all &= run_criterion(7, "Frobenius oracle", kBudgetFrobenius, frobenius_oracle);
  all &= run_criterion(8, "gallery certificates", kBudgetGallery, gallery_certificates);
  return all ? 0 : 1;
}
