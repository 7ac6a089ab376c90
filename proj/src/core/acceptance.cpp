#include "core/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "core/adams.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/grid.hpp"
#include "core/kolmogorov.hpp"
#include "core/math_util.hpp"
#include "core/morrey.hpp"
#include "core/pde_energy.hpp"
#include "core/presets.hpp"
#include "core/quadrature.hpp"
#include "core/riesz.hpp"
#include "core/runner.hpp"
#include "core/sde_flow.hpp"

namespace pf {
namespace {

std::string fmt(double v) { return format_double(v); }

double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = xs.size();
  for (std::size_t i = 0; i < n; ++i) {
    double lx = std::log(xs[i]), ly = std::log(std::max(ys[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

// 1. Heat-representation and semigroup identities of the parabolic potential.
Verdict criterion_riesz() {
  GridField u = make_gaussian_field(2, 64, 64, 8.0, 1.0, 1.0);
  HeatRepReport hr = heat_representation_residual(u, {});
  GridField f = make_bump_field(2, 64, 64, 8.0);
  SemigroupReport sg = semigroup_residual(1.0, 1.0, 4.0, f, {});
  Verdict v;
  v.pass = hr.residual <= 0.05 && hr.magnitude_gap <= 0.05 && sg.residual <= 0.05;
  v.detail = "heat residual " + fmt(hr.residual) + ", |c| gap " + fmt(hr.magnitude_gap) +
             ", semigroup residual " + fmt(sg.residual) + " (tol 0.05 each, 64x64x64)";
  return v;
}

// 2. Weighted-potential ratio family: finiteness, grid stability, exact rescaling.
Verdict criterion_adams() {
  SpaceTimeGrid base = SpaceTimeGrid::centered(2, 20, 20, 0.0, 0.2, 4.0);
  SpaceTimeGrid fine = SpaceTimeGrid::centered(2, 40, 40, 0.0, 0.1, 4.0);
  FamilyParams fp;
  fp.spec = KernelSpec{1.0, 8.0};
  fp.p = 2.5;
  fp.q = 2.0;
  fp.family_size = 50;
  fp.seed = 2026;

  std::vector<FamilyCaseRow> rows_pb, rows_db;
  RatioReport pb = adams_family_report(base, fp, &rows_pb);
  RatioReport pf = adams_family_report(fine, fp, nullptr);
  fp.dual = true;
  RatioReport db = adams_family_report(base, fp, &rows_db);
  RatioReport df = adams_family_report(fine, fp, nullptr);

  bool finite = std::isfinite(pb.ratio) && std::isfinite(pf.ratio) && std::isfinite(db.ratio) &&
                std::isfinite(df.ratio) && pb.ratio > 0.0 && db.ratio > 0.0;
  double chg_p = rel_gap(pf.ratio, pb.ratio);
  double chg_d = rel_gap(df.ratio, db.ratio);

  // Power-of-two rescaling b -> b/2, f -> 2f must leave every ratio unchanged.
  double worst_scale = 0.0;
  std::vector<GridField> fields = make_test_family(base, 2 * fp.family_size, fp.seed);
  for (int i = 0; i < fp.family_size; ++i) {
    AdamsCase c{fields[static_cast<std::size_t>(2 * i)],
                fields[static_cast<std::size_t>(2 * i + 1)], KernelSpec{1.0, 8.0}, 2.5, 2.0};
    for (double& w : c.b.values) w *= 0.5;
    for (double& w : c.f.values) w *= 2.0;
    worst_scale = std::max(
        worst_scale, rel_gap(adams_ratio(c), rows_pb[static_cast<std::size_t>(i)].ratio));
    worst_scale = std::max(
        worst_scale, rel_gap(dual_adams_ratio(c), rows_db[static_cast<std::size_t>(i)].ratio));
  }

  Verdict v;
  v.pass = finite && chg_p <= 0.20 && chg_d <= 0.20 && worst_scale <= 1e-12;
  v.detail = "max ratio " + fmt(pb.ratio) + " (refined change " + fmt(chg_p) + "), dual " +
             fmt(db.ratio) + " (change " + fmt(chg_d) + ", tol 0.20); rescale gap " +
             fmt(worst_scale) + " (tol 1e-12)";
  return v;
}

// 3. Critical-drift profile: r * cylinder mean is radius-independent and
//    matches the exact radial integral.
Verdict criterion_morrey() {
  const double oracle = std::pow(6.0, 0.4);
  GridField f = make_radial_power_field(3, 4, 96, 24.0, 1.0, 2.5, 1.0, 0.5);
  std::vector<double> radii = geometric_ladder(1.0, 10.0, 8);

  double worst = 0.0, vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
  for (double r : radii) {
    ScanSpec s;
    s.explicit_cylinders.emplace_back(f.grid.t0, std::vector<double>(3, 0.0), r);
    MorreyParams mp;
    mp.p = 2.5;
    mp.beta = 1.0;
    double val = morrey_homogeneous(f, mp, s).value;
    worst = std::max(worst, std::abs(val / oracle - 1.0));
    vmin = std::min(vmin, val);
    vmax = std::max(vmax, val);
  }
  double spread = vmax / vmin - 1.0;

  Verdict v;
  v.pass = worst <= 0.05 && spread <= 0.05;
  v.detail = "max oracle gap " + fmt(worst) + ", spread " + fmt(spread) +
             " over radii [1,10] vs 6^{2/5} (tol 0.05)";
  return v;
}

// 4. Weighted energy estimate: heat-case ratio, drift minimal-N stability,
//    and the discrete integration-by-parts defect.
Verdict criterion_pde_energy() {
  GridField f = make_bump_field(2, 1, 48, 8.0);
  double T = 0.25;
  double dx = f.grid.dx;
  DivFormCoefficients heat = make_constant_coefficients(f.grid, 1.0);
  int steps = std::max(8, static_cast<int>(std::ceil(T * heat.delta / (dx * dx))));

  SolveReport hs = solve_backward(heat, f, T, steps);
  double worst_heat = 0.0;
  for (int n : {1, 4}) {
    EnergyReport er = energy_report(hs.u, f, n, 1.0, 1.0, T, 1.0);
    worst_heat = std::max(worst_heat, er.ratio_terminalless);
  }

  double eps0 = 4.0 * dx;
  DivFormCoefficients drift = make_drift_coefficients(f.grid, 0.02, eps0);
  MorreyParams bp;
  bp.p = 2.5;
  bp.rho = 1.0;
  ScanSpec bscan;
  bscan.center_stride = 2;
  double bhat = morrey_capped(drift.b, bp, bscan).value;

  auto drift_nmin = [&](int st, double eps) {
    DivFormCoefficients dc = make_drift_coefficients(f.grid, 0.02, eps);
    SolveReport sr = solve_backward(dc, f, T, st);
    return energy_report(sr.u, f, 4, 1.0, 1.0, T, 1.0).n_min;
  };
  double n0 = drift_nmin(steps, eps0);
  double n1 = drift_nmin(2 * steps, 0.5 * eps0);
  double nchg = std::abs(n1 - n0) / std::max(std::abs(n0), 1e-12);

  GridField ui = make_gaussian_field(2, 1, 32, 8.0, 1.5);
  GridField vi = make_bump_field(2, 1, 32, 8.0);
  DivFormCoefficients ci = make_drift_coefficients(ui.grid, 0.5, 0.5);
  double defect = ibp_pairing_defect(ci, ui, vi);

  Verdict v;
  v.pass = worst_heat <= 1.02 && bhat <= 0.05 && nchg <= 0.25 && defect <= 1e-12;
  v.detail = "heat ratio " + fmt(worst_heat) + " (tol 1.02), drift norm " + fmt(bhat) +
             " (<= 0.05), minimal-N change " + fmt(nchg) + " (tol 0.25), pairing defect " +
             fmt(defect) + " (tol 1e-12)";
  return v;
}

// 5. Flow exactness and discretization order.
Verdict criterion_sde_flow() {
  // (a) trivial coefficients leave the derivative direction bitwise constant
  SdeCoefficients id2 = identity_coefficients(2);
  FlowRequest ra;
  ra.x0 = {0.3, -0.2};
  ra.eta0 = {0.7, 0.4};
  ra.T = 0.5;
  ra.h = 0.01;
  ra.M = 256;
  ra.seed = 3;
  FlowEnsemble ea = simulate_flow(id2, ra);
  double eta_dev = 0.0;
  for (std::size_t idx = 0; idx < ea.eta.size(); idx += 2) {
    eta_dev = std::max(eta_dev, std::abs(ea.eta[idx] - 0.7));
    eta_dev = std::max(eta_dev, std::abs(ea.eta[idx + 1] - 0.4));
  }
  bool ok_a = eta_dev == 0.0;

  // (b) linear drift: basis Jacobian vs the matrix exponential
  std::vector<double> A = {0.2, 0.4, -0.4, 0.1};
  SdeCoefficients lin = linear_drift_coefficients(2, A);
  FlowRequest rb;
  rb.x0 = {0.0, 0.0};
  rb.T = 1.0;
  rb.h = 1e-3;
  rb.M = 10000;
  rb.seed = 4;
  rb.jacobian = true;
  FlowEnsemble eb = simulate_flow(lin, rb);
  std::vector<double> expm = matrix_exp(A, 2, 1.0);
  double num = 0.0, den = 0.0;
  std::size_t last = static_cast<std::size_t>(eb.steps) * 4;  // path 0, final step
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double got = eb.jac[last + static_cast<std::size_t>(i * 2 + j)];
      double want = expm[static_cast<std::size_t>(j * 2 + i)];
      num += (got - want) * (got - want);
      den += want * want;
    }
  double jac_err = std::sqrt(num / den);
  bool ok_b = jac_err <= 0.02;

  // (c) strong order on the shared-noise ladder
  FlowRequest rc;
  rc.x0 = {0.5, -0.3};
  rc.T = 1.0;
  rc.h = 0.04;
  rc.M = 2000;
  rc.seed = 5;
  rc.store_paths = false;
  StrongOrderReport so = strong_order_study(lin, rc, 4);
  double slope = fit_loglog_slope(so.h_values, so.errors);
  bool ok_c = slope >= 0.7 && slope <= 1.3;

  // (d) bump deviation shrinks linearly in the bump size
  SdeCoefficients sing = singular_drift_coefficients(2, 0.5, 1.0, 0.5);
  FlowRequest rd;
  rd.x0 = {1.0, 0.0};
  rd.eta0 = {1.0, 0.0};
  rd.T = 0.5;
  rd.h = 0.01;
  rd.M = 2000;
  rd.seed = 6;
  rd.store_paths = false;
  std::vector<double> eps_list = {1e-2, 1e-3, 1e-4}, devs;
  for (double eps : eps_list) devs.push_back(jacobian_vs_bump(sing, rd, eps).max_deviation);
  double bump_slope = fit_loglog_slope(eps_list, devs);
  bool ok_d = bump_slope >= 0.8 && bump_slope <= 1.2;

  Verdict v;
  v.pass = ok_a && ok_b && ok_c && ok_d;
  v.detail = "eta deviation " + fmt(eta_dev) + " (exact), e^{tA} gap " + fmt(jac_err) +
             " (tol 0.02), strong-order slope " + fmt(slope) + " ([0.7,1.3]), bump slope " +
             fmt(bump_slope) + " ([0.8,1.2])";
  return v;
}

// 6. Derivative-flow chain rule at M = 1e5 against the MC half-width.
Verdict criterion_chain_rule() {
  SmoothFn quad = smooth_fn_preset("quadratic", 2);
  FlowRequest req;
  req.x0 = {0.5, 0.3};
  req.eta0 = {1.0, 0.0};
  req.T = 1.0;
  req.h = 0.01;
  req.M = 100000;
  req.seed = 6;
  req.store_paths = false;

  SdeCoefficients lin = linear_drift_coefficients(2, {0.3, -0.2, 0.1, 0.2});
  ChainRuleReport r1 = chain_rule_residual(lin, quad, req, 1e-3);
  SdeCoefficients sing = singular_drift_coefficients(2, 0.4, 1.0, 0.25);
  req.x0 = {1.0, 0.0};
  ChainRuleReport r2 = chain_rule_residual(sing, quad, req, 1e-3);

  bool ok1 = r1.residual <= 3.0 * r1.half_width + 1e-12;
  bool ok2 = r2.residual <= 3.0 * r2.half_width + 1e-12;
  Verdict v;
  v.pass = ok1 && ok2;
  v.detail = "linear residual " + fmt(r1.residual) + " vs 3hw " + fmt(3.0 * r1.half_width) +
             "; singular residual " + fmt(r2.residual) + " vs 3hw " + fmt(3.0 * r2.half_width);
  return v;
}

// 7. Weighted Jacobian moment: exact identity value and h-stability.
Verdict criterion_jac_moment() {
  SpaceTimeGrid g = SpaceTimeGrid::centered(2, 1, 32, 0.0, 1.0, 8.0);
  DerivMomentReport idr =
      derivative_weighted_moment(identity_coefficients(2), 3, 0.0, g, 10000, 1.0, 0.01, 7);
  double oracle = 8.0 * 2.0 * kPi;  // d^kappa * integral of e^{-|x|} over the plane
  double gap = std::abs(idr.value / oracle - 1.0);

  SdeCoefficients sing = singular_drift_coefficients(2, 0.3, 1.0, 0.2);
  double v1 = derivative_weighted_moment(sing, 3, 0.0, g, 4000, 1.0, 0.02, 7).value;
  double v2 = derivative_weighted_moment(sing, 3, 0.0, g, 4000, 1.0, 0.01, 7).value;
  double chg = std::abs(v2 - v1) / std::max(std::abs(v1), 1e-300);

  Verdict v;
  v.pass = gap <= 0.02 && chg <= 0.30;
  v.detail = "identity value " + fmt(idr.value) + " vs " + fmt(oracle) + " (gap " + fmt(gap) +
             ", tol 0.02); singular h-halving change " + fmt(chg) + " (tol 0.30)";
  return v;
}

// 8. Polynomial ball bound: two exact ratios plus family stability.
Verdict criterion_poly_ball() {
  auto run_ball = [](const std::string& cases, int samples) {
    ExperimentConfig cfg;
    cfg.module = "sde";
    cfg.operation = "poly-ball";
    cfg.set("cases", cases);
    cfg.set_int("eta_dim", 2);
    cfg.set_int("sample_count", samples);
    if (cases == "family") {
      cfg.set_int("count", 1000);
      cfg.set_int("seed", 2026);
    }
    return run_experiment(cfg).report["max_ratio"].get<double>();
  };

  double disk = run_ball("disk-moment", 1 << 14);
  double cons = run_ball("constant", 1 << 14);
  double fam1 = run_ball("family", 1 << 14);
  double fam2 = run_ball("family", 1 << 15);

  double disk_gap = std::abs(disk / (4.0 / kPi) - 1.0);
  double cons_gap = std::abs(cons / (1.0 / kPi) - 1.0);
  double fam_chg = std::abs(fam2 - fam1) / std::max(fam1, 1e-300);

  Verdict v;
  v.pass = disk_gap <= 0.01 && cons_gap <= 0.01 && fam_chg <= 0.10;
  v.detail = "disk-moment gap " + fmt(disk_gap) + ", constant gap " + fmt(cons_gap) +
             " (tol 0.01); family doubling change " + fmt(fam_chg) + " (tol 0.10)";
  return v;
}

// 9. Lattice continuity machinery: exact certificates, parabolic radix
//    identity, and the Brownian-flow spatial modulus.
Verdict criterion_kolmogorov() {
  MixedRadixLattice l42({4, 2}, 6);
  LatticeField zero(l42, 0.0);
  IncrementCheck cz = increment_condition_level(zero, 1.0);
  HolderCertificate certz = holder_certificate(zero, 1.0, cz.n_star);
  bool ok_zero = cz.holds && cz.n_star == 0 && certz.n_measured == 0.0;
  bool ok_radix = certz.alpha_i.size() == 2 && certz.alpha_i[0] == 0.5 && certz.alpha_i[1] == 1.0;

  MixedRadixLattice l2({2}, 8);
  LatticeField uz = LatticeField::from_function(l2, [](const double* z) { return z[0]; });
  IncrementCheck ci = increment_condition_level(uz, 1.0);
  HolderCertificate certi = holder_certificate(uz, 1.0, ci.n_star);
  bool ok_id = ci.holds && ci.n_star == 0 && certi.n_measured == 1.0;

  LatticeFlowEnsemble ens = sample_flow_on_lattice(identity_coefficients(2), 3, 200, 11);
  FlowHolderReport fr = flow_holder_check(ens, 0.25, 8.0, 4.0);
  bool ok_exp = std::abs(fr.spatial_exponent - 1.0) <= 1e-9;
  bool ok_mod = std::abs(fr.spatial_modulus - 1.0) <= 1e-9;
  bool ok_fail = fr.failure_rate.size() >= 4;
  for (std::size_t i = 0; i + 1 < fr.failure_rate.size(); ++i)
    ok_fail = ok_fail && fr.failure_rate[i] >= fr.failure_rate[i + 1];
  ok_fail = ok_fail && fr.failure_rate.front() > fr.failure_rate.back();

  Verdict v;
  v.pass = ok_zero && ok_radix && ok_id && ok_exp && ok_mod && ok_fail;
  v.detail = std::string("exact certificates ") + (ok_zero && ok_id ? "ok" : "FAILED") +
             ", radix exponents " + (ok_radix ? "exact" : "FAILED") + ", spatial exponent " +
             fmt(fr.spatial_exponent) + ", modulus " + fmt(fr.spatial_modulus) +
             " (tol 1e-9), failure rates " +
             (ok_fail ? "decreasing over " + std::to_string(fr.failure_rate.size()) + " levels"
                      : "NOT decreasing");
  return v;
}

std::vector<ExperimentConfig> determinism_battery() {
  std::vector<ExperimentConfig> cfgs;
  {
    ExperimentConfig c;
    c.module = "morrey";
    c.set("preset", "bump");
    c.set_int("d", 2);
    c.set_int("nt", 4);
    c.set_int("nx", 16);
    c.set_num("extent", 8.0);
    c.set_num("p", 2.5);
    c.set_num("beta", 1.0);
    c.set_int("radii_per_decade", 4);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "riesz";
    c.operation = "apply";
    c.set("preset", "bump");
    c.set_int("d", 2);
    c.set_int("nt", 16);
    c.set_int("nx", 16);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "adams";
    c.set_int("nt", 12);
    c.set_int("nx", 12);
    c.set_int("family_size", 4);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "pde-energy";
    c.set_int("d", 2);
    c.set_int("nx", 16);
    c.set_int("n", 1);
    c.set_num("T", 0.25);
    c.set_int("steps", 10);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "sde";
    c.operation = "simulate";
    c.set_int("d", 2);
    c.set_int("M", 32);
    c.set_num("h", 0.05);
    c.set_num("T", 0.25);
    c.set_int("seed", 9);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "sde";
    c.operation = "poly-ball";
    c.set("cases", "constant");
    c.set_int("sample_count", 2048);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "kolmogorov";
    c.operation = "certify";
    c.set("radices", "2");
    c.set_int("lattice_depth", 6);
    c.set("field", "coordinate");
    c.set_num("alpha", 1.0);
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.module = "kolmogorov";
    c.operation = "flow-check";
    c.set_int("d", 2);
    c.set_int("lattice_depth", 3);
    c.set_int("M", 16);
    c.set_num("kappa", 4.0);
    c.set_num("gamma", 8.0);
    c.set_num("alpha", 0.25);
    cfgs.push_back(c);
  }
  return cfgs;
}

bool same_bytes(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool outputs_identical(const RunOutput& a, const RunOutput& b) {
  if (a.report.dump() != b.report.dump()) return false;
  if (a.files != b.files) return false;
  if (a.fields.size() != b.fields.size()) return false;
  for (std::size_t i = 0; i < a.fields.size(); ++i) {
    const FieldOutput& fa = a.fields[i];
    const FieldOutput& fb = b.fields[i];
    if (fa.name != fb.name || !(fa.field.grid == fb.field.grid) ||
        fa.field.components != fb.field.components || !same_bytes(fa.field.values, fb.field.values) ||
        fa.chunks != fb.chunks)
      return false;
  }
  return true;
}

// 10. Re-running any configuration reproduces every output byte for byte.
Verdict criterion_determinism() {
  std::vector<ExperimentConfig> cfgs = determinism_battery();
  int identical = 0;
  std::string first_bad;
  for (const ExperimentConfig& cfg : cfgs) {
    RunOutput a = run_experiment(cfg);
    RunOutput b = run_experiment(cfg);
    if (outputs_identical(a, b))
      ++identical;
    else if (first_bad.empty())
      first_bad = cfg.module + "/" + (cfg.operation.empty() ? "default" : cfg.operation);
  }
  Verdict v;
  v.pass = identical == static_cast<int>(cfgs.size());
  v.detail = std::to_string(identical) + "/" + std::to_string(cfgs.size()) +
             " configs byte-identical on re-run" +
             (first_bad.empty() ? "" : ("; first mismatch: " + first_bad));
  return v;
}

struct CriterionSpec {
  const char* name;
  Verdict (*fn)();
  double budget_seconds;  // 0: no runtime gate
};

const CriterionSpec kCriteria[] = {
    {"riesz-identities", criterion_riesz, 120.0},
    {"adams-uniformity", criterion_adams, 0.0},
    {"morrey-criticality", criterion_morrey, 0.0},
    {"pde-energy", criterion_pde_energy, 0.0},
    {"sde-flow-exactness-order", criterion_sde_flow, 0.0},
    {"chain-rule", criterion_chain_rule, 0.0},
    {"weighted-jacobian-moment", criterion_jac_moment, 600.0},
    {"polynomial-ball-bound", criterion_poly_ball, 0.0},
    {"kolmogorov-lattice", criterion_kolmogorov, 0.0},
    {"determinism", criterion_determinism, 0.0},
};

}  // namespace

CriterionResult run_acceptance_criterion(int id) {
  require(id >= 1 && id <= 10, Errc::invalid_argument, "criterion id must be in 1..10");
  const CriterionSpec& spec = kCriteria[id - 1];
  CriterionResult res;
  res.id = id;
  res.name = spec.name;
  auto start = std::chrono::steady_clock::now();
  try {
    Verdict v = spec.fn();
    res.pass = v.pass;
    res.detail = v.detail;
  } catch (const std::exception& e) {
    res.pass = false;
    res.detail = std::string("exception: ") + e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (spec.budget_seconds > 0.0 && res.seconds > spec.budget_seconds) {
    res.pass = false;
    res.detail += "; runtime " + fmt(res.seconds) + "s exceeds budget " +
                  fmt(spec.budget_seconds) + "s";
  }
  return res;
}

std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids) {
  std::vector<int> list = ids;
  if (list.empty())
    for (int i = 1; i <= 10; ++i) list.push_back(i);
  std::vector<CriterionResult> out;
  out.reserve(list.size());
  for (int id : list) out.push_back(run_acceptance_criterion(id));
  return out;
}

}  // namespace pf
