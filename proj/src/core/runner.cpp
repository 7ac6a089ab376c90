#include "core/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <optional>

#include "core/adams.hpp"
#include "core/error.hpp"
#include "core/kolmogorov.hpp"
#include "core/math_util.hpp"
#include "core/morrey.hpp"
#include "core/pde_energy.hpp"
#include "core/presets.hpp"
#include "core/quadrature.hpp"
#include "core/riesz.hpp"
#include "core/rng.hpp"
#include "core/sde_flow.hpp"
#include "core/svg.hpp"
#include "core/version.hpp"

namespace pf {

namespace {

std::vector<std::uint8_t> to_bytes(const double* data, std::size_t count) {
  std::vector<std::uint8_t> b(count * sizeof(double));
  if (count) std::memcpy(b.data(), data, b.size());
  return b;
}

std::string fd(double v) { return format_double(v); }

Json grid_json(const SpaceTimeGrid& g) {
  Json j;
  j["d"] = g.d;
  j["nt"] = g.nt;
  j["nx"] = g.nx;
  j["t0"] = g.t0;
  j["dt"] = g.dt;
  j["dx"] = g.dx;
  j["x0"] = g.x0;
  return j;
}

GridField input_field(const ExperimentConfig& cfg, RunOutput& out, const std::string& key,
                      const std::string& default_preset) {
  if (cfg.has(key)) {
    std::string path = cfg.str(key);
    out.inputs.push_back(path);
    return GridField::load(path);
  }
  std::string preset = cfg.str("preset", default_preset);
  if (preset == "singular-drift") {
    int d = static_cast<int>(cfg.integer("d", 3));
    return make_radial_power_field(d, static_cast<int>(cfg.integer("nt", 4)),
                                   static_cast<int>(cfg.integer("nx", 96)),
                                   cfg.num("extent", 24.0), cfg.num("power", 1.0),
                                   cfg.num("p", 2.5), cfg.num("scale", 1.0), cfg.num("dt", 0.5));
  }
  int d = static_cast<int>(cfg.integer("d", 2));
  int nt = static_cast<int>(cfg.integer("nt", 32));
  int nx = static_cast<int>(cfg.integer("nx", 32));
  double extent = cfg.num("extent", 8.0);
  double t_span = cfg.num("t_span", 1.0);
  if (preset == "bump")
    return make_bump_field(d, nt, nx, extent, cfg.num("radius", 0.0), t_span);
  if (preset == "gauss")
    return make_gaussian_field(d, nt, nx, extent, cfg.num("width", 1.0), t_span);
  fail(Errc::invalid_argument,
       "unknown field preset '" + preset + "' (use bump, gauss, singular-drift)");
}

// ---------------------------------------------------------------------------
// morrey

void run_morrey(const ExperimentConfig& cfg, RunOutput& out) {
  std::string op = cfg.operation.empty() ? "norm" : cfg.operation;
  require(op == "norm", Errc::invalid_argument,
          "unknown operation '" + op + "' for module morrey (use norm)");
  GridField f = input_field(cfg, out, "field", "singular-drift");

  MorreyParams mp;
  mp.p = cfg.num("p", 2.5);
  bool has_rho = cfg.has("rho"), has_beta = cfg.has("beta");
  require(!(has_rho && has_beta), Errc::invalid_argument,
          "choose rho (capped norm) or beta (homogeneous norm), not both");
  if (has_rho) mp.rho = cfg.num("rho");
  if (has_beta) mp.beta = cfg.num("beta");

  std::vector<double> radii = cfg.num_list("radii");
  if (radii.empty())
    radii = default_radii(f.grid, cfg.num("r_max", has_rho ? *mp.rho : 0.0),
                          static_cast<int>(cfg.integer("radii_per_decade", 8)));
  bool origin_only = cfg.flag("origin_only", false);

  ScanSpec scan;
  scan.center_stride = static_cast<int>(cfg.integer("stride", 2));
  scan.time_stride = static_cast<int>(cfg.integer("time_stride", 0));
  if (origin_only) {
    for (double r : radii)
      scan.explicit_cylinders.emplace_back(f.grid.t0, std::vector<double>(f.grid.d, 0.0), r);
  } else {
    scan.radii = radii;
  }

  MorreyReport rep = has_beta ? morrey_homogeneous(f, mp, scan) : morrey_capped(f, mp, scan);

  // Per-radius profile of r^beta * mean (beta = 1 in the capped reading).
  double row_beta = has_beta ? *mp.beta : 1.0;
  std::vector<double> row_values;
  for (double r : radii) {
    ScanSpec srow;
    srow.center_stride = scan.center_stride;
    srow.time_stride = scan.time_stride;
    if (origin_only)
      srow.explicit_cylinders.emplace_back(f.grid.t0, std::vector<double>(f.grid.d, 0.0), r);
    else
      srow.radii = {r};
    MorreyParams mrow;
    mrow.p = mp.p;
    mrow.beta = row_beta;
    row_values.push_back(morrey_homogeneous(f, mrow, srow).value);
  }

  double band_tol = cfg.num("band_tol", 0.05);
  Json tol;
  tol["band_tol"] = band_tol;
  out.report["tolerances"] = tol;
  out.report["value"] = rep.value;
  Json cyl;
  cyl["t"] = rep.argmax.t;
  cyl["x"] = rep.argmax.x;
  cyl["r"] = rep.argmax.r;
  out.report["cylinder"] = cyl;
  Json sj;
  sj["mode"] = has_beta ? "homogeneous" : "capped";
  sj["center_stride"] = scan.center_stride;
  sj["time_stride"] = scan.time_stride;
  sj["radius_count"] = rep.radius_count;
  sj["origin_only"] = origin_only;
  sj["radii"] = radii;
  sj["values"] = row_values;
  out.report["scan"] = sj;
  out.report["boundary_mass"] = rep.boundary_mass;
  out.report["p_in_theorem_range"] = rep.p_in_theorem_range;
  out.report["vanishing_regime"] = rep.vanishing_regime;
  out.report["grid"] = grid_json(f.grid);

  if (cfg.has("oracle")) {
    double oracle = cfg.num("oracle");
    double worst = 0.0;
    for (double v : row_values) worst = std::max(worst, std::abs(v / oracle - 1.0));
    out.report["oracle"] = oracle;
    out.report["max_rel_gap"] = worst;
    out.pass = worst <= band_tol;
  }

  Csv csv;
  csv.header = {"radius", "value"};
  for (std::size_t i = 0; i < radii.size(); ++i)
    csv.add_row({fd(radii[i]), fd(row_values[i])});
  out.files.emplace_back("radius_scan.csv", csv.serialize());

  Plot plot;
  plot.title = "cylinder-norm profile";
  plot.x_label = "radius";
  plot.y_label = "r^beta * mean";
  plot.log_x = true;
  plot.series.push_back({"scan", radii, row_values});
  out.files.emplace_back("radius_scan.svg", plot.render());
}

// ---------------------------------------------------------------------------
// riesz

Cutoffs cutoffs_from(const ExperimentConfig& cfg) {
  Cutoffs c;
  c.time_horizon = cfg.num("time_horizon", 0.0);
  c.truncation_radius = cfg.num("truncation_radius", 0.0);
  c.rel_threshold = cfg.num("rel_threshold", 1e-12);
  c.exact_offsets = static_cast<int>(cfg.integer("exact_offsets", 3));
  return c;
}

Json cutoffs_json(const Cutoffs& c) {
  Json j;
  j["time_horizon"] = c.time_horizon;
  j["truncation_radius"] = c.truncation_radius;
  j["rel_threshold"] = c.rel_threshold;
  j["exact_offsets"] = c.exact_offsets;
  return j;
}

void run_riesz(const ExperimentConfig& cfg, RunOutput& out) {
  std::string op = cfg.operation.empty() ? "heat-check" : cfg.operation;
  Cutoffs cut = cutoffs_from(cfg);
  double residual_tol = cfg.num("residual_tol", 0.05);
  Json tol;
  tol["residual_tol"] = residual_tol;

  if (op == "apply") {
    GridField f = input_field(cfg, out, "field", "bump");
    KernelSpec spec{cfg.num("alpha", 2.0), cfg.num("k", 4.0)};
    PotentialResult pr = apply_potential(spec, f, cut);
    out.report["tolerances"] = tol;
    out.report["alpha"] = spec.alpha;
    out.report["k"] = spec.k;
    out.report["grid"] = grid_json(pr.field.grid);
    Json cj = cutoffs_json(cut);
    cj["time_horizon"] = pr.time_horizon;
    cj["truncation_radius"] = pr.truncation_radius;
    out.report["cutoffs"] = cj;
    out.report["tail_bound"] = pr.tail_bound;
    out.fields.push_back({"potential", std::move(pr.field), {}});
    Csv csv;
    csv.header = {"quantity", "value"};
    csv.add_row({"time_horizon", fd(pr.time_horizon)});
    csv.add_row({"truncation_radius", fd(pr.truncation_radius)});
    csv.add_row({"tail_bound", fd(pr.tail_bound)});
    out.files.emplace_back("potential.csv", csv.serialize());
    return;
  }

  if (op == "heat-check") {
    GridField u = input_field(cfg, out, "field", "gauss");
    double c_gap_tol = cfg.num("c_gap_tol", 0.05);
    tol["c_gap_tol"] = c_gap_tol;
    HeatRepReport rep = heat_representation_residual(u, cut);
    out.report["tolerances"] = tol;
    out.report["c_est"] = rep.c_est;
    out.report["residual"] = rep.residual;
    out.report["c_reference"] = rep.c_reference;
    out.report["magnitude_gap"] = rep.magnitude_gap;
    out.report["grid"] = grid_json(u.grid);
    out.report["cutoffs"] = cutoffs_json(cut);
    out.pass = rep.residual <= residual_tol && rep.magnitude_gap <= c_gap_tol;
    Csv csv;
    csv.header = {"c_est", "residual", "c_reference", "magnitude_gap"};
    csv.add_row({fd(rep.c_est), fd(rep.residual), fd(rep.c_reference), fd(rep.magnitude_gap)});
    out.files.emplace_back("heat_check.csv", csv.serialize());
    return;
  }

  if (op == "semigroup") {
    GridField f = input_field(cfg, out, "field", "bump");
    double alpha = cfg.num("alpha", 1.0);
    double alpha2 = cfg.num("alpha2", alpha);
    double k = cfg.num("k", 4.0);
    SemigroupReport rep = semigroup_residual(alpha, alpha2, k, f, cut);
    out.report["tolerances"] = tol;
    out.report["alpha"] = alpha;
    out.report["alpha2"] = alpha2;
    out.report["k"] = k;
    out.report["c_est"] = rep.c_est;
    out.report["residual"] = rep.residual;
    out.report["grid"] = grid_json(f.grid);
    out.report["cutoffs"] = cutoffs_json(cut);
    out.pass = rep.residual <= residual_tol;
    Csv csv;
    csv.header = {"c_est", "residual"};
    csv.add_row({fd(rep.c_est), fd(rep.residual)});
    out.files.emplace_back("semigroup.csv", csv.serialize());
    return;
  }

  if (op == "deriv-dom") {
    int n = static_cast<int>(cfg.integer("n", 1));
    double alpha = cfg.num("alpha", 2.0);
    double k = cfg.num("k", 4.0);
    int d = static_cast<int>(cfg.integer("d", 2));
    SpaceTimeGrid g = SpaceTimeGrid::centered(d, static_cast<int>(cfg.integer("nt", 24)),
                                              static_cast<int>(cfg.integer("nx", 24)), 0.0,
                                              cfg.num("t_span", 4.0) / cfg.num("nt", 24.0),
                                              0.5 * cfg.num("extent", 8.0));
    auto family = make_test_family(g, static_cast<int>(cfg.integer("family_size", 8)),
                                   static_cast<std::uint64_t>(cfg.integer("seed", 2026)));
    DerivDomReport rep = derivative_domination_report(n, alpha, k, family, cut);
    out.report["tolerances"] = tol;
    out.report["n"] = n;
    out.report["alpha"] = alpha;
    out.report["k"] = k;
    out.report["n_est"] = rep.n_est;
    out.report["n_est_same_k"] = rep.n_est_same_k;
    out.report["excluded"] = rep.excluded;
    out.report["total"] = rep.total;
    out.report["all_excluded"] = rep.all_excluded;
    out.report["grid"] = grid_json(g);
    out.report["cutoffs"] = cutoffs_json(cut);
    out.pass = !rep.all_excluded && std::isfinite(rep.n_est);
    Csv csv;
    csv.header = {"n_est", "n_est_same_k", "excluded", "total"};
    csv.add_row({fd(rep.n_est), fd(rep.n_est_same_k), std::to_string(rep.excluded),
                 std::to_string(rep.total)});
    out.files.emplace_back("deriv_dom.csv", csv.serialize());
    return;
  }

  fail(Errc::invalid_argument, "unknown operation '" + op +
                                   "' for module riesz (use apply, heat-check, semigroup, "
                                   "deriv-dom)");
}

// ---------------------------------------------------------------------------
// adams

void run_adams(const ExperimentConfig& cfg, RunOutput& out) {
  std::string op = cfg.operation.empty() ? "family" : cfg.operation;
  require(op == "family", Errc::invalid_argument,
          "unknown operation '" + op + "' for module adams (use family)");
  int d = static_cast<int>(cfg.integer("d", 2));
  int nt = static_cast<int>(cfg.integer("nt", 24));
  int nx = static_cast<int>(cfg.integer("nx", 24));
  SpaceTimeGrid g = SpaceTimeGrid::centered(d, nt, nx, 0.0, cfg.num("t_span", 4.0) / nt,
                                            0.5 * cfg.num("extent", 8.0));
  FamilyParams fp;
  fp.spec = KernelSpec{cfg.num("alpha", 1.0), cfg.num("k", 8.0)};
  fp.p = cfg.num("p", 2.5);
  fp.q = cfg.num("q", 2.0);
  fp.family_size = static_cast<int>(cfg.integer("family_size", 50));
  fp.seed = static_cast<std::uint64_t>(cfg.integer("seed", 2026));
  fp.dual = cfg.flag("dual", false);

  std::vector<FamilyCaseRow> rows;
  RatioReport rep = adams_family_report(g, fp, &rows);

  out.report["tolerances"] = Json::object();
  out.report["dual"] = fp.dual;
  out.report["p"] = fp.p;
  out.report["q"] = fp.q;
  out.report["alpha"] = fp.spec.alpha;
  out.report["k"] = fp.spec.k;
  out.report["family_size"] = fp.family_size;
  out.report["seed"] = fp.seed;
  out.report["ratio"] = rep.ratio;
  out.report["numerator"] = rep.numerator;
  out.report["morrey_b"] = rep.morrey_b;
  out.report["lq_f"] = rep.lq_f;
  out.report["worst_case"] = rep.worst_case;
  out.report["boundary_mass"] = rep.boundary_mass;
  out.report["grid"] = grid_json(g);
  out.pass = std::isfinite(rep.ratio) && rep.ratio > 0.0;

  Csv csv;
  csv.header = {"case_id", "ratio", "morrey_b", "lq_f"};
  std::vector<double> xs, ys;
  for (const auto& row : rows) {
    csv.add_row({std::to_string(row.case_id), fd(row.ratio), fd(row.morrey_b), fd(row.lq_f)});
    xs.push_back(row.case_id);
    ys.push_back(row.ratio);
  }
  out.files.emplace_back("cases.csv", csv.serialize());

  Plot plot;
  plot.title = fp.dual ? "dual weighted-potential ratios" : "weighted-potential ratios";
  plot.x_label = "case";
  plot.y_label = "ratio";
  plot.series.push_back({"family", xs, ys});
  out.files.emplace_back("cases.svg", plot.render());
}

// ---------------------------------------------------------------------------
// pde-energy

void run_pde_energy(const ExperimentConfig& cfg, RunOutput& out) {
  std::string op = cfg.operation.empty() ? "energy" : cfg.operation;
  require(op == "energy", Errc::invalid_argument,
          "unknown operation '" + op + "' for module pde-energy (use energy)");

  GridField terminal = [&]() {
    if (cfg.has("terminal")) {
      std::string path = cfg.str("terminal");
      out.inputs.push_back(path);
      return GridField::load(path);
    }
    int d = static_cast<int>(cfg.integer("d", 2));
    int nx = static_cast<int>(cfg.integer("nx", 48));
    double extent = cfg.num("extent", 8.0);
    std::string preset = cfg.str("terminal_preset", "bump");
    if (preset == "bump") return make_bump_field(d, 1, nx, extent, cfg.num("radius", 0.0));
    if (preset == "gauss") return make_gaussian_field(d, 1, nx, extent, cfg.num("width", 1.0));
    fail(Errc::invalid_argument, "unknown terminal preset '" + preset + "' (use bump, gauss)");
  }();

  DivFormCoefficients coeffs = [&]() {
    if (cfg.has("coeffs")) {
      std::string path = cfg.str("coeffs");
      out.inputs.push_back(path);
      return unpack_div_coefficients(GridField::load(path), cfg.num("delta", 1.0));
    }
    std::string preset = cfg.str("coeffs_preset", "heat");
    if (preset == "heat") return make_constant_coefficients(terminal.grid, cfg.num("a_scale", 1.0));
    if (preset == "drift")
      return make_drift_coefficients(terminal.grid, cfg.num("drift_scale", 0.05),
                                     cfg.num("eps_mol", 4.0 * terminal.grid.dx));
    fail(Errc::invalid_argument, "unknown coefficient preset '" + preset + "' (use heat, drift)");
  }();

  int n = static_cast<int>(cfg.integer("n", 4));
  double lambda = cfg.num("lambda", 1.0);
  double rho0 = cfg.num("rho0", 1.0);
  double T = cfg.num("T", 1.0);
  double n_config = cfg.num("n_config", 1.0);
  bool allow_any_n = cfg.flag("allow_any_n", false);
  double dx = terminal.grid.dx;
  int steps_default = static_cast<int>(std::ceil(T * coeffs.delta / (dx * dx) - 1e-12));
  int steps = static_cast<int>(cfg.integer("steps", std::max(1, steps_default)));

  SolveReport sr = solve_backward(coeffs, terminal, T, steps);
  EnergyReport er = energy_report(sr.u, terminal, n, lambda, rho0, T, n_config, allow_any_n);

  GridField u0(terminal.grid, 1);
  for (std::int64_t sp = 0; sp < terminal.grid.spatial_count(); ++sp)
    u0.at(0, sp) = sr.u.at(0, sp);
  double ibp = ibp_pairing_defect(coeffs, u0, terminal);

  Json tol;
  tol["heat_ratio_tol"] = cfg.num("heat_ratio_tol", 1.02);
  out.report["tolerances"] = tol;
  out.report["n"] = er.n;
  out.report["lambda"] = er.lambda;
  out.report["rho0"] = er.rho0;
  out.report["T"] = er.T;
  out.report["n_config"] = er.n_config;
  out.report["alpha"] = er.alpha;
  out.report["lhs_terminalless"] = er.lhs_terminalless;
  out.report["lhs_gradient"] = er.lhs_gradient;
  out.report["rhs"] = er.rhs;
  out.report["ratio_terminalless"] = er.ratio_terminalless;
  out.report["ratio_gradient"] = er.ratio_gradient;
  out.report["n_min"] = er.n_min;
  out.report["pass_terminalless"] = er.pass_terminalless;
  out.report["pass_gradient"] = er.pass_gradient;
  Json solver;
  solver["steps"] = steps;
  solver["residual_linf"] = sr.residual_linf;
  solver["boundary_max"] = sr.boundary_max;
  solver["iterations"] = sr.iterations;
  out.report["solver"] = solver;
  out.report["ibp_defect"] = ibp;
  out.report["grid"] = grid_json(terminal.grid);
  out.pass = er.pass_terminalless && er.pass_gradient;

  ExponentialWeight w(lambda);
  auto p2n = [n](double v) { return std::pow(std::abs(v), 2 * n); };
  Csv csv;
  csv.header = {"step", "t", "weighted_l2n"};
  std::vector<double> ts, vs;
  for (int it = 0; it < sr.u.grid.nt; ++it) {
    double tv = it * (T / steps);
    double val = weighted_space_integral(sr.u, it, w, p2n);
    csv.add_row({std::to_string(it), fd(tv), fd(val)});
    ts.push_back(tv);
    vs.push_back(val);
  }
  out.files.emplace_back("energy_trace.csv", csv.serialize());

  Plot plot;
  plot.title = "weighted L^2n energy over time";
  plot.x_label = "t";
  plot.y_label = "integral |u|^2n e^{-lambda|x|}";
  plot.series.push_back({"solve", ts, vs});
  out.files.emplace_back("energy_trace.svg", plot.render());
}

// ---------------------------------------------------------------------------
// sde

FlowRequest flow_request_from(const ExperimentConfig& cfg, int d, bool default_eta) {
  FlowRequest req;
  req.t0 = cfg.num("t0", 0.0);
  req.x0 = cfg.num_list("x0");
  if (req.x0.empty()) req.x0.assign(static_cast<std::size_t>(d), 0.0);
  req.eta0 = cfg.num_list("eta0");
  if (req.eta0.empty() && default_eta) {
    req.eta0.assign(static_cast<std::size_t>(d), 0.0);
    req.eta0[0] = 1.0;
  }
  req.T = cfg.num("T", 1.0);
  req.h = cfg.num("h", 1e-2);
  req.M = cfg.integer("M", 1000);
  req.seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));
  req.jacobian = cfg.flag("jacobian", false);
  req.blowup_guard = cfg.num("guard", 1e8);
  return req;
}

SpaceTimeGrid sde_xgrid(const ExperimentConfig& cfg, int d, int nx_default, double extent_default) {
  return SpaceTimeGrid::centered(d, 1, static_cast<int>(cfg.integer("nx", nx_default)), 0.0, 1.0,
                                 0.5 * cfg.num("extent", extent_default));
}

void run_sde(const ExperimentConfig& cfg, RunOutput& out) {
  std::string op = cfg.operation.empty() ? "simulate" : cfg.operation;
  int d = static_cast<int>(cfg.integer("d", 2));
  SdeCoefficients c = parse_sde_coefficients(cfg.str("coeffs", "identity"), d);
  Json tol = Json::object();

  if (op == "simulate") {
    FlowRequest req = flow_request_from(cfg, d, true);
    req.store_paths = true;
    FlowEnsemble ens = simulate_flow(c, req);

    // The container grid must satisfy the PFLD invariants (d >= 2, nx >= 2),
    // so the ensemble mean rides on a minimal placeholder grid (replicated
    // across its 2^2 cells); the per-path data lives in the chunks.
    SpaceTimeGrid pg(2, ens.steps + 1, 2, req.t0, ens.h, 1.0, {0.0, 0.0});
    GridField mean(pg, d);
    std::int64_t used = ens.M - ens.excluded_count;
    for (int s = 0; s <= ens.steps; ++s)
      for (int i = 0; i < d; ++i) {
        NeumaierSum acc;
        for (std::int64_t p = 0; p < ens.M; ++p) {
          if (ens.excluded[static_cast<std::size_t>(p)]) continue;
          acc.add(ens.x[static_cast<std::size_t>((p * (ens.steps + 1) + s) * d + i)]);
        }
        double m = used > 0 ? acc.value() / static_cast<double>(used) : 0.0;
        for (std::int64_t sp = 0; sp < pg.spatial_count(); ++sp) mean.at(s, sp, i) = m;
      }

    std::vector<GridField::Chunk> chunks;
    chunks.emplace_back("paths", to_bytes(ens.x.data(), ens.x.size()));
    if (!ens.eta.empty()) chunks.emplace_back("etas", to_bytes(ens.eta.data(), ens.eta.size()));
    if (!ens.jac.empty()) chunks.emplace_back("jacb", to_bytes(ens.jac.data(), ens.jac.size()));
    chunks.emplace_back("excl", std::vector<std::uint8_t>(ens.excluded.begin(), ens.excluded.end()));

    out.report["tolerances"] = tol;
    out.report["d"] = d;
    out.report["d1"] = ens.d1;
    out.report["steps"] = ens.steps;
    out.report["M"] = ens.M;
    out.report["h"] = ens.h;
    out.report["T"] = ens.T;
    out.report["seed"] = ens.seed;
    out.report["excluded_count"] = ens.excluded_count;
    std::vector<double> mf(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) mf[static_cast<std::size_t>(i)] = mean.at(ens.steps, 0, i);
    out.report["mean_final"] = mf;

    Csv csv;
    csv.header = {"step", "t"};
    for (int i = 0; i < d; ++i) csv.header.push_back("mean_x" + std::to_string(i + 1));
    for (int s = 0; s <= ens.steps; ++s) {
      std::vector<std::string> row{std::to_string(s), fd(req.t0 + s * ens.h)};
      for (int i = 0; i < d; ++i) row.push_back(fd(mean.at(s, 0, i)));
      csv.add_row(std::move(row));
    }
    out.files.emplace_back("mean_path.csv", csv.serialize());
    out.fields.push_back({"ensemble", std::move(mean), std::move(chunks)});
    return;
  }

  if (op == "bump-check") {
    FlowRequest req = flow_request_from(cfg, d, true);
    double eps = cfg.num("eps", 1e-3);
    BumpReport rep = jacobian_vs_bump(c, req, eps);
    double gate = cfg.num("tol", 0.0);
    tol["tol"] = gate;
    out.report["tolerances"] = tol;
    out.report["eps"] = eps;
    out.report["max_deviation"] = rep.max_deviation;
    out.report["used_paths"] = rep.used_paths;
    out.report["excluded"] = rep.excluded;
    out.pass = gate > 0.0 ? rep.max_deviation <= gate : true;
    Csv csv;
    csv.header = {"eps", "max_deviation", "used_paths", "excluded"};
    csv.add_row({fd(eps), fd(rep.max_deviation), std::to_string(rep.used_paths),
                 std::to_string(rep.excluded)});
    out.files.emplace_back("bump_check.csv", csv.serialize());
    return;
  }

  if (op == "chain-rule") {
    FlowRequest req = flow_request_from(cfg, d, true);
    SmoothFn f = smooth_fn_preset(cfg.str("observable", "quadratic"), d);
    double eps_x = cfg.num("eps_x", 1e-3);
    double factor = cfg.num("half_width_factor", 3.0);
    ChainRuleReport rep = chain_rule_residual(c, f, req, eps_x);
    tol["half_width_factor"] = factor;
    out.report["tolerances"] = tol;
    out.report["observable"] = cfg.str("observable", "quadratic");
    out.report["eps_x"] = eps_x;
    out.report["lhs"] = rep.lhs;
    out.report["rhs"] = rep.rhs;
    out.report["residual"] = rep.residual;
    out.report["half_width"] = rep.half_width;
    out.report["inconclusive"] = rep.inconclusive;
    out.pass = rep.residual <= factor * rep.half_width + 1e-12;
    Csv csv;
    csv.header = {"lhs", "rhs", "residual", "half_width"};
    csv.add_row({fd(rep.lhs), fd(rep.rhs), fd(rep.residual), fd(rep.half_width)});
    out.files.emplace_back("chain_rule.csv", csv.serialize());
    return;
  }

  if (op == "generator") {
    DirectionalPolynomial f = directional_poly_preset(cfg.str("functional", "eta-sum"), d);
    GeneratorSpec spec;
    spec.dt_fd = cfg.num("dt_fd", 0.05);
    spec.dx_fd = cfg.num("dx_fd", 0.1);
    spec.de_fd = cfg.num("de_fd", 0.1);
    spec.h = cfg.num("h", 1e-2);
    spec.M = cfg.integer("M", 2000);
    spec.seed = static_cast<std::uint64_t>(cfg.integer("seed", 7));
    double T = cfg.num("T", 1.0);
    double rel_tol = cfg.num("rel_tol", 0.05);

    std::vector<double> x0 = cfg.num_list("x0");
    if (x0.empty()) x0.assign(static_cast<std::size_t>(d), 0.0);
    std::vector<double> eta0 = cfg.num_list("eta0");
    if (eta0.empty()) {
      eta0.assign(static_cast<std::size_t>(d), 0.0);
      eta0[0] = 1.0;
    }
    int nc = static_cast<int>(cfg.integer("center_count", 1));
    std::vector<GeneratorPoint> centers;
    for (int j = 0; j < nc; ++j) {
      GeneratorPoint gp;
      gp.t = cfg.num("t_center", 0.0);
      gp.x = x0;
      gp.eta = eta0;
      if (j > 0) {
        double ang = 2.0 * kPi * j / nc;
        gp.x[0] += 0.3 * std::cos(ang);
        if (d > 1) gp.x[1] += 0.3 * std::sin(ang);
      }
      centers.push_back(std::move(gp));
    }

    GeneratorReport rep = generator_residual(c, f, T, centers, spec);
    tol["rel_tol"] = rel_tol;
    tol["half_width_factor"] = 3.0;
    out.report["tolerances"] = tol;
    out.report["functional"] = cfg.str("functional", "eta-sum");
    out.report["max_rel"] = rep.max_rel;
    out.report["median_rel"] = rep.median_rel;
    out.report["residuals"] = rep.residual_rel;
    out.report["half_widths"] = rep.half_width;
    bool ok = true;
    Csv csv;
    csv.header = {"center", "residual_rel", "half_width", "noise_dominated"};
    for (std::size_t i = 0; i < rep.residual_rel.size(); ++i) {
      ok = ok && rep.residual_rel[i] <= std::max(rel_tol, 3.0 * rep.half_width[i]);
      csv.add_row({std::to_string(i), fd(rep.residual_rel[i]), fd(rep.half_width[i]),
                   rep.noise_flag[i] ? "1" : "0"});
    }
    out.pass = ok;
    out.files.emplace_back("generator.csv", csv.serialize());
    return;
  }

  if (op == "weighted-sup") {
    DirectionalPolynomial f = directional_poly_preset(cfg.str("functional", "eta-sum"), d);
    int n = static_cast<int>(cfg.integer("n", 1));
    double lambda = cfg.num("lambda", 1.0);
    double rho0 = cfg.num("rho0", 1.0);
    double T = cfg.num("T", 1.0);
    SpaceTimeGrid g = sde_xgrid(cfg, d, 9, 4.0);
    WeightedSupReport rep = weighted_sup_eta_report(
        c, f, n, lambda, rho0, T, g, cfg.integer("M", 200), cfg.num("h", 1e-2),
        static_cast<std::uint64_t>(cfg.integer("seed", 1)),
        static_cast<int>(cfg.integer("eta_points", 64)));
    out.report["tolerances"] = tol;
    out.report["n"] = n;
    out.report["lambda"] = lambda;
    out.report["rho0"] = rho0;
    out.report["T"] = T;
    out.report["lhs"] = rep.lhs;
    out.report["rhs_base"] = rep.rhs_base;
    out.report["n_min"] = rep.n_min;
    out.report["n_min_lambda0"] = rep.n_min_lambda0;
    out.report["lhs_lambda0"] = rep.lhs_lambda0;
    out.report["rhs_lambda0"] = rep.rhs_lambda0;
    out.report["mc_half_width"] = rep.mc_half_width;
    out.report["mc_dominated"] = rep.mc_dominated;
    out.report["eta_points"] = rep.eta_points;
    out.report["grid"] = grid_json(g);
    out.pass = !rep.mc_dominated && std::isfinite(rep.n_min);
    Csv csv;
    csv.header = {"lhs", "rhs_base", "n_min", "n_min_lambda0", "mc_half_width"};
    csv.add_row({fd(rep.lhs), fd(rep.rhs_base), fd(rep.n_min), fd(rep.n_min_lambda0),
                 fd(rep.mc_half_width)});
    out.files.emplace_back("weighted_sup.csv", csv.serialize());
    return;
  }

  if (op == "jac-moment") {
    int kappa = static_cast<int>(cfg.integer("kappa", 3));
    double t = cfg.num("t", 0.0);
    double T = cfg.num("T", 1.0);
    SpaceTimeGrid g = sde_xgrid(cfg, d, 32, 20.0);
    bool op_norm = cfg.flag("operator_norm", false);
    DerivMomentReport rep = derivative_weighted_moment(
        c, kappa, t, g, cfg.integer("M", 1000), T, cfg.num("h", 1e-2),
        static_cast<std::uint64_t>(cfg.integer("seed", 1)), op_norm);
    tol["excluded_fraction_max"] = 0.001;
    out.report["tolerances"] = tol;
    out.report["kappa"] = kappa;
    out.report["t"] = t;
    out.report["T"] = T;
    out.report["value"] = rep.value;
    out.report["half_width"] = rep.half_width;
    out.report["excluded_fraction"] = rep.excluded_fraction;
    out.report["operator_norm"] = rep.operator_norm;
    out.report["grid"] = grid_json(g);
    Csv csv;
    csv.header = {"kappa", "value", "half_width", "excluded_fraction"};
    csv.add_row({std::to_string(kappa), fd(rep.value), fd(rep.half_width),
                 fd(rep.excluded_fraction)});
    out.files.emplace_back("jac_moment.csv", csv.serialize());
    return;
  }

  if (op == "poly-ball") {
    int eta_dim = static_cast<int>(cfg.integer("eta_dim", 2));
    int samples = static_cast<int>(cfg.integer("sample_count", 1 << 14));
    std::string preset = cfg.str("cases", "disk-moment");
    std::vector<std::vector<PolyBallCase>> cases;
    if (preset == "disk-moment") {
      cases.push_back({{directional_poly_preset("eta1-squared", eta_dim), 1.0}});
    } else if (preset == "constant") {
      cases.push_back({{directional_poly_preset("constant:2", eta_dim), 1.5}});
    } else if (preset == "family") {
      std::int64_t count = cfg.integer("count", 1000);
      auto seed = static_cast<std::uint64_t>(cfg.integer("seed", 2026));
      for (std::int64_t cse = 0; cse < count; ++cse) {
        std::uint64_t ctr = 0;
        auto u = [&]() { return uniform_draw(seed, static_cast<std::uint64_t>(cse), ctr++); };
        DirectionalPolynomial poly;
        poly.eta_dim = eta_dim;
        int n_terms = 1 + static_cast<int>(u() * 3.0);
        for (int tmi = 0; tmi < n_terms; ++tmi) {
          DirectionalPolynomial::Term term;
          term.powers.assign(static_cast<std::size_t>(eta_dim), 0);
          int deg = 1 + static_cast<int>(u() * 3.0);
          deg = std::min(deg, 3);
          for (int q = 0; q < deg; ++q)
            ++term.powers[static_cast<std::size_t>(std::min<int>(
                eta_dim - 1, static_cast<int>(u() * eta_dim)))];
          double cconst = -2.0 + 4.0 * u();
          term.constant = std::abs(cconst) < 0.1 ? 0.5 : cconst;
          poly.terms.push_back(std::move(term));
        }
        double power = 1.0 + 0.5 * static_cast<int>(u() * 2.0);
        cases.push_back({{std::move(poly), power}});
      }
    } else {
      fail(Errc::invalid_argument,
           "unknown case preset '" + preset + "' (use disk-moment, constant, family)");
    }
    PolyBallReport rep = polynomial_ball_bound(cases, eta_dim, nullptr, samples);
    out.report["tolerances"] = tol;
    out.report["eta_dim"] = eta_dim;
    out.report["sample_count"] = rep.sample_count;
    out.report["max_ratio"] = rep.max_ratio;
    out.report["counter_candidates"] = rep.counter_candidates;
    Csv csv;
    csv.header = {"case", "ratio"};
    for (std::size_t i = 0; i < rep.ratios.size(); ++i)
      csv.add_row({std::to_string(i), fd(rep.ratios[i])});
    out.files.emplace_back("poly_ball.csv", csv.serialize());
    return;
  }

  fail(Errc::invalid_argument,
       "unknown operation '" + op +
           "' for module sde (use simulate, bump-check, chain-rule, generator, weighted-sup, "
           "jac-moment, poly-ball)");
}

// ---------------------------------------------------------------------------
// kolmogorov

LatticeField kolmogorov_field(const ExperimentConfig& cfg, const MixedRadixLattice& lat) {
  std::string preset = cfg.str("field", "coordinate");
  int r = lat.r;
  if (preset == "zero")
    return LatticeField::from_function(lat, [](const double*) { return 0.0; });
  if (preset == "coordinate") {
    int axis = static_cast<int>(cfg.integer("axis", r - 1));
    require(axis >= 0 && axis < r, Errc::invalid_argument, "axis out of range");
    return LatticeField::from_function(lat, [axis](const double* z) { return z[axis]; });
  }
  if (preset == "time")
    return LatticeField::from_function(lat, [](const double* z) { return z[0]; });
  if (preset == "product")
    return LatticeField::from_function(lat, [r](const double* z) {
      double v = 1.0;
      for (int i = 0; i < r; ++i) v *= z[i];
      return v;
    });
  if (preset == "smooth")
    return LatticeField::from_function(lat, [r](const double* z) {
      double v = std::sin(2.0 * kPi * z[0]);
      for (int i = 1; i < r; ++i) v *= std::cos(kPi * z[i]);
      return 0.5 * v;
    });
  fail(Errc::invalid_argument, "unknown lattice field preset '" + preset +
                                   "' (use zero, coordinate, time, product, smooth)");
}

void run_kolmogorov(const ExperimentConfig& cfg, RunOutput& out) {
  std::string op = cfg.operation.empty() ? "certify" : cfg.operation;
  Json tol = Json::object();

  if (op == "certify") {
    std::vector<std::int64_t> rad = cfg.int_list("radices");
    if (rad.empty()) rad = {4, 2};
    std::vector<int> radices(rad.begin(), rad.end());
    int depth = static_cast<int>(cfg.integer("lattice_depth", 6));
    MixedRadixLattice lat(radices, depth);
    LatticeField u = kolmogorov_field(cfg, lat);
    double alpha = cfg.num("alpha", 1.0);
    IncrementCheck chk = increment_condition_level(u, alpha);

    out.report["tolerances"] = tol;
    out.report["alpha"] = alpha;
    out.report["holds"] = chk.holds;
    out.report["level_max"] = chk.level_max;
    Csv csv;
    csv.header = {"level", "max_increment", "bound"};
    for (std::size_t m = 0; m < chk.level_max.size(); ++m)
      csv.add_row({std::to_string(m), fd(chk.level_max[m]),
                   fd(std::exp2(-static_cast<double>(m) * alpha))});
    out.files.emplace_back("levels.csv", csv.serialize());

    if (chk.holds) {
      HolderCertificate cert = holder_certificate(
          u, alpha, chk.n_star, static_cast<std::uint64_t>(cfg.integer("seed", 11)));
      out.report["n_star"] = cert.n_star;
      out.report["alpha_i"] = cert.alpha_i;
      out.report["N_measured"] = cert.n_measured;
      out.report["mode"] = cert.mode;
      out.report["pair_count"] = cert.pair_count;
      out.report["validity_box"] = cert.validity_box;
      out.pass = true;
    } else {
      out.report["n_star"] = -1;
      Json w;
      w["level"] = chk.witness.level;
      w["axis"] = chk.witness.axis;
      w["z1"] = chk.witness.z1;
      w["z2"] = chk.witness.z2;
      w["delta"] = chk.witness.delta;
      w["bound"] = chk.witness.bound;
      out.report["witness"] = w;
      out.pass = false;
    }
    return;
  }

  if (op == "extend") {
    std::vector<std::int64_t> rad = cfg.int_list("radices");
    if (rad.empty()) rad = {4, 2};
    std::vector<int> radices(rad.begin(), rad.end());
    int depth = static_cast<int>(cfg.integer("lattice_depth", 6));
    MixedRadixLattice lat(radices, depth);
    LatticeField u = kolmogorov_field(cfg, lat);
    std::vector<double> query = cfg.num_list("query");
    if (query.empty()) query.assign(static_cast<std::size_t>(lat.r), 1.0 / 3.0);
    require(static_cast<int>(query.size()) == lat.r, Errc::invalid_argument,
            "query must have one coordinate per axis");

    std::vector<double> values, gaps;
    for (int m = 0; m <= depth; ++m) values.push_back(continuity_extension(u, query.data(), m));
    for (double v : values) gaps.push_back(std::abs(v - values.back()));

    out.report["tolerances"] = tol;
    out.report["query"] = query;
    out.report["value"] = values.back();
    out.report["levels"] = values;
    out.report["gaps"] = gaps;
    Csv csv;
    csv.header = {"level", "value", "gap_to_finest"};
    for (std::size_t m = 0; m < values.size(); ++m)
      csv.add_row({std::to_string(m), fd(values[m]), fd(gaps[m])});
    out.files.emplace_back("extension.csv", csv.serialize());
    return;
  }

  if (op == "flow-check") {
    int d = static_cast<int>(cfg.integer("d", 2));
    SdeCoefficients c = parse_sde_coefficients(cfg.str("coeffs", "identity"), d);
    int depth = static_cast<int>(cfg.integer("lattice_depth", 3));
    std::int64_t M = cfg.integer("M", 64);
    auto seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));
    double kappa = cfg.num("kappa", 3.0);
    double alpha_cap = 1.0 - (d + 2) / (2.0 * kappa);
    double alpha = cfg.num("alpha", 0.5 * alpha_cap);
    double gamma = cfg.num("gamma", 2.0 * kappa);
    LatticeFlowEnsemble ens =
        sample_flow_on_lattice(c, depth, M, seed, cfg.num("time_scale", 1.0),
                               cfg.num("box_lo", 0.0), cfg.num("box_scale", 1.0));
    FlowHolderReport rep =
        flow_holder_check(ens, alpha, gamma, kappa, cfg.num("K", 0.0),
                          static_cast<std::uint64_t>(cfg.integer("pair_seed", 17)));

    out.report["tolerances"] = tol;
    out.report["alpha"] = rep.alpha;
    out.report["gamma"] = rep.gamma;
    out.report["kappa"] = rep.kappa;
    out.report["k_time"] = rep.k_time;
    out.report["k_space"] = rep.k_space;
    out.report["k_used"] = rep.k_used;
    out.report["spatial_exponent"] = rep.spatial_exponent;
    out.report["spatial_modulus"] = rep.spatial_modulus;
    out.report["level_space_max"] = rep.level_space_max;
    out.report["failure_rate"] = rep.failure_rate;
    out.report["n_star_counts"] = rep.n_star_counts;
    out.report["modulus_max"] = rep.modulus_max;
    out.report["modulus_median"] = rep.modulus_median;
    out.report["realizations"] = rep.realizations;
    out.report["no_n_count"] = rep.no_n_count;

    Csv csv;
    csv.header = {"n", "failure_rate", "n_star_count"};
    std::vector<double> ns, fr;
    for (std::size_t i = 0; i < rep.failure_rate.size(); ++i) {
      csv.add_row({std::to_string(i), fd(rep.failure_rate[i]),
                   std::to_string(rep.n_star_counts[i])});
      ns.push_back(static_cast<double>(i));
      fr.push_back(rep.failure_rate[i]);
    }
    out.files.emplace_back("failure_rates.csv", csv.serialize());

    Plot plot;
    plot.title = "event failure rate by starting level";
    plot.x_label = "n";
    plot.y_label = "P(A_n fails)";
    plot.series.push_back({"empirical", ns, fr});
    out.files.emplace_back("failure_rates.svg", plot.render());
    return;
  }

  fail(Errc::invalid_argument, "unknown operation '" + op +
                                   "' for module kolmogorov (use certify, extend, flow-check)");
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& cfg) {
  RunOutput out;
  out.report = base_report(cfg);
  const std::string& m = cfg.module;
  if (m == "morrey")
    run_morrey(cfg, out);
  else if (m == "riesz")
    run_riesz(cfg, out);
  else if (m == "adams")
    run_adams(cfg, out);
  else if (m == "pde-energy")
    run_pde_energy(cfg, out);
  else if (m == "sde")
    run_sde(cfg, out);
  else if (m == "kolmogorov")
    run_kolmogorov(cfg, out);
  else
    fail(Errc::invalid_argument,
         "unknown module '" + m +
             "' (use morrey, riesz, adams, pde-energy, sde, kolmogorov)");
  out.report["pass"] = out.pass;
  return out;
}

RunManifest run_to_dir(const ExperimentConfig& cfg, RunOutput* result_out) {
  auto start = std::chrono::steady_clock::now();
  RunOutput out = run_experiment(cfg);

  std::string dir = cfg.output_dir.empty() ? "out" : cfg.output_dir;
  std::filesystem::create_directories(dir);
  auto in_dir = [&](const std::string& name) { return dir + "/" + name; };

  RunManifest man;
  man.config_hash = cfg.hash_hex();
  man.artifact_version = kVersion;
  man.created_utc = utc_timestamp();
  for (const std::string& path : out.inputs)
    man.inputs.emplace_back(path, file_checksum_hex(path));

  write_text_file(in_dir("report.json"), out.report.dump(2) + "\n");
  man.outputs.push_back("report.json");
  write_text_file(in_dir("config.txt"), cfg.serialize());
  man.outputs.push_back("config.txt");
  for (const auto& [name, bytes] : out.files) {
    write_text_file(in_dir(name), bytes);
    man.outputs.push_back(name);
  }
  for (const auto& fo : out.fields) {
    fo.field.save(in_dir(fo.name + ".pfld"), true, fo.chunks);
    man.outputs.push_back(fo.name + ".pfld");
    man.outputs.push_back(fo.name + ".pfld.json");
  }

  man.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text_file(in_dir("manifest.json"), man.to_json().dump(2) + "\n");

  if (result_out) *result_out = std::move(out);
  return man;
}

}  // namespace pf
