// parflow command line front end. Talks to the library exclusively through
// the C API so it exercises the same surface other language bindings would.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "parflow/parflow.h"

namespace {

struct Binding {
  CLI::Option* opt;
  std::string key;
  const std::string* value;  // flags bind "1"
};

struct Leaf {
  CLI::App* cmd;
  std::string module;
  std::string operation;
};

std::deque<std::string> g_storage;
std::vector<Binding> g_bindings;

void bind_opt(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& desc) {
  g_storage.emplace_back();
  std::string& slot = g_storage.back();
  g_bindings.push_back({cmd->add_option(flag, slot, desc), key, &slot});
}

void bind_flag(CLI::App* cmd, const std::string& flag, const std::string& key,
               const std::string& desc) {
  g_storage.emplace_back("1");
  g_bindings.push_back({cmd->add_flag(flag, desc), key, &g_storage.back()});
}

void grid_opts(CLI::App* c, bool with_time) {
  bind_opt(c, "--d", "d", "spatial dimension");
  bind_opt(c, "--nx", "nx", "spatial cells per axis");
  bind_opt(c, "--extent", "extent", "spatial box edge length (centered at 0)");
  if (with_time) {
    bind_opt(c, "--nt", "nt", "time slices");
    bind_opt(c, "--t-span", "t_span", "time interval length");
    bind_opt(c, "--dt", "dt", "time step of generated fields");
  }
}

void field_opts(CLI::App* c) {
  bind_opt(c, "--field", "field", "input field container (.pfld)");
  bind_opt(c, "--preset", "preset", "generated field preset (bump, gauss, singular-drift)");
  bind_opt(c, "--width", "width", "gauss preset width");
  bind_opt(c, "--radius", "radius", "bump preset radius");
  bind_opt(c, "--power", "power", "singular-drift preset: |x|^-power");
  bind_opt(c, "--scale", "scale", "singular-drift preset amplitude");
}

[[noreturn]] void die(int code, const std::string& msg) {
  std::fprintf(stderr, "parflow: %s\n", msg.c_str());
  std::exit(code);
}

void check(parflow_status st) {
  if (st == PARFLOW_OK) return;
  die(st == PARFLOW_ERR_INVALID_ARGUMENT ? 2 : 1, parflow_last_error());
}

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

int run_leaf(const Leaf& leaf, const std::string& config_file,
             const std::vector<std::string>& sets, const std::string& out_arg,
             bool quiet) {
  // --out may name a directory or, as a convenience, a *.json report path;
  // artifacts then land next to that report.
  std::string out_dir = out_arg, report_path;
  if (ends_with(out_arg, ".json")) {
    report_path = out_arg;
    auto slash = out_arg.find_last_of('/');
    out_dir = slash == std::string::npos ? "." : out_arg.substr(0, slash);
  }

  parflow_config* cfg = parflow_config_create();
  if (!cfg) die(1, "out of memory");
  if (!config_file.empty()) check(parflow_config_load(cfg, config_file.c_str()));
  check(parflow_config_set(cfg, "module", leaf.module.c_str()));
  if (!leaf.operation.empty())
    check(parflow_config_set(cfg, "operation", leaf.operation.c_str()));
  for (const Binding& b : g_bindings)
    if (b.opt->count() > 0) check(parflow_config_set(cfg, b.key.c_str(), b.value->c_str()));
  for (const std::string& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) die(2, "--set expects key=value, got '" + kv + "'");
    check(parflow_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (!out_dir.empty()) check(parflow_config_set(cfg, "output_dir", out_dir.c_str()));

  char* report = nullptr;
  int pass = 0;
  parflow_status st = parflow_run(cfg, &report, &pass);
  parflow_config_free(cfg);
  check(st);
  if (report) {
    std::fputs(report, stdout);
    if (!report_path.empty() && !ends_with(report_path, "/report.json")) {
      std::FILE* f = std::fopen(report_path.c_str(), "wb");
      if (!f) die(1, "cannot write " + report_path);
      std::fputs(report, f);
      std::fclose(f);
    }
    parflow_string_free(report);
  }
  if (!quiet) {
    const char* dir = out_dir.empty() ? "out" : out_dir.c_str();
    std::fprintf(stderr, "parflow %s%s%s: %s (artifacts in %s/)\n", leaf.module.c_str(),
                 leaf.operation.empty() ? "" : " ", leaf.operation.c_str(),
                 pass ? "PASS" : "FAIL", dir);
  }
  return pass ? 0 : 1;
}

int run_suite_cmd(const std::string& preset, const std::string& out_dir, bool list) {
  if (list) {
    char* csv = nullptr;
    check(parflow_suite_presets(&csv));
    std::string s = csv ? csv : "";
    parflow_string_free(csv);
    for (auto& ch : s)
      if (ch == ',') ch = '\n';
    std::printf("%s\n", s.c_str());
    return 0;
  }
  char* summary = nullptr;
  int all_pass = 0;
  parflow_status st = parflow_suite(preset.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                                    &summary, &all_pass);
  if (st != PARFLOW_OK) check(st);
  int passed = 0, total = 0;
  if (summary) {
    auto j = nlohmann::json::parse(summary, nullptr, false);
    parflow_string_free(summary);
    if (!j.is_discarded() && j.contains("steps")) {
      for (const auto& step : j["steps"]) {
        bool p = step.value("pass", false);
        ++total;
        passed += p ? 1 : 0;
        std::printf("[%s] %s — %s\n", p ? "PASS" : "FAIL",
                    step.value("name", std::string("?")).c_str(),
                    step.value("detail", std::string("")).c_str());
      }
    }
  }
  std::printf("suite %s: %s (%d/%d)\n", preset.c_str(), all_pass ? "PASS" : "FAIL", passed,
              total);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parabolic Morrey / Riesz / SDE-flow experiment driver"};
  // --h is a real flag (Euler step size), so help gets no short name anywhere.
  app.set_help_flag("--help", "print help");
  app.set_version_flag("--version", std::string(parflow_version()));
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_file, out_dir;
  std::vector<std::string> sets;
  int threads = 0;
  bool quiet = false;
  app.add_option("--config", config_file, "config file (key=value text, or .json)");
  app.add_option("--set", sets, "override a config key (key=value, repeatable)");
  app.add_option("--out", out_dir, "output directory for report/tables/plots");
  app.add_option("--threads", threads, "cap worker threads (default: PARFLOW_THREADS or cores)");
  app.add_flag("--quiet", quiet, "suppress the status line on stderr");

  std::vector<Leaf> leaves;
  auto module_cmd = [&](const std::string& name, const std::string& desc,
                        const std::vector<std::pair<std::string, std::string>>& ops) {
    CLI::App* m = app.add_subcommand(name, desc);
    m->set_help_flag("--help", "print help");
    m->fallthrough();
    if (ops.empty()) {
      leaves.push_back({m, name, ""});
      return std::vector<CLI::App*>{m};
    }
    m->require_subcommand(1);
    std::vector<CLI::App*> subs;
    for (const auto& [op, od] : ops) {
      CLI::App* s = m->add_subcommand(op, od);
      s->set_help_flag("--help", "print help");
      s->fallthrough();
      leaves.push_back({s, name, op});
      subs.push_back(s);
    }
    return subs;
  };

  // morrey ------------------------------------------------------------------
  auto mor = module_cmd("morrey", "parabolic cylinder-mean norms of a drift field", {})[0];
  field_opts(mor);
  grid_opts(mor, true);
  bind_opt(mor, "--p", "p", "integrability exponent p");
  bind_opt(mor, "--rho", "rho", "radius cap (capped norm)");
  bind_opt(mor, "--beta", "beta", "radius weight exponent (homogeneous norm)");
  bind_opt(mor, "--radii", "radii", "explicit radii, comma separated");
  bind_opt(mor, "--r-max", "r_max", "largest scanned radius");
  bind_opt(mor, "--radii-per-decade", "radii_per_decade", "radius resolution of the scan");
  bind_opt(mor, "--stride", "stride", "center stride in cells");
  bind_opt(mor, "--time-stride", "time_stride", "center stride in time slices");
  bind_flag(mor, "--origin-only", "origin_only", "scan only cylinders centered at x=0");
  bind_opt(mor, "--band-tol", "band_tol", "relative band for radius-independence check");
  bind_opt(mor, "--oracle", "oracle", "expected r*mean value to compare against");
  bind_opt(mor, "--time-horizon", "time_horizon", "restrict cylinders to [t0, t0+horizon)");
  bind_opt(mor, "--cutoff-radius", "truncation_radius", "ignore cylinders beyond this radius");
  bind_opt(mor, "--rel-threshold", "rel_threshold", "drop cylinders with tiny covered mass");
  bind_opt(mor, "--exact-offsets", "exact_offsets", "cells resolved exactly near the center");

  // riesz -------------------------------------------------------------------
  auto riesz = module_cmd("riesz", "parabolic Riesz-type potential of a space-time field",
                          {{"apply", "convolve a field with the kernel"},
                           {"heat-check", "heat-kernel representation residual and c estimate"},
                           {"semigroup", "composition vs. added smoothing orders"},
                           {"deriv-dom", "n-th time derivative domination check"}});
  for (CLI::App* c : riesz) {
    field_opts(c);
    grid_opts(c, true);
    bind_opt(c, "--alpha", "alpha", "smoothing order");
    bind_opt(c, "--k", "k", "kernel decay constant");
    bind_opt(c, "--cutoff", "truncation_radius", "kernel truncation radius (0: from rel threshold)");
    bind_opt(c, "--time-horizon", "time_horizon", "kernel time horizon (0: whole grid span)");
    bind_opt(c, "--rel-threshold", "rel_threshold", "relative kernel mass kept outside the cutoff");
    bind_opt(c, "--exact-offsets", "exact_offsets", "time offsets integrated exactly");
  }
  bind_opt(riesz[1], "--residual-tol", "residual_tol", "max relative L2 residual");
  bind_opt(riesz[1], "--c-gap-tol", "c_gap_tol", "max relative gap of the c estimate");
  bind_opt(riesz[2], "--alpha2", "alpha2", "second smoothing order");
  bind_opt(riesz[2], "--residual-tol", "residual_tol", "max relative L2 residual");
  bind_opt(riesz[3], "--n", "n", "time-derivative order");
  bind_opt(riesz[3], "--family-size", "family_size", "number of random test fields");
  bind_opt(riesz[3], "--seed", "seed", "RNG seed for the test family");

  // adams -------------------------------------------------------------------
  auto adams = module_cmd("adams", "trace-inequality ratio over a random field family", {})[0];
  grid_opts(adams, true);
  bind_opt(adams, "--p", "p", "Morrey exponent p");
  bind_opt(adams, "--q", "q", "Lebesgue exponent q of the density");
  bind_opt(adams, "--alpha", "alpha", "potential smoothing order");
  bind_opt(adams, "--k", "k", "kernel decay constant");
  bind_opt(adams, "--family-size", "family_size", "number of random cases");
  bind_opt(adams, "--seed", "seed", "RNG seed of the family");
  bind_flag(adams, "--dual", "dual", "test the dual (q', then p-norm) form");

  // pde-energy --------------------------------------------------------------
  auto pde = module_cmd("pde-energy", "backward FV solve with weighted energy bound", {})[0];
  grid_opts(pde, false);
  bind_opt(pde, "--terminal", "terminal", "terminal condition container (.pfld)");
  bind_opt(pde, "--terminal-preset", "terminal_preset", "generated terminal field (bump, gauss)");
  bind_opt(pde, "--radius", "radius", "bump terminal radius");
  bind_opt(pde, "--width", "width", "gauss terminal width");
  bind_opt(pde, "--coeffs", "coeffs", "coefficient container (.pfld)");
  bind_opt(pde, "--coeffs-preset", "coeffs_preset", "generated coefficients (heat, drift)");
  bind_opt(pde, "--delta", "delta", "ellipticity lower bound of loaded coefficients");
  bind_opt(pde, "--a-scale", "a_scale", "diffusion scale of the heat preset");
  bind_opt(pde, "--drift-scale", "drift_scale", "drift amplitude of the drift preset");
  bind_opt(pde, "--eps-mol", "eps_mol", "mollification width of the drift preset");
  bind_opt(pde, "--n", "n", "power 2n of the energy");
  bind_opt(pde, "--lambda", "lambda", "zero-order weight in the bound");
  bind_opt(pde, "--rho0", "rho0", "weight floor");
  bind_opt(pde, "--T", "T", "time horizon");
  bind_opt(pde, "--steps", "steps", "backward Euler steps");
  bind_opt(pde, "--n-config", "n_config", "candidate N for the two-sided bound");
  bind_flag(pde, "--allow-any-n", "allow_any_n", "search the minimal admissible N");
  bind_opt(pde, "--heat-ratio-tol", "heat_ratio_tol", "pass bound on lhs / integral f^2n");

  // sde ---------------------------------------------------------------------
  auto sde = module_cmd(
      "sde", "stochastic flow with directional derivative process",
      {{"simulate", "run an ensemble and persist paths"},
       {"bump-check", "flow derivative vs. finite coefficient bump"},
       {"chain-rule", "pathwise derivative of f(X) vs. direct difference"},
       {"generator", "generator consistency of the augmented process"},
       {"weighted-sup", "weighted running supremum moments"},
       {"jac-moment", "Jacobian-weighted moment identity"},
       {"poly-ball", "polynomial moments over the unit ball"}});
  for (CLI::App* c : sde) {
    bind_opt(c, "--coeffs", "coeffs",
             "coefficient preset (identity, linear, bump, singular, ...)");
    bind_opt(c, "--d", "d", "state dimension");
    bind_opt(c, "--h", "h", "Euler step size");
    bind_opt(c, "--M", "M", "ensemble size");
    bind_opt(c, "--T", "T", "time horizon");
    bind_opt(c, "--seed", "seed", "RNG seed");
    bind_opt(c, "--t0", "t0", "start time");
    bind_opt(c, "--x0", "x0", "start point, comma separated");
    bind_opt(c, "--eta0", "eta0", "initial direction, comma separated");
    bind_opt(c, "--guard", "guard", "blow-up exclusion threshold");
  }
  bind_flag(sde[0], "--jacobian", "jacobian", "also evolve the full Jacobian");
  bind_opt(sde[1], "--eps", "eps", "coefficient bump size");
  bind_opt(sde[1], "--tol", "tol", "pass bound on the max deviation");
  bind_opt(sde[2], "--observable", "observable", "smooth f (quadratic, gauss-bump, ...)");
  bind_opt(sde[2], "--eps-x", "eps_x", "spatial offset of the compared start point");
  bind_opt(sde[2], "--half-width-factor", "half_width_factor", "MC half-width multiplier");
  bind_opt(sde[3], "--functional", "functional", "directional polynomial preset");
  bind_opt(sde[3], "--dt-fd", "dt_fd", "finite-difference step in t");
  bind_opt(sde[3], "--dx-fd", "dx_fd", "finite-difference step in x");
  bind_opt(sde[3], "--de-fd", "de_fd", "finite-difference step in eta");
  bind_opt(sde[3], "--rel-tol", "rel_tol", "pass bound on the relative defect");
  bind_opt(sde[3], "--center-count", "center_count", "number of probe centers");
  bind_opt(sde[3], "--t-center", "t_center", "probe time");
  bind_opt(sde[4], "--functional", "functional", "directional polynomial preset");
  bind_opt(sde[4], "--n", "n", "moment power 2n");
  bind_opt(sde[4], "--lambda", "lambda", "zero-order weight");
  bind_opt(sde[4], "--rho0", "rho0", "weight floor");
  bind_opt(sde[4], "--eta-points", "eta_points", "directions sampled per start point");
  bind_opt(sde[4], "--nx", "nx", "start-point grid cells per axis");
  bind_opt(sde[4], "--extent", "extent", "start-point box edge length");
  bind_opt(sde[5], "--kappa", "kappa", "moment order");
  bind_opt(sde[5], "--t", "t", "evaluation time");
  bind_flag(sde[5], "--operator-norm", "operator_norm", "weight by Jacobian operator norm");
  bind_opt(sde[5], "--nx", "nx", "start-point grid cells per axis");
  bind_opt(sde[5], "--extent", "extent", "start-point box edge length");
  bind_opt(sde[6], "--eta-dim", "eta_dim", "direction-block dimension");
  bind_opt(sde[6], "--sample-count", "sample_count", "quasi-MC samples per case");
  bind_opt(sde[6], "--cases", "cases", "case preset (disk-moment, constant, family)");
  bind_opt(sde[6], "--count", "count", "family size for the family preset");

  // kolmogorov ----------------------------------------------------------------
  auto kol = module_cmd("kolmogorov", "lattice continuity certificates",
                        {{"certify", "dyadic-increment certificate for a lattice field"},
                         {"extend", "evaluate the certified extension at query points"},
                         {"flow-check", "increment scaling of a simulated flow"}});
  for (CLI::App* c : {kol[0], kol[1]}) {
    bind_opt(c, "--radices", "radices", "lattice radices, comma separated");
    bind_opt(c, "--lattice-depth", "lattice_depth", "refinement depth");
    bind_opt(c, "--field", "field", "lattice field preset (zero, coordinate, time, ...)");
    bind_opt(c, "--axis", "axis", "axis of the coordinate preset");
  }
  bind_opt(kol[0], "--alpha", "alpha", "target increment exponent");
  bind_opt(kol[0], "--seed", "seed", "seed for the measured-N subsample");
  bind_opt(kol[1], "--query", "query", "query point, comma separated");
  bind_opt(kol[2], "--d", "d", "state dimension");
  bind_opt(kol[2], "--coeffs", "coeffs", "coefficient preset of the flow");
  bind_opt(kol[2], "--lattice-depth", "lattice_depth", "spatial dyadic depth");
  bind_opt(kol[2], "--M", "M", "ensemble size");
  bind_opt(kol[2], "--seed", "seed", "RNG seed");
  bind_opt(kol[2], "--pair-seed", "pair_seed", "seed of the sampled pair set");
  bind_opt(kol[2], "--kappa", "kappa", "moment order");
  bind_opt(kol[2], "--alpha", "alpha", "claimed spatial exponent");
  bind_opt(kol[2], "--gamma", "gamma", "claimed moment scaling");
  bind_opt(kol[2], "--K", "K", "moment constant (0: fit from data)");
  bind_opt(kol[2], "--time-scale", "time_scale", "time horizon of the flow");
  bind_opt(kol[2], "--box-lo", "box_lo", "lattice box lower corner");
  bind_opt(kol[2], "--box-scale", "box_scale", "lattice box edge length");

  // suite / field-info --------------------------------------------------------
  CLI::App* suite = app.add_subcommand("suite", "run a named experiment battery");
  suite->fallthrough();
  std::string preset;
  bool list_presets = false;
  suite->add_option("preset", preset, "battery name (see --list)");
  suite->add_flag("--list", list_presets, "list available presets");

  CLI::App* finfo = app.add_subcommand("field-info", "describe a .pfld container");
  std::string finfo_path;
  finfo->add_option("path", finfo_path, "container path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (threads > 0) parflow_set_thread_cap(threads);

  if (suite->parsed()) {
    if (!list_presets && preset.empty())
      die(2, "suite needs a preset name (or --list); presets: trivial, smoke, "
             "paper-singular-drift, acceptance");
    return run_suite_cmd(preset, out_dir, list_presets);
  }
  if (finfo->parsed()) {
    char* info = nullptr;
    check(parflow_field_info(finfo_path.c_str(), &info));
    if (info) {
      std::fputs(info, stdout);
      parflow_string_free(info);
    }
    return 0;
  }
  for (const Leaf& leaf : leaves)
    if (leaf.cmd->parsed()) return run_leaf(leaf, config_file, sets, out_dir, quiet);
  die(2, "no subcommand given");
}
