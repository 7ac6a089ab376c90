#include "core/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "core/acceptance.hpp"
#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/runner.hpp"

namespace pf {
namespace {

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string brief_from_report(const Json& rep) {
  static const char* keys[] = {"value",         "residual", "ratio",   "max_ratio",
                               "max_deviation", "max_rel",  "n_star",  "n_min",
                               "k_used",        "lhs",      "tail_bound"};
  for (const char* k : keys)
    if (rep.contains(k)) {
      const Json& v = rep.at(k);
      if (v.is_number()) return std::string(k) + " = " + format_double(v.get<double>());
    }
  return "ok";
}

struct Step {
  std::string name;
  ExperimentConfig cfg;
};

std::vector<Step> trivial_steps() {
  std::vector<Step> steps;
  {
    Step s;
    s.name = "kolmogorov-certify-line";
    s.cfg.module = "kolmogorov";
    s.cfg.operation = "certify";
    s.cfg.set("radices", "2");
    s.cfg.set_int("lattice_depth", 8);
    s.cfg.set("field", "coordinate");
    s.cfg.set_num("alpha", 1.0);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "poly-ball-constant";
    s.cfg.module = "sde";
    s.cfg.operation = "poly-ball";
    s.cfg.set("cases", "constant");
    s.cfg.set_int("eta_dim", 2);
    s.cfg.set_int("sample_count", 4096);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "simulate-identity";
    s.cfg.module = "sde";
    s.cfg.operation = "simulate";
    s.cfg.set_int("d", 2);
    s.cfg.set_int("M", 64);
    s.cfg.set_num("h", 0.05);
    s.cfg.set_num("T", 0.25);
    s.cfg.set_int("seed", 9);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "lattice-extend";
    s.cfg.module = "kolmogorov";
    s.cfg.operation = "extend";
    s.cfg.set("radices", "4,2");
    s.cfg.set_int("lattice_depth", 6);
    s.cfg.set("field", "product");
    s.cfg.set("query", "0.5,0.5");
    steps.push_back(std::move(s));
  }
  return steps;
}

std::vector<Step> smoke_steps() {
  std::vector<Step> steps;
  {
    Step s;
    s.name = "morrey-bump";
    s.cfg.module = "morrey";
    s.cfg.set("preset", "bump");
    s.cfg.set_int("d", 2);
    s.cfg.set_int("nt", 8);
    s.cfg.set_int("nx", 24);
    s.cfg.set_num("extent", 8.0);
    s.cfg.set_num("p", 2.5);
    s.cfg.set_num("beta", 1.0);
    s.cfg.set_int("radii_per_decade", 4);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "riesz-heat-check";
    s.cfg.module = "riesz";
    s.cfg.operation = "heat-check";
    s.cfg.set("preset", "gauss");
    s.cfg.set_int("d", 2);
    s.cfg.set_int("nt", 24);
    s.cfg.set_int("nx", 24);
    s.cfg.set_num("extent", 8.0);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "adams-small-family";
    s.cfg.module = "adams";
    s.cfg.set_int("nt", 16);
    s.cfg.set_int("nx", 16);
    s.cfg.set_int("family_size", 5);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "pde-energy-heat";
    s.cfg.module = "pde-energy";
    s.cfg.set_int("d", 2);
    s.cfg.set_int("nx", 24);
    s.cfg.set_int("n", 1);
    s.cfg.set_num("T", 0.25);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "sde-chain-rule";
    s.cfg.module = "sde";
    s.cfg.operation = "chain-rule";
    s.cfg.set("coeffs", "linear:0.3,-0.2,0.1,0.2");
    s.cfg.set_int("d", 2);
    s.cfg.set_int("M", 5000);
    s.cfg.set_num("h", 0.02);
    s.cfg.set_num("T", 0.5);
    s.cfg.set("x0", "0.5,0.3");
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "kolmogorov-flow-check";
    s.cfg.module = "kolmogorov";
    s.cfg.operation = "flow-check";
    s.cfg.set_int("d", 2);
    s.cfg.set_int("lattice_depth", 3);
    s.cfg.set_int("M", 40);
    s.cfg.set_num("kappa", 4.0);
    s.cfg.set_num("gamma", 8.0);
    s.cfg.set_num("alpha", 0.25);
    steps.push_back(std::move(s));
  }
  return steps;
}

std::vector<Step> paper_singular_drift_steps() {
  std::vector<Step> steps;
  {
    Step s;
    s.name = "morrey-critical-drift";
    s.cfg.module = "morrey";
    s.cfg.set("preset", "singular-drift");
    s.cfg.set_int("d", 3);
    s.cfg.set_int("nt", 4);
    s.cfg.set_int("nx", 96);
    s.cfg.set_num("extent", 24.0);
    s.cfg.set_num("power", 1.0);
    s.cfg.set_num("p", 2.5);
    s.cfg.set_num("beta", 1.0);
    s.cfg.set("origin_only", "true");
    std::string radii;
    for (double r : geometric_ladder(1.0, 10.0, 8)) {
      if (!radii.empty()) radii += ",";
      radii += format_double(r);
    }
    s.cfg.set("radii", radii);
    s.cfg.set_num("oracle", std::pow(6.0, 0.4));
    s.cfg.set_num("band_tol", 0.05);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "pde-energy-small-drift";
    s.cfg.module = "pde-energy";
    s.cfg.set("coeffs_preset", "drift");
    s.cfg.set_num("drift_scale", 0.02);
    s.cfg.set_int("d", 2);
    s.cfg.set_int("nx", 48);
    s.cfg.set_int("n", 4);
    s.cfg.set_num("T", 0.25);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "bump-check-singular";
    s.cfg.module = "sde";
    s.cfg.operation = "bump-check";
    s.cfg.set("coeffs", "singular:0.4,1,0.25");
    s.cfg.set_int("d", 3);
    s.cfg.set("x0", "1,0,0");
    s.cfg.set("eta0", "1,0,0");
    s.cfg.set_int("M", 2000);
    s.cfg.set_num("h", 0.01);
    s.cfg.set_num("T", 0.5);
    s.cfg.set_num("eps", 0.001);
    s.cfg.set_num("tol", 0.05);
    steps.push_back(std::move(s));
  }
  {
    Step s;
    s.name = "jac-moment-singular";
    s.cfg.module = "sde";
    s.cfg.operation = "jac-moment";
    s.cfg.set("coeffs", "singular:0.3,1,0.2");
    s.cfg.set_int("d", 2);
    s.cfg.set_int("kappa", 3);
    s.cfg.set_int("nx", 16);
    s.cfg.set_num("extent", 16.0);
    s.cfg.set_int("M", 500);
    s.cfg.set_num("h", 0.02);
    steps.push_back(std::move(s));
  }
  return steps;
}

}  // namespace

Csv SuiteResult::summary() const {
  Csv csv;
  csv.header = {"step", "pass", "detail"};
  for (const SuiteStep& s : steps)
    csv.add_row({s.name, s.pass ? "1" : "0", sanitize(s.detail)});
  return csv;
}

Json SuiteResult::to_json() const {
  Json j;
  j["preset"] = preset;
  j["all_pass"] = all_pass;
  Json arr = Json::array();
  for (const SuiteStep& s : steps) {
    Json e;
    e["name"] = s.name;
    e["pass"] = s.pass;
    e["detail"] = s.detail;
    arr.push_back(std::move(e));
  }
  j["steps"] = std::move(arr);
  return j;
}

std::vector<std::string> suite_presets() {
  return {"trivial", "smoke", "paper-singular-drift", "acceptance"};
}

SuiteResult run_suite(const std::string& preset, const std::string& out_dir) {
  SuiteResult res;
  res.preset = preset;

  if (preset == "acceptance") {
    for (const CriterionResult& c : run_acceptance()) {
      res.steps.push_back(
          {std::to_string(c.id) + "-" + c.name, c.pass, c.seconds, c.detail});
      res.all_pass = res.all_pass && c.pass;
    }
  } else {
    std::vector<Step> steps;
    if (preset == "trivial")
      steps = trivial_steps();
    else if (preset == "smoke")
      steps = smoke_steps();
    else if (preset == "paper-singular-drift")
      steps = paper_singular_drift_steps();
    else
      fail(Errc::invalid_argument,
           "unknown suite preset '" + preset +
               "' (use trivial, smoke, paper-singular-drift, acceptance)");

    for (Step& s : steps) {
      auto start = std::chrono::steady_clock::now();
      SuiteStep st;
      st.name = s.name;
      try {
        RunOutput out;
        if (!out_dir.empty()) {
          s.cfg.output_dir = out_dir + "/" + s.name;
          run_to_dir(s.cfg, &out);
        } else {
          out = run_experiment(s.cfg);
        }
        st.pass = out.pass;
        st.detail = brief_from_report(out.report);
      } catch (const std::exception& e) {
        st.pass = false;
        st.detail = std::string("exception: ") + e.what();
      }
      st.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      res.steps.push_back(std::move(st));
      res.all_pass = res.all_pass && res.steps.back().pass;
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/summary.csv", res.summary().serialize());
    write_text_file(out_dir + "/suite.json", res.to_json().dump(2) + "\n");
  }
  return res;
}

}  // namespace pf
