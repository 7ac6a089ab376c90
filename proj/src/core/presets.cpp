#include "core/presets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "core/error.hpp"

namespace pf {

namespace {

double radius2(const double* x, int d) {
  double r2 = 0.0;
  for (int i = 0; i < d; ++i) r2 += x[i] * x[i];
  return r2;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const char* begin = item.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    require(end != begin, Errc::invalid_argument, "expected a number in '" + text + "'");
    out.push_back(v);
  }
  return out;
}

SpaceTimeGrid preset_grid(int d, int nt, int nx, double extent, double t_span) {
  if (t_span <= 0.0) t_span = 1.0;
  return SpaceTimeGrid::centered(d, nt, nx, 0.0, t_span / nt, 0.5 * extent);
}

}  // namespace

double bump_profile(double s) {
  double s2 = s * s;
  if (s2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s2));
}

GridField make_bump_field(int d, int nt, int nx, double extent, double radius, double t_span) {
  if (t_span <= 0.0) t_span = 1.0;
  if (radius <= 0.0) radius = 0.35 * extent;
  SpaceTimeGrid g = preset_grid(d, nt, nx, extent, t_span);
  double tc = 0.5 * t_span, tr = 0.35 * t_span;
  return GridField::from_function(g, 1, [&](double t, const double* x, double* out) {
    double s = nt == 1 ? 0.0 : (t - tc) / tr;
    out[0] = bump_profile(std::sqrt(radius2(x, d)) / radius) * (nt == 1 ? 1.0 : bump_profile(s));
  });
}

GridField make_gaussian_field(int d, int nt, int nx, double extent, double width, double t_span) {
  if (t_span <= 0.0) t_span = 1.0;
  SpaceTimeGrid g = preset_grid(d, nt, nx, extent, t_span);
  double tc = 0.5 * t_span, tr = 0.35 * t_span;
  return GridField::from_function(g, 1, [&](double t, const double* x, double* out) {
    double s = nt == 1 ? 0.0 : (t - tc) / tr;
    out[0] = std::exp(-radius2(x, d) / (width * width)) * (nt == 1 ? 1.0 : bump_profile(s));
  });
}

GridField make_radial_power_field(int d, int nt, int nx, double extent, double power,
                                  double p_sample, double scale, double dt) {
  require(power * p_sample < d, Errc::invalid_argument,
          "power * p must stay below d so the singularity is integrable");
  if (dt <= 0.0) dt = 0.5;
  SpaceTimeGrid g = SpaceTimeGrid::centered(d, nt, nx, 0.0, dt, 0.5 * extent);
  GridField::Sampling s;
  s.mode = GridField::Sampling::Mode::lp_cell_mean;
  s.p = p_sample;
  s.time_constant = true;
  return GridField::from_function(
      g, 1,
      [&](double, const double* x, double* out) {
        // Clamp the singular point itself so quadrature nodes at the origin
        // stay finite; the clamped region carries negligible mass.
        double r = std::max(std::sqrt(radius2(x, d)), 1e-10);
        out[0] = scale * std::pow(r, -power);
      },
      s);
}

GridField make_mollified_power_field(int d, int nt, int nx, double extent, double power,
                                     double eps, double scale, double dt) {
  require(eps > 0.0, Errc::invalid_argument, "mollification scale must be positive");
  if (dt <= 0.0) dt = 0.5;
  SpaceTimeGrid g = SpaceTimeGrid::centered(d, nt, nx, 0.0, dt, 0.5 * extent);
  GridField::Sampling s;
  s.time_constant = true;
  return GridField::from_function(
      g, 1,
      [&](double, const double* x, double* out) {
        out[0] = scale * std::pow(radius2(x, d) + eps * eps, -0.5 * power);
      },
      s);
}

SdeCoefficients parse_sde_coefficients(const std::string& text, int d) {
  std::string name = text, args;
  std::size_t colon = text.find(':');
  if (colon != std::string::npos) {
    name = text.substr(0, colon);
    args = text.substr(colon + 1);
  }
  if (name == "identity") return identity_coefficients(d);
  if (name == "linear") {
    std::vector<double> a = parse_doubles(args);
    require(static_cast<int>(a.size()) == d * d, Errc::invalid_argument,
            "linear drift needs d*d matrix entries");
    return linear_drift_coefficients(d, std::move(a));
  }
  if (name == "singular") {
    std::vector<double> a = parse_doubles(args);
    require(a.size() == 2 || a.size() == 3, Errc::invalid_argument,
            "singular drift needs 'c,p0' or 'c,p0,eps'");
    return singular_drift_coefficients(d, a[0], a[1], a.size() == 3 ? a[2] : 0.0);
  }
  fail(Errc::invalid_argument,
       "unknown coefficient preset '" + name +
           "' (use identity, linear:..., singular:c,p0[,eps])");
}

GridField pack_div_coefficients(const DivFormCoefficients& c) {
  const SpaceTimeGrid& g = c.a.grid;
  int d = g.d;
  GridField packed(g, d * d + 2 * d);
  std::int64_t nsp = g.spatial_count();
  for (int it = 0; it < g.nt; ++it)
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      for (int k = 0; k < d * d; ++k) packed.at(it, sp, k) = c.a.at(it, sp, k);
      for (int k = 0; k < d; ++k) packed.at(it, sp, d * d + k) = c.afrak.at(it, sp, k);
      for (int k = 0; k < d; ++k) packed.at(it, sp, d * d + d + k) = c.b.at(it, sp, k);
    }
  return packed;
}

DivFormCoefficients unpack_div_coefficients(const GridField& packed, double delta) {
  const SpaceTimeGrid& g = packed.grid;
  int d = g.d;
  require(packed.components == d * d + 2 * d, Errc::invalid_argument,
          "packed coefficients must have d*d + 2d components");
  DivFormCoefficients c;
  c.a = GridField(g, d * d);
  c.afrak = GridField(g, d);
  c.b = GridField(g, d);
  c.delta = delta;
  std::int64_t nsp = g.spatial_count();
  for (int it = 0; it < g.nt; ++it)
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      for (int k = 0; k < d * d; ++k) c.a.at(it, sp, k) = packed.at(it, sp, k);
      for (int k = 0; k < d; ++k) c.afrak.at(it, sp, k) = packed.at(it, sp, d * d + k);
      for (int k = 0; k < d; ++k) c.b.at(it, sp, k) = packed.at(it, sp, d * d + d + k);
    }
  return c;
}

DivFormCoefficients make_drift_coefficients(const SpaceTimeGrid& g, double drift_scale,
                                            double eps_mol) {
  require(eps_mol > 0.0, Errc::invalid_argument, "mollification scale must be positive");
  DivFormCoefficients c = make_constant_coefficients(g, 1.0);
  std::int64_t nsp = c.b.grid.spatial_count();
  std::vector<double> x(static_cast<std::size_t>(g.d));
  for (std::int64_t sp = 0; sp < nsp; ++sp) {
    c.b.grid.cell_center(sp, x.data());
    double r2 = radius2(x.data(), g.d) + eps_mol * eps_mol;
    for (int i = 0; i < g.d; ++i)
      c.b.at(0, sp, i) = drift_scale * x[static_cast<std::size_t>(i)] / r2;
  }
  return c;
}

SmoothFn smooth_fn_preset(const std::string& name, int d) {
  SmoothFn f;
  if (name == "quadratic") {
    f.value = [d](const double* x) { return radius2(x, d); };
    f.grad = [d](const double* x, double* g) {
      for (int i = 0; i < d; ++i) g[i] = 2.0 * x[i];
    };
  } else if (name == "gauss") {
    f.value = [d](const double* x) { return std::exp(-radius2(x, d)); };
    f.grad = [d](const double* x, double* g) {
      double v = std::exp(-radius2(x, d));
      for (int i = 0; i < d; ++i) g[i] = -2.0 * x[i] * v;
    };
  } else if (name == "linear") {
    f.value = [d](const double* x) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += x[i];
      return s;
    };
    f.grad = [d](const double*, double* g) {
      for (int i = 0; i < d; ++i) g[i] = 1.0;
    };
  } else if (name == "coord") {
    f.value = [](const double* x) { return x[0]; };
    f.grad = [d](const double*, double* g) {
      for (int i = 0; i < d; ++i) g[i] = 0.0;
      g[0] = 1.0;
    };
  } else {
    fail(Errc::invalid_argument,
         "unknown observable '" + name + "' (use quadratic, gauss, linear, coord)");
  }
  return f;
}

DirectionalPolynomial directional_poly_preset(const std::string& name, int eta_dim) {
  DirectionalPolynomial p;
  p.eta_dim = eta_dim;
  std::string base = name, args;
  std::size_t colon = name.find(':');
  if (colon != std::string::npos) {
    base = name.substr(0, colon);
    args = name.substr(colon + 1);
  }
  DirectionalPolynomial::Term term;
  term.powers.assign(static_cast<std::size_t>(eta_dim), 0);
  if (base == "eta1-squared") {
    term.powers[0] = 2;
    p.terms.push_back(term);
  } else if (base == "eta-sum") {
    for (int i = 0; i < eta_dim; ++i) {
      DirectionalPolynomial::Term t;
      t.powers.assign(static_cast<std::size_t>(eta_dim), 0);
      t.powers[static_cast<std::size_t>(i)] = 1;
      p.terms.push_back(t);
    }
  } else if (base == "constant") {
    term.constant = args.empty() ? 1.0 : parse_doubles(args).at(0);
    p.terms.push_back(term);
  } else {
    fail(Errc::invalid_argument,
         "unknown eta polynomial '" + name + "' (use eta1-squared, eta-sum, constant:c)");
  }
  return p;
}

}  // namespace pf
