#include "core/adams.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/morrey.hpp"
#include "core/quadrature.hpp"
#include "core/rng.hpp"

namespace pf {

namespace {

void check_case(const AdamsCase& c) {
  require(c.b.grid == c.f.grid, Errc::invalid_argument, "b and f must share a grid");
  require(c.b.components == 1 && c.f.components == 1, Errc::invalid_argument,
          "scalar fields expected");
  require(c.q > 1.0 && c.q < c.p, Errc::invalid_argument, "exponents must satisfy 1 < q < p");
  for (double v : c.b.values) require(v >= 0.0, Errc::invalid_argument, "b must be nonnegative");
  for (double v : c.f.values) require(v >= 0.0, Errc::invalid_argument, "f must be nonnegative");
}

// Share of the q-mass of |f| within 10% of any box face, time included; the
// reference norms live on the whole space, so this flags cases whose mass the
// box visibly clips.
double boundary_mass_share(const GridField& f, double q) {
  const SpaceTimeGrid& g = f.grid;
  int ring_x = std::max(1, g.nx / 10);
  int ring_t = std::max(1, g.nt / 10);
  NeumaierSum all, ring;
  std::vector<int> ix(static_cast<std::size_t>(g.d));
  std::int64_t nsp = g.spatial_count();
  for (int it = 0; it < g.nt; ++it) {
    bool t_edge = it < ring_t || it >= g.nt - ring_t;
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      double v = std::pow(f.magnitude(it, sp), q);
      all.add(v);
      bool edge = t_edge;
      if (!edge) {
        g.spatial_coords(sp, ix.data());
        for (int a = 0; a < g.d; ++a)
          if (ix[static_cast<std::size_t>(a)] < ring_x ||
              ix[static_cast<std::size_t>(a)] >= g.nx - ring_x)
            edge = true;
      }
      if (edge) ring.add(v);
    }
  }
  return all.value() > 0.0 ? ring.value() / all.value() : 0.0;
}

GridField pointwise_product(const GridField& a, const GridField& b) {
  GridField out(a.grid, 1);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
  return out;
}

double morrey_b_norm(const GridField& b, double p, double beta) {
  MorreyParams mp{p, std::nullopt, beta};
  return morrey_homogeneous(b, mp, ScanSpec{}).value;
}

}  // namespace

double adams_ratio(const AdamsCase& c, RatioReport* detail) {
  check_case(c);
  GridField pf = apply_potential(c.spec, c.f).field;
  GridField prod = pointwise_product(c.b, pf);
  double num = lq_norm(prod, c.q);
  double lqf = lq_norm(c.f, c.q);
  double mb = morrey_b_norm(c.b, c.p, c.spec.alpha);
  require(mb > 0.0 && lqf > 0.0, Errc::invalid_argument, "degenerate case");
  double ratio = num / (mb * lqf);
  if (detail) {
    detail->ratio = ratio;
    detail->numerator = num;
    detail->morrey_b = mb;
    detail->lq_f = lqf;
    detail->boundary_mass = boundary_mass_share(prod, c.q);
  }
  return ratio;
}

double dual_adams_ratio(const AdamsCase& c, RatioReport* detail) {
  check_case(c);
  double qp = c.q / (c.q - 1.0);
  GridField pbf = apply_potential(c.spec, pointwise_product(c.b, c.f)).field;
  double num = lq_norm(pbf, qp);
  double lqf = lq_norm(c.f, qp);
  double mb = morrey_b_norm(c.b, c.p, c.spec.alpha);
  require(mb > 0.0 && lqf > 0.0, Errc::invalid_argument, "degenerate case");
  double ratio = num / (mb * lqf);
  if (detail) {
    detail->ratio = ratio;
    detail->numerator = num;
    detail->morrey_b = mb;
    detail->lq_f = lqf;
    detail->boundary_mass = boundary_mass_share(pbf, qp);
  }
  return ratio;
}

GridField heat_extension(const GridField& f, double T, int nt, double dt) {
  const SpaceTimeGrid& gs = f.grid;
  require(f.components == 1, Errc::invalid_argument, "scalar field expected");
  require(gs.nt == 1, Errc::invalid_argument, "terminal value must be a single-slice field");
  require(nt >= 1 && dt > 0.0, Errc::invalid_argument, "invalid extension window");
  f.check_finite();

  SpaceTimeGrid g(gs.d, nt, gs.nx, T - (nt - 0.5) * dt, dt, gs.dx, gs.x0);
  GridField u(g, 1);
  std::int64_t nsp = g.spatial_count();

  std::vector<std::int64_t> stride_of(static_cast<std::size_t>(g.d));
  {
    std::int64_t s = 1;
    for (int a = g.d - 1; a >= 0; --a) {
      stride_of[static_cast<std::size_t>(a)] = s;
      s *= g.nx;
    }
  }
  std::vector<double> buf_a(static_cast<std::size_t>(nsp)), buf_b(static_cast<std::size_t>(nsp));
  for (int it = 0; it < nt; ++it) {
    double tau = (nt - 1 - it) * dt;  // T - t at the slice center
    if (tau == 0.0) {
      for (std::int64_t sp = 0; sp < nsp; ++sp) u.at(it, sp) = f.at(0, sp);
      continue;
    }
    double ks = 4.0 * tau;
    double reach = std::sqrt(ks * std::log(1e14));
    int hw = std::min(g.nx - 1, static_cast<int>(std::ceil(reach / g.dx)) + 1);
    std::vector<double> ker(static_cast<std::size_t>(2 * hw + 1));
    for (int o = -hw; o <= hw; ++o)
      ker[static_cast<std::size_t>(o + hw)] =
          gauss_cell_factor((o - 0.5) * g.dx, (o + 0.5) * g.dx, ks) / std::sqrt(kPi * ks);
    const double* src = &f.values[0];
    double* dst = buf_a.data();
    for (int a = 0; a < g.d; ++a) {
      std::int64_t stride = stride_of[static_cast<std::size_t>(a)];
      for (std::int64_t p = 0; p < nsp; ++p) {
        std::int64_t i = (p / stride) % g.nx;
        int olo = static_cast<int>(std::max<std::int64_t>(-hw, -i));
        int ohi = static_cast<int>(std::min<std::int64_t>(hw, g.nx - 1 - i));
        double acc = 0.0;
        for (int o = olo; o <= ohi; ++o)
          acc += ker[static_cast<std::size_t>(o + hw)] * src[p + o * stride];
        dst[p] = acc;
      }
      src = dst;
      dst = (dst == buf_a.data()) ? buf_b.data() : buf_a.data();
    }
    for (std::int64_t sp = 0; sp < nsp; ++sp) u.at(it, sp) = src[sp];
  }
  return u;
}

double weighted_heat_ratio(const GridField& b, const GridField& f, double p, double T,
                           WeightedHeatReport* detail) {
  const SpaceTimeGrid& g = b.grid;
  require(p > 2.0, Errc::invalid_argument, "p must exceed 2");
  require(b.components == 1 && f.components == 1, Errc::invalid_argument,
          "scalar fields expected");
  require(f.grid.d == g.d && f.grid.nx == g.nx && f.grid.dx == g.dx, Errc::invalid_argument,
          "f must live on b's spatial grid");
  for (double v : b.values) require(v >= 0.0, Errc::invalid_argument, "b must be nonnegative");
  for (double v : f.values) require(v >= 0.0, Errc::invalid_argument, "f must be nonnegative");
  require(std::abs(g.tc(g.nt - 1) - T) < 1e-9 * std::max(1.0, std::abs(T)),
          Errc::invalid_argument, "b's grid must end at the terminal time T");

  GridField u = heat_extension(f, T, g.nt, g.dt);
  NeumaierSum num;
  std::int64_t nsp = g.spatial_count();
  for (int it = 0; it < g.nt; ++it)
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      double v = b.at(it, sp) * u.at(it, sp);
      num.add(v * v);
    }
  double weighted_energy = num.value() * g.dt * g.cell_volume();
  NeumaierSum fe;
  for (std::int64_t sp = 0; sp < nsp; ++sp) fe.add(f.at(0, sp) * f.at(0, sp));
  double f_energy = fe.value() * g.cell_volume();
  double mb = morrey_b_norm(b, p, 1.0);
  require(mb > 0.0 && f_energy > 0.0, Errc::invalid_argument, "degenerate case");
  double ratio = weighted_energy / (mb * mb * f_energy);
  if (detail) {
    detail->ratio = ratio;
    detail->weighted_energy = weighted_energy;
    detail->morrey_b = mb;
    detail->f_energy = f_energy;
  }
  return ratio;
}

std::vector<GridField> make_test_family(const SpaceTimeGrid& g, int count, std::uint64_t seed) {
  require(count >= 1, Errc::invalid_argument, "family size must be positive");
  std::vector<GridField> out;
  out.reserve(static_cast<std::size_t>(count));
  double span_t = g.nt * g.dt;
  double span_x = g.nx * g.dx;
  for (int idx = 0; idx < count; ++idx) {
    RngStream rng{seed, static_cast<std::uint64_t>(idx)};
    std::uint64_t ctr = 0;
    auto u01 = [&] { return rng.uniform(ctr++); };

    struct Term {
      int kind;  // 0 bump, 1 mollified singularity, 2 cylinder indicator
      double amp;
      double ct, wt;
      std::vector<double> cx;
      double wx;
      double r;
    };
    std::vector<Term> terms;
    int n_terms = 2 + static_cast<int>(u01() * 2.0);  // 2..3
    for (int j = 0; j < n_terms; ++j) {
      Term t;
      t.kind = static_cast<int>(u01() * 3.0);
      if (t.kind > 2) t.kind = 2;
      t.amp = 0.5 + 1.5 * u01();
      t.ct = g.t0 + (0.2 + 0.6 * u01()) * span_t;
      t.wt = (0.1 + 0.2 * u01()) * span_t;
      t.cx.resize(static_cast<std::size_t>(g.d));
      for (int a = 0; a < g.d; ++a)
        t.cx[static_cast<std::size_t>(a)] =
            g.x0[static_cast<std::size_t>(a)] + (0.25 + 0.5 * u01()) * span_x;
      t.wx = (0.08 + 0.17 * u01()) * span_x;
      t.r = (0.1 + 0.15 * u01()) * span_x;
      terms.push_back(std::move(t));
    }
    double moll = 2.0 * g.dx;
    auto fn = [&](double t, const double* x, double* out_v) {
      double v = 0.0;
      for (const Term& tm : terms) {
        double r2 = 0.0;
        for (int a = 0; a < g.d; ++a) {
          double off = x[a] - tm.cx[static_cast<std::size_t>(a)];
          r2 += off * off;
        }
        double dt_off = t - tm.ct;
        if (tm.kind == 0) {
          v += tm.amp * std::exp(-0.5 * r2 / (tm.wx * tm.wx)) *
               std::exp(-0.5 * dt_off * dt_off / (tm.wt * tm.wt));
        } else if (tm.kind == 1) {
          v += tm.amp / std::sqrt(r2 + moll * moll) *
               std::exp(-0.5 * dt_off * dt_off / (tm.wt * tm.wt));
        } else {
          if (dt_off >= 0.0 && dt_off < tm.r * tm.r && r2 < tm.r * tm.r) v += tm.amp;
        }
      }
      *out_v = v;
    };
    out.push_back(GridField::from_function(g, 1, fn));
  }
  return out;
}

RatioReport adams_family_report(const SpaceTimeGrid& g, const FamilyParams& params,
                                std::vector<FamilyCaseRow>* rows) {
  require(params.family_size >= 1, Errc::invalid_argument, "family size must be positive");
  std::vector<GridField> fields =
      make_test_family(g, 2 * params.family_size, params.seed);
  RatioReport best;
  best.family_size = params.family_size;
  for (int i = 0; i < params.family_size; ++i) {
    AdamsCase c{std::move(fields[static_cast<std::size_t>(2 * i)]),
                std::move(fields[static_cast<std::size_t>(2 * i + 1)]), params.spec, params.p,
                params.q};
    RatioReport detail;
    double ratio = params.dual ? dual_adams_ratio(c, &detail) : adams_ratio(c, &detail);
    if (rows) rows->push_back({i, ratio, detail.morrey_b, detail.lq_f});
    if (ratio > best.ratio) {
      double fs = best.family_size;
      best = detail;
      best.family_size = static_cast<int>(fs);
      best.worst_case = i;
    }
  }
  return best;
}

}  // namespace pf
