#include "core/riesz.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/parallel.hpp"

namespace pf {

double kernel_eval(const KernelSpec& spec, int d, double s, double r) {
  require(spec.alpha > 0.0 && spec.k > 0.0, Errc::invalid_argument,
          "kernel parameters must be positive");
  if (s <= 0.0) return 0.0;
  double nu = 0.5 * (d + 2 - spec.alpha);
  return std::exp(-nu * std::log(s) - r * r / (spec.k * s));
}

namespace {

// One time-quadrature node: the time integral over each offset window is
// replaced by sum_q amp_q * prod_axes G(offset, sigma_q), which keeps every
// term separable across the spatial axes.
struct Node {
  double sigma;
  double amp;  // quadrature weight times sigma^{-nu}
};

struct AxisKernel {
  int hw = 0;
  std::vector<double> w;  // w[hw + o], o in [-hw, hw]
  double reach = 0.0;     // truncation radius actually applied
};

AxisKernel make_axis_kernel(double sigma, double k, double dx, int nx, double r_cut, double rel) {
  double ks = k * sigma;
  double reach = std::min(std::sqrt(ks * std::log(1.0 / rel)), r_cut);
  AxisKernel ker;
  ker.reach = reach;
  ker.hw = std::min(nx - 1, static_cast<int>(std::ceil(reach / dx)) + 1);
  ker.w.resize(static_cast<std::size_t>(2 * ker.hw + 1));
  for (int o = -ker.hw; o <= ker.hw; ++o)
    ker.w[static_cast<std::size_t>(o + ker.hw)] =
        gauss_cell_factor((o - 0.5) * dx, (o + 0.5) * dx, ks);
  return ker;
}

std::vector<std::int64_t> line_starts_for_axis(const SpaceTimeGrid& g, int axis) {
  std::int64_t stride = 1;
  for (int a = g.d - 1; a > axis; --a) stride *= g.nx;
  std::vector<std::int64_t> starts;
  starts.reserve(static_cast<std::size_t>(g.spatial_count() / g.nx));
  for (std::int64_t p = 0; p < g.spatial_count(); ++p)
    if ((p / stride) % g.nx == 0) starts.push_back(p);
  return starts;
}

void convolve_axis(int nx, std::int64_t stride, const std::vector<std::int64_t>& starts,
                   const double* in, double* out, const AxisKernel& ker) {
  for_chunks(static_cast<std::int64_t>(starts.size()), 128,
             [&](int, std::int64_t lb, std::int64_t le) {
               for (std::int64_t li = lb; li < le; ++li) {
                 const double* src = in + starts[static_cast<std::size_t>(li)];
                 double* dst = out + starts[static_cast<std::size_t>(li)];
                 for (int i = 0; i < nx; ++i) {
                   int olo = std::max(-ker.hw, -i);
                   int ohi = std::min(ker.hw, nx - 1 - i);
                   double acc = 0.0;
                   for (int o = olo; o <= ohi; ++o)
                     acc += ker.w[static_cast<std::size_t>(o + ker.hw)] *
                            src[static_cast<std::int64_t>(i + o) * stride];
                   dst[static_cast<std::int64_t>(i) * stride] = acc;
                 }
               }
             });
}

struct Plan {
  std::vector<std::vector<Node>> nodes;      // per time offset m
  std::vector<std::vector<AxisKernel>> ker;  // per offset, per node
  int m_max = 0;
  double r_cut = 0.0;
  double horizon = 0.0;
  double nu = 0.0;
};

Plan build_plan(const KernelSpec& spec, const SpaceTimeGrid& g, const Cutoffs& cut) {
  Plan plan;
  plan.nu = 0.5 * (g.d + 2 - spec.alpha);
  plan.horizon = cut.time_horizon > 0.0 ? cut.time_horizon : 4.0 * g.nt * g.dt;
  plan.r_cut = cut.truncation_radius > 0.0
                   ? cut.truncation_radius
                   : std::sqrt(spec.k * plan.horizon * std::log(1e10));
  plan.m_max = std::min<std::int64_t>(
      g.nt - 1, static_cast<std::int64_t>(std::floor(plan.horizon / g.dt + 1e-9)));
  int m_exact = std::max(0, cut.exact_offsets);

  for (int m = 0; m <= plan.m_max; ++m) {
    std::vector<Node> nodes;
    if (m == 0) {
      // sigma = tau^4 removes the endpoint singularity of sigma^{-nu} times
      // the d/2 power picked up by the cell-integrated Gaussian factors.
      double top = std::pow(0.5 * g.dt, 0.25);
      for (const auto& q : gauss_legendre(20, 0.0, top)) {
        double sigma = q.x * q.x * q.x * q.x;
        nodes.push_back({sigma, q.w * 4.0 * q.x * q.x * q.x * std::pow(sigma, -plan.nu)});
      }
    } else if (m <= m_exact) {
      for (const auto& q : gauss_legendre(12, (m - 0.5) * g.dt, (m + 0.5) * g.dt))
        nodes.push_back({q.x, q.w * std::pow(q.x, -plan.nu)});
    } else {
      double sigma = m * g.dt;
      nodes.push_back({sigma, g.dt * std::pow(sigma, -plan.nu)});
    }
    std::vector<AxisKernel> kers;
    kers.reserve(nodes.size());
    for (const auto& n : nodes)
      kers.push_back(make_axis_kernel(n.sigma, spec.k, g.dx, g.nx, plan.r_cut,
                                      cut.rel_threshold));
    plan.nodes.push_back(std::move(nodes));
    plan.ker.push_back(std::move(kers));
  }
  return plan;
}

double least_squares_scale(const std::vector<double>& target, const std::vector<double>& basis,
                           double* residual_rel) {
  NeumaierSum stp, sbb, stt;
  for (std::size_t i = 0; i < target.size(); ++i) {
    stp.add(target[i] * basis[i]);
    sbb.add(basis[i] * basis[i]);
    stt.add(target[i] * target[i]);
  }
  double tt = stt.value();
  double bb = sbb.value();
  if (tt == 0.0 && bb == 0.0) {
    if (residual_rel) *residual_rel = 0.0;
    return 0.0;
  }
  require(bb > 1e-24 * tt, Errc::numeric, "degenerate potential: basis field is numerically zero");
  double c = stp.value() / bb;
  if (residual_rel) {
    NeumaierSum sr;
    for (std::size_t i = 0; i < target.size(); ++i) {
      double e = target[i] - c * basis[i];
      sr.add(e * e);
    }
    *residual_rel = tt > 0.0 ? std::sqrt(sr.value() / tt) : 0.0;
  }
  return c;
}

}  // namespace

PotentialResult apply_potential(const KernelSpec& spec, const GridField& f,
                                const Cutoffs& cutoffs) {
  require(spec.alpha > 0.0 && spec.k > 0.0, Errc::invalid_argument,
          "kernel parameters must be positive");
  const SpaceTimeGrid& g = f.grid;
  f.check_finite();
  if (spec.alpha >= g.d + 2)
    std::cerr << "warning: alpha >= d+2, kernel not integrable in time at infinity; "
                 "grid truncation controls the result\n";

  Plan plan = build_plan(spec, g, cutoffs);
  PotentialResult res;
  res.field = GridField(g, f.components);
  res.truncation_radius = plan.r_cut;
  res.time_horizon = plan.horizon;

  std::vector<std::vector<std::int64_t>> starts(static_cast<std::size_t>(g.d));
  std::vector<std::int64_t> strides(static_cast<std::size_t>(g.d));
  for (int a = 0; a < g.d; ++a) {
    starts[static_cast<std::size_t>(a)] = line_starts_for_axis(g, a);
    std::int64_t s = 1;
    for (int b = g.d - 1; b > a; --b) s *= g.nx;
    strides[static_cast<std::size_t>(a)] = s;
  }

  std::int64_t nsp = g.spatial_count();
  std::vector<double> in(static_cast<std::size_t>(nsp));
  std::vector<double> buf_a(static_cast<std::size_t>(nsp)), buf_b(static_cast<std::size_t>(nsp));
  for (int comp = 0; comp < f.components; ++comp) {
    for (int it = 0; it < g.nt; ++it) {
      int mm = std::min(plan.m_max, g.nt - 1 - it);
      for (int m = 0; m <= mm; ++m) {
        int is = it + m;
        for (std::int64_t sp = 0; sp < nsp; ++sp)
          in[static_cast<std::size_t>(sp)] = f.at(is, sp, comp);
        for (std::size_t q = 0; q < plan.nodes[static_cast<std::size_t>(m)].size(); ++q) {
          const Node& node = plan.nodes[static_cast<std::size_t>(m)][q];
          const AxisKernel& ker = plan.ker[static_cast<std::size_t>(m)][q];
          const double* src = in.data();
          double* dst = buf_a.data();
          for (int a = 0; a < g.d; ++a) {
            convolve_axis(g.nx, strides[static_cast<std::size_t>(a)],
                          starts[static_cast<std::size_t>(a)], src, dst, ker);
            src = dst;
            dst = (dst == buf_a.data()) ? buf_b.data() : buf_a.data();
          }
          for (std::int64_t sp = 0; sp < nsp; ++sp)
            res.field.at(it, sp, comp) += node.amp * src[static_cast<std::size_t>(sp)];
        }
      }
    }
  }

  // Tail bound: per-axis truncation leaves at most d Gaussian half-space
  // tails per node; offsets beyond the horizon contribute their full mass.
  double fmax = 0.0;
  for (int it = 0; it < g.nt; ++it)
    for (std::int64_t sp = 0; sp < nsp; ++sp) fmax = std::max(fmax, f.magnitude(it, sp));
  NeumaierSum tail;
  for (std::size_t m = 0; m < plan.nodes.size(); ++m)
    for (std::size_t q = 0; q < plan.nodes[m].size(); ++q) {
      const Node& node = plan.nodes[m][q];
      double ks = spec.k * node.sigma;
      tail.add(node.amp * std::pow(kPi * ks, 0.5 * g.d) * g.d *
               std::erfc(plan.ker[m][q].reach / std::sqrt(ks)));
    }
  for (int m = plan.m_max + 1; m < g.nt; ++m) {
    double sigma = m * g.dt;
    tail.add(g.dt * std::pow(sigma, -plan.nu) * std::pow(kPi * spec.k * sigma, 0.5 * g.d));
  }
  res.tail_bound = fmax * tail.value();

  try {
    res.field.check_finite();
  } catch (const Error&) {
    fail(Errc::numeric, "non-finite potential value: kernel too singular for this grid; "
                        "refine dt/dx or reduce alpha");
  }
  return res;
}

HeatRepReport heat_representation_residual(const GridField& u, const Cutoffs& cutoffs) {
  const SpaceTimeGrid& g = u.grid;
  require(u.components == 1, Errc::invalid_argument, "scalar field expected");
  u.check_finite();

  // d_t u + lap u by centered differences; zero on the boundary ring, where u
  // is assumed to vanish anyway.
  GridField rhs(g, 1);
  std::int64_t nsp = g.spatial_count();
  std::vector<int> ix(static_cast<std::size_t>(g.d));
  for (int it = 1; it + 1 < g.nt; ++it) {
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      g.spatial_coords(sp, ix.data());
      bool interior = true;
      for (int a = 0; a < g.d; ++a)
        if (ix[static_cast<std::size_t>(a)] == 0 || ix[static_cast<std::size_t>(a)] == g.nx - 1)
          interior = false;
      if (!interior) continue;
      double v = (u.at(it + 1, sp) - u.at(it - 1, sp)) / (2.0 * g.dt);
      std::int64_t stride = 1;
      for (int a = g.d - 1; a >= 0; --a) {
        v += (u.at(it, sp + stride) - 2.0 * u.at(it, sp) + u.at(it, sp - stride)) / (g.dx * g.dx);
        stride *= g.nx;
      }
      rhs.at(it, sp) = v;
    }
  }

  PotentialResult pot = apply_potential({2.0, 4.0}, rhs, cutoffs);
  HeatRepReport rep;
  rep.c_reference = std::pow(4.0 * kPi, -0.5 * g.d);
  rep.c_est = least_squares_scale(u.values, pot.field.values, &rep.residual);
  rep.magnitude_gap = std::abs(std::abs(rep.c_est) - rep.c_reference) / rep.c_reference;
  return rep;
}

SemigroupReport semigroup_residual(double alpha, double beta, double k, const GridField& f,
                                   const Cutoffs& cutoffs) {
  const SpaceTimeGrid& g = f.grid;
  require(alpha > 0.0 && beta > 0.0 && k > 0.0, Errc::invalid_argument,
          "orders and spread must be positive");
  require(alpha + beta < g.d + 2, Errc::invalid_argument,
          "alpha + beta must stay below d + 2 on the test grid");
  PotentialResult inner = apply_potential({beta, k}, f, cutoffs);
  PotentialResult composed = apply_potential({alpha, k}, inner.field, cutoffs);
  PotentialResult direct = apply_potential({alpha + beta, k}, f, cutoffs);
  SemigroupReport rep;
  // Fit composed = c * direct; residual is relative to the composed field.
  NeumaierSum scd, sdd, scc;
  for (std::size_t i = 0; i < composed.field.values.size(); ++i) {
    scd.add(composed.field.values[i] * direct.field.values[i]);
    sdd.add(direct.field.values[i] * direct.field.values[i]);
    scc.add(composed.field.values[i] * composed.field.values[i]);
  }
  if (scc.value() == 0.0 && sdd.value() == 0.0) return rep;
  require(sdd.value() > 1e-24 * scc.value(), Errc::numeric,
          "degenerate potential: direct field is numerically zero");
  rep.c_est = scd.value() / sdd.value();
  NeumaierSum sr;
  for (std::size_t i = 0; i < composed.field.values.size(); ++i) {
    double e = composed.field.values[i] - rep.c_est * direct.field.values[i];
    sr.add(e * e);
  }
  rep.residual = scc.value() > 0.0 ? std::sqrt(sr.value() / scc.value()) : 0.0;
  return rep;
}

DerivDomReport derivative_domination_report(int n, double alpha, double k,
                                            const std::vector<GridField>& family,
                                            const Cutoffs& cutoffs, double eps_den_rel) {
  require(n == 1 || n == 2, Errc::invalid_argument, "derivative order must be 1 or 2");
  require(alpha > n, Errc::invalid_argument, "alpha must exceed the derivative order");
  require(!family.empty(), Errc::invalid_argument, "empty test family");

  DerivDomReport rep;
  bool any_nonzero = false;
  for (const GridField& f : family) {
    const SpaceTimeGrid& g = f.grid;
    require(f.components == 1, Errc::invalid_argument, "scalar fields expected");
    std::int64_t nsp = g.spatial_count();

    GridField absf(g, 1);
    double fmax = 0.0;
    for (int it = 0; it < g.nt; ++it)
      for (std::int64_t sp = 0; sp < nsp; ++sp) {
        absf.at(it, sp) = std::abs(f.at(it, sp));
        fmax = std::max(fmax, absf.at(it, sp));
      }
    std::int64_t interior_pts = 0;
    std::vector<int> ix(static_cast<std::size_t>(g.d));
    if (fmax == 0.0) {
      rep.total += g.point_count();
      rep.excluded += g.point_count();
      continue;
    }
    any_nonzero = true;

    PotentialResult num = apply_potential({alpha, k}, f, cutoffs);
    PotentialResult den2k = apply_potential({alpha - n, 2.0 * k}, absf, cutoffs);
    PotentialResult denk = apply_potential({alpha - n, k}, absf, cutoffs);

    double den_floor = 0.0;
    for (double v : den2k.field.values) den_floor = std::max(den_floor, v);
    den_floor *= eps_den_rel;
    double den_floor_k = 0.0;
    for (double v : denk.field.values) den_floor_k = std::max(den_floor_k, v);
    den_floor_k *= eps_den_rel;

    std::int64_t stride_of[8];
    {
      std::int64_t s = 1;
      for (int a = g.d - 1; a >= 0; --a) {
        stride_of[a] = s;
        s *= g.nx;
      }
    }
    for (int it = 0; it < g.nt; ++it) {
      for (std::int64_t sp = 0; sp < nsp; ++sp) {
        g.spatial_coords(sp, ix.data());
        bool interior = true;
        for (int a = 0; a < g.d; ++a)
          if (ix[static_cast<std::size_t>(a)] < n || ix[static_cast<std::size_t>(a)] > g.nx - 1 - n)
            interior = false;
        ++rep.total;
        if (!interior) {
          ++rep.excluded;
          continue;
        }
        ++interior_pts;
        double deriv2 = 0.0;
        if (n == 1) {
          for (int a = 0; a < g.d; ++a) {
            double dv = (num.field.at(it, sp + stride_of[a]) - num.field.at(it, sp - stride_of[a])) /
                        (2.0 * g.dx);
            deriv2 += dv * dv;
          }
        } else {
          for (int a = 0; a < g.d; ++a) {
            double daa = (num.field.at(it, sp + stride_of[a]) - 2.0 * num.field.at(it, sp) +
                          num.field.at(it, sp - stride_of[a])) /
                         (g.dx * g.dx);
            deriv2 += daa * daa;
            for (int b = a + 1; b < g.d; ++b) {
              double dab = (num.field.at(it, sp + stride_of[a] + stride_of[b]) -
                            num.field.at(it, sp + stride_of[a] - stride_of[b]) -
                            num.field.at(it, sp - stride_of[a] + stride_of[b]) +
                            num.field.at(it, sp - stride_of[a] - stride_of[b])) /
                           (4.0 * g.dx * g.dx);
              deriv2 += 2.0 * dab * dab;
            }
          }
        }
        double dnum = std::sqrt(deriv2);
        double d2 = den2k.field.at(it, sp);
        double d1 = denk.field.at(it, sp);
        bool used = false;
        if (d2 >= den_floor && d2 > 0.0) {
          rep.n_est = std::max(rep.n_est, dnum / d2);
          used = true;
        }
        if (d1 >= den_floor_k && d1 > 0.0) rep.n_est_same_k = std::max(rep.n_est_same_k, dnum / d1);
        if (!used) ++rep.excluded;
      }
    }
    (void)interior_pts;
  }
  if (!any_nonzero) {
    rep.all_excluded = true;
    return rep;
  }
  require(rep.excluded < rep.total, Errc::numeric, "all points excluded");
  return rep;
}

}  // namespace pf
