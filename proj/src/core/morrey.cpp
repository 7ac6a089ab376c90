#include "core/morrey.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/parallel.hpp"

namespace pf {

namespace {

using detail::AxisRange;
using detail::centers_in;
using detail::time_window_slices;

// Prefix sums of |f|^p: per slice an inclusive x-prefix along the last axis,
// then cumulative over slices, so any (slice range) x (row interval) sum is O(1).
class CylinderSumAccel {
 public:
  CylinderSumAccel(const GridField& f, double p) : g_(f.grid) {
    nrows_ = g_.spatial_count() / g_.nx;
    row_len_ = g_.nx + 1;
    std::size_t per_slice = static_cast<std::size_t>(nrows_) * row_len_;
    ct_.assign(static_cast<std::size_t>(g_.nt + 1) * per_slice, 0.0);
    for (int it = 0; it < g_.nt; ++it) {
      const double* prev = ct_.data() + static_cast<std::size_t>(it) * per_slice;
      double* cur = ct_.data() + static_cast<std::size_t>(it + 1) * per_slice;
      for (std::int64_t row = 0; row < nrows_; ++row) {
        std::size_t base = static_cast<std::size_t>(row) * row_len_;
        double acc = 0.0;
        cur[base] = prev[base];
        for (int i = 0; i < g_.nx; ++i) {
          acc += std::pow(f.magnitude(it, row * g_.nx + i), p);
          cur[base + static_cast<std::size_t>(i) + 1] = prev[base + static_cast<std::size_t>(i) + 1] + acc;
        }
      }
    }
  }

  // Mean^p numerator and cell count for [t, t+r^2) x B_r(x).
  void query(const ParabolicCylinder& c, double& sum, std::int64_t& count) const {
    sum = 0.0;
    count = 0;
    AxisRange tr = time_window_slices(c.t, c.t + c.r * c.r, g_.t0, g_.dt, g_.nt);
    if (tr.lo >= tr.hi) return;
    std::size_t per_slice = static_cast<std::size_t>(nrows_) * row_len_;
    const double* lo_sl = ct_.data() + static_cast<std::size_t>(tr.lo) * per_slice;
    const double* hi_sl = ct_.data() + static_cast<std::size_t>(tr.hi) * per_slice;

    int d = g_.d;
    std::vector<AxisRange> win(static_cast<std::size_t>(d - 1));
    for (int a = 0; a < d - 1; ++a)
      win[static_cast<std::size_t>(a)] =
          centers_in(c.x[static_cast<std::size_t>(a)] - c.r, c.x[static_cast<std::size_t>(a)] + c.r,
                     g_.x0[static_cast<std::size_t>(a)], g_.dx, g_.nx, false);
    std::vector<int> ix(static_cast<std::size_t>(d - 1));
    for (int a = 0; a < d - 1; ++a) {
      if (win[static_cast<std::size_t>(a)].lo >= win[static_cast<std::size_t>(a)].hi) return;
      ix[static_cast<std::size_t>(a)] = win[static_cast<std::size_t>(a)].lo;
    }
    double r2 = c.r * c.r;
    int slices = tr.hi - tr.lo;
    for (;;) {
      double off2 = 0.0;
      std::int64_t row = 0;
      for (int a = 0; a < d - 1; ++a) {
        double off = g_.xc(a, ix[static_cast<std::size_t>(a)]) - c.x[static_cast<std::size_t>(a)];
        off2 += off * off;
        row = row * g_.nx + ix[static_cast<std::size_t>(a)];
      }
      double rem = r2 - off2;
      if (rem > 0.0) {
        double hw = std::sqrt(rem);
        double cx = c.x[static_cast<std::size_t>(d - 1)];
        AxisRange xr = centers_in(cx - hw, cx + hw, g_.x0[static_cast<std::size_t>(d - 1)], g_.dx,
                                  g_.nx, false);
        if (xr.lo < xr.hi) {
          std::size_t base = static_cast<std::size_t>(row) * row_len_;
          sum += (hi_sl[base + static_cast<std::size_t>(xr.hi)] - hi_sl[base + static_cast<std::size_t>(xr.lo)]) -
                 (lo_sl[base + static_cast<std::size_t>(xr.hi)] - lo_sl[base + static_cast<std::size_t>(xr.lo)]);
          count += static_cast<std::int64_t>(xr.hi - xr.lo) * slices;
        }
      }
      if (d == 1) break;
      int a = d - 2;
      for (;;) {
        if (++ix[static_cast<std::size_t>(a)] < win[static_cast<std::size_t>(a)].hi) break;
        ix[static_cast<std::size_t>(a)] = win[static_cast<std::size_t>(a)].lo;
        if (--a < 0) break;
      }
      if (a < 0) break;
    }
  }

 private:
  SpaceTimeGrid g_;
  std::int64_t nrows_;
  std::size_t row_len_;
  std::vector<double> ct_;
};

struct ScanBest {
  double value = -1.0;
  ParabolicCylinder cyl;
};

MorreyReport scan_norm(const GridField& f, double p, double weight_pow, double radius_cap,
                       const ScanSpec& scan, bool homogeneous) {
  require(p > 1.0, Errc::invalid_argument, "invalid exponent");
  const SpaceTimeGrid& g = f.grid;
  MorreyReport rep;
  rep.p_in_theorem_range = p > 2.0 && p <= 2.0 + g.d;
  rep.center_stride = scan.center_stride;

  auto weight = [&](double r) { return std::pow(r, weight_pow); };

  ScanBest best;
  if (!scan.explicit_cylinders.empty()) {
    rep.radius_count = static_cast<int>(scan.explicit_cylinders.size());
    for (const auto& c : scan.explicit_cylinders) {
      require(c.r >= 2.0 * g.dx, Errc::invalid_argument, "radius under-resolved");
      if (radius_cap > 0.0)
        require(c.r <= radius_cap * (1.0 + 1e-12), Errc::invalid_argument,
                "radius exceeds the cap");
      double v = weight(c.r) * cylinder_mean(f, c, p);
      if (v > best.value) best = {v, c};
    }
  } else {
    std::vector<double> radii = scan.radii;
    if (radii.empty()) radii = default_radii(g, radius_cap);
    require(!radii.empty(), Errc::invalid_argument, "empty radius list");
    for (double r : radii) {
      require(r > 0.0, Errc::invalid_argument, "empty radius list");
      require(r >= 2.0 * g.dx, Errc::invalid_argument, "radius under-resolved");
      if (radius_cap > 0.0)
        require(r <= radius_cap * (1.0 + 1e-12), Errc::invalid_argument, "radius exceeds the cap");
    }
    rep.radius_count = static_cast<int>(radii.size());

    int stride = std::max(1, scan.center_stride);
    int tstride = scan.time_stride > 0 ? scan.time_stride : stride;
    CylinderSumAccel accel(f, p);

    // Candidate spatial centers on the sub-lattice, flattened once.
    std::vector<std::int64_t> centers;
    {
      std::vector<int> ix(static_cast<std::size_t>(g.d), 0);
      for (;;) {
        centers.push_back(g.spatial_index(ix.data()));
        int a = g.d - 1;
        for (;;) {
          ix[static_cast<std::size_t>(a)] += stride;
          if (ix[static_cast<std::size_t>(a)] < g.nx) break;
          ix[static_cast<std::size_t>(a)] = 0;
          if (--a < 0) break;
        }
        if (a < 0) break;
      }
    }

    std::vector<ScanBest> partial(64);
    for_chunks(static_cast<std::int64_t>(centers.size()), 64,
               [&](int chunk, std::int64_t cb, std::int64_t ce) {
                 ScanBest local;
                 std::vector<double> cx(static_cast<std::size_t>(g.d));
                 for (std::int64_t ci = cb; ci < ce; ++ci) {
                   g.cell_center(centers[static_cast<std::size_t>(ci)], cx.data());
                   for (double r : radii) {
                     for (int jt = 0; jt < g.nt; jt += tstride) {
                       ParabolicCylinder c(g.t0 + jt * g.dt, cx, r);
                       double sum;
                       std::int64_t count;
                       accel.query(c, sum, count);
                       if (count == 0) continue;
                       double v = weight(r) * std::pow(sum / static_cast<double>(count), 1.0 / p);
                       if (v > local.value) local = {v, c};
                     }
                   }
                 }
                 partial[static_cast<std::size_t>(chunk)] = local;
               });
    for (const auto& pb : partial)
      if (pb.value > best.value) best = pb;
  }

  require(best.value >= 0.0, Errc::invalid_argument, "cylinder outside domain");
  rep.value = best.value;
  rep.argmax = best.cyl;
  rep.boundary_mass = cylinder_mean_detail(f, best.cyl, p).boundary_mass;
  if (homogeneous && p * weight_pow > g.d + 2.0) rep.vanishing_regime = true;
  return rep;
}

}  // namespace

std::vector<double> default_radii(const SpaceTimeGrid& g, double r_max, int per_decade) {
  double half_extent = 0.5 * g.nx * g.dx;
  double hi = r_max > 0.0 ? std::min(r_max, half_extent) : half_extent;
  double lo = 2.0 * g.dx;
  if (hi < lo) hi = lo;
  return geometric_ladder(lo, hi, per_decade);
}

MorreyReport morrey_capped(const GridField& f, const MorreyParams& params, const ScanSpec& scan) {
  require(params.rho.has_value() && *params.rho > 0.0, Errc::invalid_argument,
          "capped norm requires a positive radius cap");
  return scan_norm(f, params.p, 1.0, *params.rho, scan, false);
}

MorreyReport morrey_homogeneous(const GridField& f, const MorreyParams& params,
                                const ScanSpec& scan) {
  require(params.beta.has_value() && *params.beta > 0.0, Errc::invalid_argument,
          "homogeneous norm requires a positive scaling power");
  return scan_norm(f, params.p, *params.beta, 0.0, scan, true);
}

IndicatorCheckResult indicator_morrey_check(const GridField& b, const ParabolicCylinder& C,
                                            double rho0, double p0, const ScanSpec& scan) {
  const SpaceTimeGrid& g = b.grid;
  require(rho0 > 0.0, Errc::invalid_argument, "rho0 must be positive");
  require(C.r <= rho0 * (1.0 + 1e-12), Errc::invalid_argument,
          "cylinder radius exceeds rho0");
  require(C.r >= 2.0 * g.dx, Errc::invalid_argument, "radius under-resolved");

  // Mask the field by cell-center membership in C.
  GridField masked(g, b.components);
  GridField indicator(g, 1);
  AxisRange tr = detail::time_window_slices(C.t, C.t + C.r * C.r, g.t0, g.dt, g.nt);
  std::int64_t nsp = g.spatial_count();
  std::vector<double> x(static_cast<std::size_t>(g.d));
  std::int64_t inside_count = 0;
  for (std::int64_t sp = 0; sp < nsp; ++sp) {
    g.cell_center(sp, x.data());
    double d2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
      double off = x[static_cast<std::size_t>(a)] - C.x[static_cast<std::size_t>(a)];
      d2 += off * off;
    }
    if (d2 >= C.r * C.r) continue;
    ++inside_count;
    for (int it = tr.lo; it < tr.hi; ++it) {
      indicator.at(it, sp) = 1.0;
      for (int c = 0; c < b.components; ++c) masked.at(it, sp, c) = b.at(it, sp, c);
    }
  }
  require(inside_count > 0 && tr.lo < tr.hi, Errc::invalid_argument, "cylinder outside domain");

  MorreyParams hom{p0, std::nullopt, 1.0};
  MorreyParams cap{p0, rho0, std::nullopt};
  IndicatorCheckResult res;
  res.rho0 = rho0;
  res.masked_norm = morrey_homogeneous(masked, hom, scan).value;
  res.capped_budget = morrey_capped(b, cap, scan).value;
  res.indicator_norm = morrey_homogeneous(indicator, hom, scan).value;
  const double tol = 1.05;  // 5% quadrature tolerance on both inequalities
  bool first = res.masked_norm <= res.capped_budget * tol;
  bool second = res.indicator_norm <= rho0 * tol;
  res.holds = first && second;
  double s1 = res.capped_budget > 0.0 ? 1.0 - res.masked_norm / (res.capped_budget * tol) : 1.0;
  double s2 = 1.0 - res.indicator_norm / (rho0 * tol);
  res.slack = std::min(s1, s2);
  return res;
}

DriftSplitNorms drift_split_norms(const GridField& b_m, const GridField& b_b, double p0,
                                  double rho, const ScanSpec& scan) {
  require(b_m.grid == b_b.grid, Errc::invalid_argument, "grid mismatch");
  DriftSplitNorms out;
  MorreyParams cap{p0, rho, std::nullopt};
  out.morrey_report = morrey_capped(b_m, cap, scan);
  out.morrey_part = out.morrey_report.value;
  NeumaierSum sum;
  std::int64_t nsp = b_b.grid.spatial_count();
  for (int it = 0; it < b_b.grid.nt; ++it) {
    double peak = 0.0;
    for (std::int64_t sp = 0; sp < nsp; ++sp) peak = std::max(peak, b_b.magnitude(it, sp));
    sum.add(peak * peak);
  }
  out.bounded_time_integral = sum.value() * b_b.grid.dt;
  return out;
}

}  // namespace pf
