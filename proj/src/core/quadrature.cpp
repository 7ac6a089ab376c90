#include "core/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/math_util.hpp"

namespace pf {

namespace detail {

AxisRange centers_in(double a, double b, double origin, double h, int n, bool half_open) {
  // smallest i with origin + (i+0.5)h > a  (or >= a when half_open)
  double ia = (a - origin) / h - 0.5;
  double ib = (b - origin) / h - 0.5;
  int lo = half_open ? static_cast<int>(std::ceil(ia - 1e-9))
                     : static_cast<int>(std::floor(ia + 1e-9)) + 1;
  int hi = half_open ? static_cast<int>(std::ceil(ib - 1e-9))
                     : static_cast<int>(std::floor(ib - 1e-9)) + 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, n);
  return {lo, hi};
}

AxisRange time_window_slices(double a, double b, double origin, double h, int n) {
  AxisRange tr = centers_in(a, b, origin, h, n, /*half_open=*/true);
  if (tr.lo < tr.hi) return tr;
  // A window narrower than one slice still overlaps the grid span; represent
  // it by the slice containing its midpoint so small-r^2 cylinders stay
  // well defined (for time-constant fields the choice is immaterial).
  if (b <= origin || a >= origin + n * h) return tr;
  double mid = 0.5 * (a + b);
  int m = static_cast<int>(std::floor((mid - origin) / h));
  m = std::max(0, std::min(m, n - 1));
  return {m, m + 1};
}

}  // namespace detail

using detail::AxisRange;
using detail::centers_in;

CylinderMeanDetail cylinder_mean_detail(const GridField& f, const ParabolicCylinder& C,
                                        double p) {
  require(p >= 1.0, Errc::invalid_argument, "invalid exponent");
  const SpaceTimeGrid& g = f.grid;
  require(C.x.size() == static_cast<std::size_t>(g.d), Errc::invalid_argument,
          "cylinder center dimension mismatch");

  AxisRange tr = detail::time_window_slices(C.t, C.t + C.r * C.r, g.t0, g.dt, g.nt);

  // Per-axis candidate windows for |x - c| < r; exact membership tested per cell.
  std::vector<AxisRange> xr(static_cast<std::size_t>(g.d));
  for (int a = 0; a < g.d; ++a) {
    xr[static_cast<std::size_t>(a)] =
        centers_in(C.x[static_cast<std::size_t>(a)] - C.r, C.x[static_cast<std::size_t>(a)] + C.r,
                   g.x0[static_cast<std::size_t>(a)], g.dx, g.nx, /*half_open=*/false);
  }

  NeumaierSum sum;
  std::int64_t spatial_cells = 0;
  if (tr.lo < tr.hi) {
    // Enumerate the spatial bounding box once; reuse membership for every slice.
    std::vector<std::int64_t> members;
    std::vector<int> ix(static_cast<std::size_t>(g.d));
    for (int a = 0; a < g.d; ++a) ix[static_cast<std::size_t>(a)] = xr[static_cast<std::size_t>(a)].lo;
    bool any_axis_empty = false;
    for (int a = 0; a < g.d; ++a)
      if (xr[static_cast<std::size_t>(a)].lo >= xr[static_cast<std::size_t>(a)].hi) any_axis_empty = true;
    if (!any_axis_empty) {
      for (;;) {
        double d2 = 0.0;
        for (int a = 0; a < g.d; ++a) {
          double dxa = g.xc(a, ix[static_cast<std::size_t>(a)]) - C.x[static_cast<std::size_t>(a)];
          d2 += dxa * dxa;
        }
        if (d2 < C.r * C.r) members.push_back(g.spatial_index(ix.data()));
        int a = g.d - 1;
        for (;;) {
          if (++ix[static_cast<std::size_t>(a)] < xr[static_cast<std::size_t>(a)].hi) break;
          ix[static_cast<std::size_t>(a)] = xr[static_cast<std::size_t>(a)].lo;
          if (--a < 0) break;
        }
        if (a < 0) break;
      }
    }
    spatial_cells = static_cast<std::int64_t>(members.size());
    for (int it = tr.lo; it < tr.hi; ++it)
      for (std::int64_t sp : members) sum.add(std::pow(f.magnitude(it, sp), p));
  }

  std::int64_t covered = static_cast<std::int64_t>(tr.hi - tr.lo) * spatial_cells;
  require(covered > 0, Errc::invalid_argument, "cylinder outside domain");

  CylinderMeanDetail out;
  out.cell_count = covered;
  out.covered_measure = static_cast<double>(covered) * g.dt * g.cell_volume();
  out.value = std::pow(sum.value() / static_cast<double>(covered), 1.0 / p);
  double full = C.measure(g.d);
  out.boundary_mass = std::max(0.0, 1.0 - out.covered_measure / full);
  return out;
}

double cylinder_mean(const GridField& f, const ParabolicCylinder& C, double p) {
  return cylinder_mean_detail(f, C, p).value;
}

double weighted_space_integral(const GridField& f, int it, const ExponentialWeight& w,
                               const std::function<double(double)>& fn) {
  const SpaceTimeGrid& g = f.grid;
  require(it >= 0 && it < g.nt, Errc::invalid_argument, "slice index out of range");
  NeumaierSum sum;
  std::vector<double> x(static_cast<std::size_t>(g.d));
  std::int64_t nsp = g.spatial_count();
  for (std::int64_t sp = 0; sp < nsp; ++sp) {
    g.cell_center(sp, x.data());
    double v = f.at(it, sp, 0);
    if (fn) v = fn(v);
    require(std::isfinite(v), Errc::numeric, "non-finite integrand value");
    sum.add(v * w(x.data(), g.d));
  }
  return sum.value() * g.cell_volume();
}

double weighted_spacetime_integral(const GridField& f, const ExponentialWeight& w, double ta,
                                   double tb, const std::function<double(double)>& fn) {
  const SpaceTimeGrid& g = f.grid;
  require(tb > ta, Errc::invalid_argument, "empty time window");
  require(ta >= g.t0 - 1e-12 && tb <= g.t_end() + 1e-12, Errc::invalid_argument,
          "time window outside grid range");
  NeumaierSum sum;
  int slices = 0;
  for (int it = 0; it < g.nt; ++it) {
    double tc = g.tc(it);
    if (tc < ta || tc > tb) continue;
    ++slices;
    sum.add(weighted_space_integral(f, it, w, fn));
  }
  require(slices > 0, Errc::invalid_argument, "empty time window");
  return sum.value() * g.dt;
}

double lq_norm(const GridField& f, double q) {
  require(q >= 1.0, Errc::invalid_argument, "invalid exponent");
  const SpaceTimeGrid& g = f.grid;
  NeumaierSum sum;
  std::int64_t nsp = g.spatial_count();
  for (int it = 0; it < g.nt; ++it)
    for (std::int64_t sp = 0; sp < nsp; ++sp) sum.add(std::pow(f.magnitude(it, sp), q));
  return std::pow(sum.value() * g.dt * g.cell_volume(), 1.0 / q);
}

}  // namespace pf
