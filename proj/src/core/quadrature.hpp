#pragma once

#include <cstdint>
#include <functional>

#include "core/grid.hpp"

namespace pf {

struct CylinderMeanDetail {
  double value = 0.0;
  double covered_measure = 0.0;  // total measure of the cells whose centers lie in C
  double boundary_mass = 0.0;    // fraction of |C| not represented by covered cells
  std::int64_t cell_count = 0;
};

/// Normalized L^p mean of |f| over the parabolic cylinder C: midpoint quadrature
/// over grid cells whose centers lie in C, normalized by the covered measure.
CylinderMeanDetail cylinder_mean_detail(const GridField& f, const ParabolicCylinder& C, double p);
double cylinder_mean(const GridField& f, const ParabolicCylinder& C, double p);

/// Integral of fn(slice value) * e^{-lambda |x|} over the spatial box at slice it.
double weighted_space_integral(const GridField& f, int it, const ExponentialWeight& w,
                               const std::function<double(double)>& fn = nullptr);

/// Space-time integral of fn(value) * e^{-lambda |x|} over slices with centers in [ta, tb].
double weighted_spacetime_integral(const GridField& f, const ExponentialWeight& w, double ta,
                                   double tb, const std::function<double(double)>& fn = nullptr);

/// L^q norm of the field magnitude over the whole grid box.
double lq_norm(const GridField& f, double q);

namespace detail {

/// Cell-index window [lo, hi) along one axis whose centers (origin + (i+1/2)h) lie
/// in [a, b) when half_open, else strictly inside (a, b); clamped to [0, n).
struct AxisRange {
  int lo, hi;
};
AxisRange centers_in(double a, double b, double origin, double h, int n, bool half_open);

/// Slices for a half-open time window [a, b): the slices whose centers fall
/// inside, or the single slice containing the midpoint when the window is
/// narrower than a slice but still overlaps the grid span.
AxisRange time_window_slices(double a, double b, double origin, double h, int n);

}  // namespace detail

}  // namespace pf
