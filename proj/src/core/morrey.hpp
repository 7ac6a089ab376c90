#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/grid.hpp"
#include "core/quadrature.hpp"

namespace pf {

struct MorreyParams {
  double p = 2.5;                  // integrability exponent, > 1
  std::optional<double> rho;       // radius cap (capped norm)
  std::optional<double> beta;      // scaling power (homogeneous norm)
};

struct ScanSpec {
  int center_stride = 2;                            // spatial sublattice stride, in cells
  int time_stride = 0;                              // 0: reuse center_stride
  std::vector<double> radii;                        // radius ladder; empty: grid default
  std::vector<ParabolicCylinder> explicit_cylinders;  // overrides the lattice scan
};

struct MorreyReport {
  double value = 0.0;
  ParabolicCylinder argmax;
  int radius_count = 0;
  int center_stride = 0;
  double boundary_mass = 0.0;       // at the attaining cylinder
  bool p_in_theorem_range = true;   // p in (2, 2+d]
  bool vanishing_regime = false;    // homogeneous norm with p*beta > d+2
};

/// Default geometric ladder for a grid: [2dx, half spatial extent], 8 radii/decade.
std::vector<double> default_radii(const SpaceTimeGrid& g, double r_max = 0.0,
                                  int per_decade = 8);

/// Capped norm: sup over r <= rho and scanned cylinders of r * L^p cylinder mean.
MorreyReport morrey_capped(const GridField& f, const MorreyParams& params, const ScanSpec& scan);

/// Homogeneous norm: sup over scanned cylinders of r^beta * L^p cylinder mean.
MorreyReport morrey_homogeneous(const GridField& f, const MorreyParams& params,
                                const ScanSpec& scan);

struct IndicatorCheckResult {
  bool holds = false;
  double masked_norm = 0.0;     // homogeneous norm of the cylinder-masked field
  double capped_budget = 0.0;   // capped norm of the full field
  double indicator_norm = 0.0;  // homogeneous norm of the plain indicator
  double rho0 = 0.0;
  double slack = 0.0;           // min relative slack across both inequalities
};

/// Checks the two cylinder-indicator bounds: masked-field norm <= capped norm and
/// indicator norm <= rho0, both up to 5% quadrature tolerance.
IndicatorCheckResult indicator_morrey_check(const GridField& b, const ParabolicCylinder& C,
                                            double rho0, double p0, const ScanSpec& scan);

struct DriftSplitNorms {
  double morrey_part = 0.0;            // capped norm of the singular part
  double bounded_time_integral = 0.0;  // integral of sup_x |b_B(t, x)|^2 dt
  MorreyReport morrey_report;
};

/// Hypothesis quantities for a drift split b = b_M + b_B.
DriftSplitNorms drift_split_norms(const GridField& b_m, const GridField& b_b, double p0,
                                  double rho, const ScanSpec& scan);

}  // namespace pf
