#pragma once

#include <cstdint>
#include <vector>

#include "core/grid.hpp"

namespace pf {

/// Kernel p(s, r) = s^{-(d+2-alpha)/2} e^{-r^2/(k s)} for s > 0, else 0.
struct KernelSpec {
  double alpha = 2.0;
  double k = 4.0;
};

double kernel_eval(const KernelSpec& spec, int d, double s, double r);

/// Truncation controls for the potential quadrature. Zeros mean automatic:
/// horizon 4x the field's time span, radius where exp(-r^2/(k*horizon))
/// drops below 1e-10.
struct Cutoffs {
  double time_horizon = 0.0;
  double truncation_radius = 0.0;
  double rel_threshold = 1e-12;  // per-axis kernel tail cut, relative
  int exact_offsets = 3;         // time offsets resolved by quadrature; beyond: midpoint
};

struct PotentialResult {
  GridField field;
  double truncation_radius = 0.0;
  double time_horizon = 0.0;
  double tail_bound = 0.0;
};

/// Pf(t,x) = integral over s > t and y of p(s-t, |y-x|) f(s,y); future-time
/// convolution against piecewise-constant cell values, singular first cell
/// integrated in time by substituted quadrature.
PotentialResult apply_potential(const KernelSpec& spec, const GridField& f,
                                const Cutoffs& cutoffs = {});

struct HeatRepReport {
  double c_est = 0.0;       // least-squares scalar in u = c * P(du/dt + lap u)
  double residual = 0.0;    // relative L2 residual at c_est
  double c_reference = 0.0; // (4 pi)^{-d/2}
  double magnitude_gap = 0.0;  // | |c_est| - c_reference | / c_reference
};

/// Fits u = c * P_{2,4}(d_t u + lap u) over the grid; u must vanish near all
/// grid boundaries. Derivatives are centered differences.
HeatRepReport heat_representation_residual(const GridField& u, const Cutoffs& cutoffs = {});

struct SemigroupReport {
  double c_est = 0.0;
  double residual = 0.0;
};

/// Fits P_a(P_b f) = c * P_{a+b} f in least squares over the grid.
SemigroupReport semigroup_residual(double alpha, double beta, double k, const GridField& f,
                                   const Cutoffs& cutoffs = {});

struct DerivDomReport {
  double n_est = 0.0;         // against P_{alpha-n, 2k}|f| (spread doubled)
  double n_est_same_k = 0.0;  // against P_{alpha-n, k}|f|
  std::int64_t excluded = 0;
  std::int64_t total = 0;
  bool all_excluded = false;
};

/// max over the family and interior points of |D^n P f| / P_{alpha-n,2k}|f|,
/// n in {1, 2}; points with denominator below eps_den_rel * max are excluded
/// and counted. Both spread readings are reported.
DerivDomReport derivative_domination_report(int n, double alpha, double k,
                                            const std::vector<GridField>& family,
                                            const Cutoffs& cutoffs = {},
                                            double eps_den_rel = 1e-8);

}  // namespace pf
