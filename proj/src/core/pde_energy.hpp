#pragma once

#include <cstdint>

#include "core/grid.hpp"

namespace pf {

/// Coefficients of Lu = d_t u + (1/2) D_i(a^{ij} D_j u + afrak^i u) + b^i D_i u.
/// a has d*d components per point (row-major, symmetric), afrak and b have d.
/// Eigenvalues of a must lie in [delta, 1/delta].
struct DivFormCoefficients {
  GridField a;
  GridField afrak;
  GridField b;
  double delta = 1.0;
};

/// Constant a = scale * I, afrak = b = 0 on a single-slice copy of g.
DivFormCoefficients make_constant_coefficients(const SpaceTimeGrid& g, double a_scale);

/// Symmetry at every point; eigenvalue bounds by a Gershgorin pre-check with
/// exact eigen-solves at the points the pre-check cannot clear.
void validate_coefficients(const DivFormCoefficients& c, const SpaceTimeGrid& target);

struct SolveReport {
  GridField u;             // slice j holds u(j * dt); last slice is the terminal value
  double residual_linf = 0.0;   // max |L_h u| over steps
  double boundary_max = 0.0;    // max |u| on the outermost spatial cells (validity certificate)
  std::int64_t iterations = 0;  // accumulated linear-solver iterations
};

/// Backward implicit Euler from u(T) = terminal down to t = 0 with
/// homogeneous Dirichlet outside the box. The divergence part is assembled
/// from face fluxes (discrete integration by parts is exact), b D u is
/// upwinded toward +b. Enforces dt <= dx^2 / delta.
SolveReport solve_backward(const DivFormCoefficients& coeffs, const GridField& terminal, double T,
                           int steps);

/// Relative defect of <S_div u, v> + sum_faces F(u) (v_above - v_below)/dx on
/// single-slice fields (Dirichlet ghosts at zero), where S_div is the face-flux
/// divergence part of the implicit step operator. The conservative scatter
/// cancels every face exactly, so the defect is pure roundoff.
double ibp_pairing_defect(const DivFormCoefficients& coeffs, const GridField& u,
                          const GridField& v);

/// True for n in {1, 4, 6, 8, ...}.
bool admissible_order(int n);

struct EnergyReport {
  double lhs_terminalless = 0.0;  // integral |u(0)|^{2n} e^{-lambda|x|} dx
  double lhs_gradient = 0.0;      // integral u^{2n-2} |Du|^2 e^{-lambda|x|} dx dt
  double rhs = 0.0;               // e^{2 lambda rho0 + alpha T} integral |f|^{2n} e^{-lambda|x|}
  double ratio_terminalless = 0.0;  // lhs / unweighted terminal integral
  double ratio_gradient = 0.0;
  double alpha = 0.0;   // N_config * rho0^{-2} e^{2 lambda rho0}
  double n_min = 0.0;   // least N_config for which both inequalities hold
  bool pass_terminalless = false;
  bool pass_gradient = false;
  int n = 1;
  double lambda = 0.0;
  double rho0 = 1.0;
  double T = 1.0;
  double n_config = 0.0;
};

/// Weighted energy estimate for a solve_backward solution u with terminal
/// value f. allow_any_n lifts the {1, 4, 6, 8, ...} admissibility set.
EnergyReport energy_report(const GridField& u, const GridField& f, int n, double lambda,
                           double rho0, double T, double n_config, bool allow_any_n = false);

struct PolynomialWeightReport {
  double lhs = 0.0;         // integral (1+|x|)^s |u(0)|^{2n} dx
  double rhs = 0.0;         // integral (1+|x|)^s |f|^{2n} dx
  double n_measured = 0.0;  // lhs / rhs
  double band_low = 0.0;    // measured constants of the auxiliary equivalence
  double band_high = 0.0;   //   integral (1+|y|)^s e^{-|x-y|} dy  ~  (1+|x|)^s
};

PolynomialWeightReport polynomial_weight_report(const GridField& u, const GridField& f, double s,
                                                int n, bool allow_any_n = false);

struct UniformDriftReport {
  double lhs = 0.0;              // integral u(0)^{2n} e^{-lambda|x|} dx
  double rhs_base = 0.0;         // integral f^{2n} e^{-lambda|x|} dx
  double sup_sq_integral = 0.0;  // integral over t of sup_x (|afrak| + |b|)^2
  double c_measured = 0.0;       // least C with lhs <= exp(C * integral) * rhs_base
  double bound_with_c = 0.0;     // exp(c_config * integral) * rhs_base
  bool holds = false;
};

/// Gronwall-regime report: drift enters only through the time integral of its
/// squared sup norm.
UniformDriftReport uniform_drift_energy_report(const GridField& u, const GridField& f, int n,
                                               double lambda, const DivFormCoefficients& coeffs,
                                               double c_config = 1.0, bool allow_any_n = false);

}  // namespace pf
