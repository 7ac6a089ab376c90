#pragma once

#include <string>

#include "core/grid.hpp"
#include "core/pde_energy.hpp"
#include "core/sde_flow.hpp"

namespace pf {

/// Smooth compactly supported profile exp(1 - 1/(1 - s^2)) for |s| < 1, else 0.
double bump_profile(double s);

/// Separable space-time bump: radial spatial bump of the given radius
/// (default 0.35 * extent) times a time bump over the middle of the span.
/// Vanishes near every grid boundary. Spatial box is [-extent/2, extent/2]^d,
/// time box [0, t_span) (default 1).
GridField make_bump_field(int d, int nt, int nx, double extent, double radius = 0.0,
                          double t_span = 0.0);

/// Gaussian exp(-|x|^2 / width^2) times the same time bump.
GridField make_gaussian_field(int d, int nt, int nx, double extent, double width = 1.0,
                              double t_span = 0.0);

/// Time-constant radial field scale * |x|^{-power} on [-extent/2, extent/2]^d,
/// sampled by cellwise L^p means so the integrable singularity carries its
/// exact cell mass. dt defaults to 0.5.
GridField make_radial_power_field(int d, int nt, int nx, double extent, double power,
                                  double p_sample, double scale = 1.0, double dt = 0.0);

/// Point-sampled mollified profile scale * (|x|^2 + eps^2)^{-power/2}.
GridField make_mollified_power_field(int d, int nt, int nx, double extent, double power,
                                     double eps, double scale = 1.0, double dt = 0.0);

/// Flow coefficient presets: "identity", "linear:a11,a12,...,ann" (row-major),
/// "singular:c,p0[,eps]" for c x (|x|^2 + eps^2)^{-(p0+1)/2}.
SdeCoefficients parse_sde_coefficients(const std::string& text, int d);

/// Single-slice packing [a | afrak | b] with d*d + d + d components.
GridField pack_div_coefficients(const DivFormCoefficients& c);
DivFormCoefficients unpack_div_coefficients(const GridField& packed, double delta);

/// a = I and b = drift_scale * x / (|x|^2 + eps_mol^2) on g's spatial box.
DivFormCoefficients make_drift_coefficients(const SpaceTimeGrid& g, double drift_scale,
                                            double eps_mol);

/// Observables with analytic gradients: "quadratic" (|x|^2), "gauss"
/// (exp(-|x|^2)), "linear" (sum x_i), "coord" (x_1).
SmoothFn smooth_fn_preset(const std::string& name, int d);

/// Directional-polynomial presets for the eta functionals: "eta1-squared"
/// ((eta_1)^2), "eta-sum" (sum eta_i), "constant:c".
DirectionalPolynomial directional_poly_preset(const std::string& name, int eta_dim);

}  // namespace pf
