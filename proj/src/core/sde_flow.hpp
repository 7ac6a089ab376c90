#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/grid.hpp"

namespace pf {

/// Diffusion sigma (d x d1, row-major), drift b, and their spatial
/// derivatives. Null derivative callbacks fall back to centered differences
/// with step h_fd, applied per axis so the variational update stays exactly
/// linear in eta. a = sigma sigma^T must have eigenvalues in [delta, 1/delta].
struct SdeCoefficients {
  int d = 2;
  int d1 = 2;
  double delta = 1.0;
  std::function<void(double t, const double* x, double* out)> sigma;   // out[d*d1]
  std::function<void(double t, const double* x, double* out)> b;       // out[d]
  std::function<void(double t, const double* x, double* out)> dsigma;  // out[(i*d1+k)*d+j]
  std::function<void(double t, const double* x, double* out)> db;      // out[i*d+j] = D_j b_i
  double h_fd = 1e-5;
};

/// sigma = I, b = 0.
SdeCoefficients identity_coefficients(int d);
/// sigma = I, b(x) = A x for a row-major d x d matrix.
SdeCoefficients linear_drift_coefficients(int d, std::vector<double> a_matrix);
/// sigma = I, b(x) = c x (|x|^2 + eps_mol^2)^{-(p0+1)/2}: |b| = c / |x|^{p0}
/// outside the mollified core; eps_mol = 0 keeps the genuine singularity.
SdeCoefficients singular_drift_coefficients(int d, double c, double p0, double eps_mol = 0.0);

struct FlowRequest {
  double t0 = 0.0;
  std::vector<double> x0;
  std::vector<double> eta0;
  double T = 1.0;
  double h = 1e-2;
  std::int64_t M = 1000;
  std::uint64_t seed = 1;
  bool store_paths = true;
  bool jacobian = false;  // evolve d basis directions instead of eta0
  double blowup_guard = 1e8;
};

/// Paths of the coupled system x' = sigma dw + b dt,
/// eta' = sigma_(eta) dw + b_(eta) dt under one Gaussian increment stream per
/// path (Euler-Maruyama). Layout: x[(path*(steps+1)+s)*d + i]; eta likewise;
/// jac[(path*(steps+1)+s)*d*d + i*d + j] holds direction j of basis solve i.
struct FlowEnsemble {
  int d = 0;
  int d1 = 0;
  int steps = 0;
  double t0 = 0.0, h = 0.0, T = 0.0;
  std::vector<double> x0, eta0;
  std::uint64_t seed = 0;
  std::int64_t M = 0;
  bool shared_noise = true;
  bool has_paths = false;
  std::vector<double> x;
  std::vector<double> eta;
  std::vector<double> jac;
  std::vector<std::uint8_t> excluded;
  std::int64_t excluded_count = 0;
};

FlowEnsemble simulate_flow(const SdeCoefficients& c, const FlowRequest& req);

struct BumpReport {
  double max_deviation = 0.0;  // max over steps of path-mean |eta - (bump diff)/eps| / (1+|eta|)
  std::int64_t excluded = 0;
  std::int64_t used_paths = 0;
};

/// Compares the variational process against the shared-noise finite
/// difference (x-run bumped by eps * eta).
BumpReport jacobian_vs_bump(const SdeCoefficients& c, const FlowRequest& req, double eps);

/// Smooth test function with analytic gradient.
struct SmoothFn {
  std::function<double(const double*)> value;
  std::function<void(const double*, double*)> grad;
};

struct ChainRuleReport {
  double lhs = 0.0;        // E grad f(x_s) . eta_s
  double rhs = 0.0;        // central difference of E f(x_s) along eta
  double residual = 0.0;   // |lhs-rhs| / (|lhs|+|rhs|+eps_floor)
  double half_width = 0.0; // 95% MC half-width of the paired difference, same normalization
  bool inconclusive = false;  // half-width exceeds the residual
};

ChainRuleReport chain_rule_residual(const SdeCoefficients& c, const SmoothFn& f,
                                    const FlowRequest& req, double eps_x);

/// Polynomial in eta with x-dependent coefficients: sum of
/// coeff(x) * constant * prod_i eta_i^{powers_i}. Null coeff means constant.
struct DirectionalPolynomial {
  int eta_dim = 2;
  struct Term {
    std::vector<int> powers;
    std::function<double(const double*)> coeff;
    double constant = 1.0;
  };
  std::vector<Term> terms;

  int degree() const;
  double eval(const double* x, const double* eta) const;
  /// max |constant * coeff(x)| over terms (the coefficient-max norm |A|).
  double coeff_max(const double* x) const;
};

struct GeneratorPoint {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> eta;
};

struct GeneratorSpec {
  double dt_fd = 0.05;
  double dx_fd = 0.1;
  double de_fd = 0.1;
  double h = 1e-2;
  std::int64_t M = 2000;
  std::uint64_t seed = 7;
};

struct GeneratorReport {
  std::vector<double> residual_rel;  // per requested center
  std::vector<double> half_width;    // MC half-width, same normalization
  std::vector<std::uint8_t> noise_flag;  // MC noise dominates the stencil
  double max_rel = 0.0;
  double median_rel = 0.0;
};

/// Monte Carlo residual of the generator identity for
/// u(t,x,eta) = E f(x_{T-t}, eta_{T-t}): all 2d+1 partial derivatives by
/// central differences on a 3^(2d+1) node stencil sharing one increment
/// stream per path.
GeneratorReport generator_residual(const SdeCoefficients& c, const DirectionalPolynomial& f,
                                   double T, const std::vector<GeneratorPoint>& centers,
                                   const GeneratorSpec& spec);

struct WeightedSupReport {
  double lhs = 0.0;       // integral of sup_{|eta|<=1} |u(0,x,eta)|^{2n} e^{-lambda|x|} dx
  double rhs_base = 0.0;  // same integral for f at time T
  double n_min = 0.0;     // minimal N with lhs <= N e^{2 lambda rho0 + alpha(N) T} rhs_base
  double n_min_lambda0 = 0.0;  // unweighted variant (rho0 arbitrary): lhs0 / rhs0
  double lhs_lambda0 = 0.0;
  double rhs_lambda0 = 0.0;
  double mc_half_width = 0.0;
  bool mc_dominated = false;
  int eta_points = 0;
};

/// Weighted terminal-sup estimate over a spatial grid; the eta-sup uses a
/// deterministic quasi-uniform set on the unit ball (default 64 points). The
/// smallness precondition on the coefficients is the caller's check (morrey
/// module on the drift and d sigma fields).
WeightedSupReport weighted_sup_eta_report(const SdeCoefficients& c,
                                          const DirectionalPolynomial& f, int n, double lambda,
                                          double rho0, double T, const SpaceTimeGrid& xgrid,
                                          std::int64_t M, double h, std::uint64_t seed,
                                          int eta_points = 64);

struct DerivMomentReport {
  double value = 0.0;        // E integral e^{-|x|} |Dx_T(t,x)|^{2 kappa} dx
  double half_width = 0.0;   // 95% confidence from per-node path variance
  double excluded_fraction = 0.0;
  bool operator_norm = false;
};

/// Jacobian moment with the spatial exponential weight; kappa must exceed
/// (d+2)/2. Frobenius norm by default, operator norm on request. Runs with
/// more than 0.1% excluded paths are rejected.
DerivMomentReport derivative_weighted_moment(const SdeCoefficients& c, int kappa, double t,
                                             const SpaceTimeGrid& xgrid, std::int64_t M, double T,
                                             double h, std::uint64_t seed,
                                             bool operator_norm = false);

struct MomentSupReport {
  double estimate = 0.0;        // E sup_{s<=T} |(x_s - x_0, eta_s)|^q at the base eta
  double estimate_x_only = 0.0; // E sup_{s<=T} |x_s - x_0|^q
  double doob_upper = 0.0;      // 4 q-th moment bound reference: 4 E|x_T - x_0|^q (q=2 case: 4dT)
  double fitted_m = 0.0;        // slope of log estimate over the eta ladder
  std::vector<double> ladder_scales;
  std::vector<double> ladder_estimates;
  std::int64_t excluded = 0;
};

/// Running-sup moment estimate plus the fitted eta-growth degree m over a
/// geometric eta ladder. n_deriv = 1 appends the bump-based first difference
/// to the supremand.
MomentSupReport moment_sup_report(const SdeCoefficients& c, double q, const FlowRequest& req,
                                  int n_deriv = 0, double eps_bump = 1e-4);

struct PolyBallCase {
  DirectionalPolynomial poly;
  double power = 1.0;
};

struct PolyBallReport {
  std::vector<double> ratios;  // per case: prod |A_i|^{p_i} / ball integral
  double max_ratio = 0.0;
  int counter_candidates = 0;  // degenerate integrals with nonzero coefficient norm
  int sample_count = 0;
};

/// Ratio of the coefficient-max product to its unit-ball integral for each
/// case list; cases are lists because the bound multiplies several
/// polynomials. x fixes the coefficient functions (null for constants).
PolyBallReport polynomial_ball_bound(const std::vector<std::vector<PolyBallCase>>& cases,
                                     int eta_dim, const double* x = nullptr,
                                     int sample_count = 1 << 14);

struct StrongOrderReport {
  std::vector<double> h_values;
  std::vector<double> errors;  // strong error vs the shared-noise finest level
  std::vector<double> slopes;  // log2(error(h)/error(h/2))
};

/// Nested-increment strong-order study: every level consumes sums of the
/// finest level's Gaussian increments, so all levels share one Brownian path.
StrongOrderReport strong_order_study(const SdeCoefficients& c, const FlowRequest& req,
                                     int levels);

}  // namespace pf
