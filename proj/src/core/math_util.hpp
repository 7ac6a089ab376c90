#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace pf {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// E|Z|^q for a standard normal vector Z in R^d: 2^{q/2} Gamma((d+q)/2) / Gamma(d/2).
double abs_normal_moment(int d, double q);

/// Integral of exp(-y^2 / ks) over [a, b] (one axis of a Gaussian against a cell).
double gauss_cell_factor(double a, double b, double ks);

/// Adaptive Simpson quadrature of f on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 40);

/// Adaptive integral of f over an axis-aligned box: paired 2^d / 3^d tensor
/// Gauss-Legendre estimates, dyadic subdivision while they disagree by more
/// than this box's share of the whole-box error budget (rel_tol * first
/// estimate). Handles integrable singularities at box corners.
double adaptive_cell_integral(const std::function<double(const double*)>& f, const double* lo,
                              const double* hi, int dim, double rel_tol = 1e-6,
                              int max_depth = 24);

/// Dense matrix exponential exp(t*A) for row-major n x n A (scaling and squaring).
std::vector<double> matrix_exp(const std::vector<double>& a, int n, double t);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view s);

/// Halton low-discrepancy value: index >= 0, prime base.
double halton(std::uint64_t index, int base);

/// Deterministic quasi-uniform points in the closed unit ball of R^d
/// (Halton sequence + rejection). Returns count*d coordinates.
std::vector<double> unit_ball_points(int d, int count);

/// Geometric radius ladder from r_min to r_max with the given density per decade.
std::vector<double> geometric_ladder(double r_min, double r_max, int per_decade);

/// Gauss-Legendre nodes and weights on [a, b].
struct QuadNode {
  double x;
  double w;
};
std::vector<QuadNode> gauss_legendre(int n, double a, double b);

/// Compensated (Neumaier) accumulator for deterministic long sums.
struct NeumaierSum {
  double s = 0.0;
  double c = 0.0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

}  // namespace pf
