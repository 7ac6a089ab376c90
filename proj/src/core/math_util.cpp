#include "core/math_util.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace pf {

double unit_ball_volume(int d) {
  require(d >= 1, Errc::invalid_argument, "dimension must be >= 1");
  return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double abs_normal_moment(int d, double q) {
  require(d >= 1 && q > -static_cast<double>(d), Errc::invalid_argument,
          "moment order out of range");
  return std::pow(2.0, 0.5 * q) * std::tgamma(0.5 * (d + q)) / std::tgamma(0.5 * d);
}

double gauss_cell_factor(double a, double b, double ks) {
  if (ks <= 0.0) return 0.0;
  double w = std::sqrt(ks);
  return 0.5 * std::sqrt(kPi) * w * (std::erf(b / w) - std::erf(a / w));
}

namespace {

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa, double m,
                            double fm, double b, double fb, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(a, fa, flm, m, fm);
  double right = simpson(m, fm, frm, b, fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  if (a == b) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = simpson(a, fa, fm, b, fb);
  double scale = std::max({std::abs(whole), std::abs(b - a) * std::abs(fm), 1e-300});
  return adaptive_simpson_rec(f, a, fa, m, fm, b, fb, whole, tol * scale, max_depth);
}

namespace {

// Tensor Gauss-Legendre rule with n (2 or 3) nodes per axis.
double gl_tensor(const std::function<double(const double*)>& f, const double* lo, const double* hi,
                 int dim, int n, double* scratch) {
  static const double x2[2] = {0.21132486540518713, 0.78867513459481290};
  static const double w2[2] = {0.5, 0.5};
  static const double x3[3] = {0.11270166537925831, 0.5, 0.88729833462074169};
  static const double w3[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const double* xs = n == 2 ? x2 : x3;
  const double* ws = n == 2 ? w2 : w3;
  double vol = 1.0;
  int total = 1;
  for (int i = 0; i < dim; ++i) {
    vol *= hi[i] - lo[i];
    total *= n;
  }
  double sum = 0.0;
  for (int k = 0; k < total; ++k) {
    int t = k;
    double w = 1.0;
    for (int i = 0; i < dim; ++i) {
      int idx = t % n;
      t /= n;
      scratch[i] = lo[i] + (hi[i] - lo[i]) * xs[idx];
      w *= ws[idx];
    }
    sum += w * f(scratch);
  }
  return sum * vol;
}

// abs_tol is this box's share of the whole cell's error budget, split among
// children in proportion to their contribution. A chain toward an integrable
// corner singularity keeps most of the budget and stops once its own
// contribution is negligible, while the smooth siblings only need to hold
// their ordinary relative accuracy instead of chasing the chain's budget.
double adaptive_cell_rec(const std::function<double(const double*)>& f, const double* lo,
                         const double* hi, int dim, double e1, double e2, double abs_tol,
                         int depth, double* scratch) {
  double err = std::abs(e2 - e1);
  if (depth <= 0 || err <= abs_tol || std::abs(e2) + err <= abs_tol) return e2;
  int children = 1 << dim;
  double l[8], h[8];
  double c1[256], c2[256];
  double total = 0.0;
  for (int c = 0; c < children; ++c) {
    for (int i = 0; i < dim; ++i) {
      double mid = 0.5 * (lo[i] + hi[i]);
      l[i] = (c & (1 << i)) ? mid : lo[i];
      h[i] = (c & (1 << i)) ? hi[i] : mid;
    }
    c1[c] = gl_tensor(f, l, h, dim, 2, scratch);
    c2[c] = gl_tensor(f, l, h, dim, 3, scratch);
    total += std::abs(c2[c]);
  }
  double out = 0.0;
  for (int c = 0; c < children; ++c) {
    for (int i = 0; i < dim; ++i) {
      double mid = 0.5 * (lo[i] + hi[i]);
      l[i] = (c & (1 << i)) ? mid : lo[i];
      h[i] = (c & (1 << i)) ? hi[i] : mid;
    }
    double share = total > 0.0 ? std::abs(c2[c]) / total : 1.0 / children;
    out += adaptive_cell_rec(f, l, h, dim, c1[c], c2[c], abs_tol * share, depth - 1, scratch);
  }
  return out;
}

}  // namespace

double adaptive_cell_integral(const std::function<double(const double*)>& f, const double* lo,
                              const double* hi, int dim, double rel_tol, int max_depth) {
  require(dim >= 1 && dim <= 8, Errc::invalid_argument, "integral dimension out of range");
  double scratch[8];
  double e1 = gl_tensor(f, lo, hi, dim, 2, scratch);
  double e2 = gl_tensor(f, lo, hi, dim, 3, scratch);
  double abs_tol = rel_tol * std::max(std::abs(e2), 1e-300);
  return adaptive_cell_rec(f, lo, hi, dim, e1, e2, abs_tol, max_depth, scratch);
}

std::vector<double> matrix_exp(const std::vector<double>& a, int n, double t) {
  require(n >= 1 && a.size() == static_cast<std::size_t>(n) * n, Errc::invalid_argument,
          "matrix size mismatch");
  std::vector<double> b(a.size());
  double norm = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::abs(a[static_cast<std::size_t>(i) * n + j] * t);
    norm = std::max(norm, row);
  }
  int s = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++s;
  }
  double scale = t / std::ldexp(1.0, s);
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] * scale;

  auto matmul = [n](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> z(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        double xv = x[static_cast<std::size_t>(i) * n + k];
        if (xv == 0.0) continue;
        for (int j = 0; j < n; ++j)
          z[static_cast<std::size_t>(i) * n + j] += xv * y[static_cast<std::size_t>(k) * n + j];
      }
    return z;
  };

  std::vector<double> result(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) result[static_cast<std::size_t>(i) * n + i] = 1.0;
  std::vector<double> term = result;
  for (int j = 1; j <= 40; ++j) {
    term = matmul(term, b);
    double tn = 0.0;
    for (int i = 0; i < n * n; ++i) {
      term[static_cast<std::size_t>(i)] /= j;
      tn = std::max(tn, std::abs(term[static_cast<std::size_t>(i)]));
    }
    for (int i = 0; i < n * n; ++i) result[static_cast<std::size_t>(i)] += term[static_cast<std::size_t>(i)];
    if (tn < 1e-18) break;
  }
  for (int i = 0; i < s; ++i) result = matmul(result, result);
  return result;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  std::uint64_t i = index + 1;  // skip the origin
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
    i /= static_cast<std::uint64_t>(base);
  }
  return r;
}

std::vector<double> unit_ball_points(int d, int count) {
  require(d >= 1 && d <= 5, Errc::invalid_argument, "ball dimension out of range");
  require(count >= 1, Errc::invalid_argument, "point count must be positive");
  static const int bases[5] = {2, 3, 5, 7, 11};
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(count) * d);
  std::uint64_t idx = 0;
  int accepted = 0;
  double p[5];
  while (accepted < count) {
    double norm2 = 0.0;
    for (int i = 0; i < d; ++i) {
      p[i] = 2.0 * halton(idx, bases[i]) - 1.0;
      norm2 += p[i] * p[i];
    }
    ++idx;
    if (norm2 > 1.0) continue;
    for (int i = 0; i < d; ++i) pts.push_back(p[i]);
    ++accepted;
  }
  return pts;
}

std::vector<double> geometric_ladder(double r_min, double r_max, int per_decade) {
  require(r_min > 0 && r_max >= r_min && per_decade >= 1, Errc::invalid_argument,
          "invalid ladder parameters");
  std::vector<double> out;
  double ratio = std::pow(10.0, 1.0 / per_decade);
  for (double r = r_min; r < r_max * (1.0 + 1e-12); r *= ratio) out.push_back(std::min(r, r_max));
  if (out.empty() || out.back() < r_max * (1.0 - 1e-12)) out.push_back(r_max);
  return out;
}

std::vector<QuadNode> gauss_legendre(int n, double a, double b) {
  require(n >= 1 && b > a, Errc::invalid_argument, "invalid quadrature request");
  std::vector<QuadNode> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Newton iteration from the Chebyshev-angle initial guess.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = {0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w};
  }
  return nodes;
}

}  // namespace pf
