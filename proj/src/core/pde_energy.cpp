#include "core/pde_energy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/quadrature.hpp"

namespace pf {

namespace {

bool same_spatial_layout(const SpaceTimeGrid& a, const SpaceTimeGrid& b) {
  if (a.d != b.d || a.nx != b.nx || a.dx != b.dx) return false;
  for (int i = 0; i < a.d; ++i)
    if (a.x0[static_cast<std::size_t>(i)] != b.x0[static_cast<std::size_t>(i)]) return false;
  return true;
}

int coeff_slice(const SpaceTimeGrid& cg, double tau) {
  if (cg.nt == 1) return 0;
  int ic = static_cast<int>(std::lround((tau - cg.t0) / cg.dt - 0.5));
  return std::clamp(ic, 0, cg.nt - 1);
}

std::function<double(double)> abs_power(int n2) {
  return [n2](double v) { return std::pow(std::abs(v), n2); };
}

/// One axis face with its flux stencil: the face value is
/// Phi = (1/2) sum_k w[k] * u[col[k]] ((1/2) a_ij D_j u + (1/2) afrak_i u,
/// tangential gradients averaged over the face cells, ghost values dropped).
/// The conservative scatter is (S u)_below += Phi/dx, (S u)_above -= Phi/dx.
struct FaceStencil {
  std::int64_t below = -1, above = -1;  // -1: Dirichlet ghost cell
  int n = 0;
  std::int64_t col[40];
  double w[40];
};

template <typename Emit>
void for_each_face_stencil(const DivFormCoefficients& coeffs, double tau, const SpaceTimeGrid& gs,
                           const std::int64_t* stride_of, Emit&& emit) {
  int d = gs.d;
  int ia = coeff_slice(coeffs.a.grid, tau);
  int iaf = coeff_slice(coeffs.afrak.grid, tau);
  double inv_dx = 1.0 / gs.dx;
  std::int64_t nsp = gs.spatial_count();
  std::vector<int> ix(static_cast<std::size_t>(d));
  FaceStencil fs;
  auto put = [&fs](std::int64_t col, double w) {
    fs.col[fs.n] = col;
    fs.w[fs.n] = w;
    ++fs.n;
  };
  for (std::int64_t p = 0; p < nsp; ++p) {
    gs.spatial_coords(p, ix.data());
    for (int i = 0; i < d; ++i) {
      bool plus_interior = ix[static_cast<std::size_t>(i)] + 1 < gs.nx;
      std::int64_t q = p + stride_of[i];

      fs.below = p;
      fs.above = plus_interior ? q : -1;
      fs.n = 0;
      for (int j = 0; j < d; ++j) {
        double abar = plus_interior
                          ? 0.5 * (coeffs.a.at(ia, p, i * d + j) + coeffs.a.at(ia, q, i * d + j))
                          : coeffs.a.at(ia, p, i * d + j);
        if (abar == 0.0) continue;
        if (j == i) {
          if (plus_interior) put(q, abar * inv_dx);
          put(p, -abar * inv_dx);
        } else {
          // Tangential gradient averaged over the two face cells.
          double w = 0.25 * abar * inv_dx;
          bool jp = ix[static_cast<std::size_t>(j)] + 1 < gs.nx;
          bool jm = ix[static_cast<std::size_t>(j)] > 0;
          if (jp) put(p + stride_of[j], w);
          if (jm) put(p - stride_of[j], -w);
          if (plus_interior) {
            if (jp) put(q + stride_of[j], w);
            if (jm) put(q - stride_of[j], -w);
          }
        }
      }
      double af = plus_interior
                      ? 0.5 * (coeffs.afrak.at(iaf, p, i) + coeffs.afrak.at(iaf, q, i))
                      : coeffs.afrak.at(iaf, p, i);
      if (af != 0.0) {
        put(p, 0.5 * af);
        if (plus_interior) put(q, 0.5 * af);
      }
      emit(fs);

      if (ix[static_cast<std::size_t>(i)] == 0) {
        // -face against the ghost layer: flux with u_ghost = 0.
        fs.below = -1;
        fs.above = p;
        fs.n = 0;
        for (int j = 0; j < d; ++j) {
          double abar = coeffs.a.at(ia, p, i * d + j);
          if (abar == 0.0) continue;
          if (j == i) {
            put(p, abar * inv_dx);
          } else {
            double w = 0.25 * abar * inv_dx;
            if (ix[static_cast<std::size_t>(j)] + 1 < gs.nx) put(p + stride_of[j], w);
            if (ix[static_cast<std::size_t>(j)] > 0) put(p - stride_of[j], -w);
          }
        }
        double af0 = coeffs.afrak.at(iaf, p, i);
        if (af0 != 0.0) put(p, 0.5 * af0);
        emit(fs);
      }
    }
  }
}

}  // namespace

DivFormCoefficients make_constant_coefficients(const SpaceTimeGrid& g, double a_scale) {
  require(a_scale > 0.0, Errc::invalid_argument, "diffusion scale must be positive");
  SpaceTimeGrid gs(g.d, 1, g.nx, g.t0, std::max(g.nt * g.dt, g.dt), g.dx, g.x0);
  DivFormCoefficients c;
  c.a = GridField(gs, g.d * g.d);
  c.afrak = GridField(gs, g.d);
  c.b = GridField(gs, g.d);
  for (std::int64_t sp = 0; sp < gs.spatial_count(); ++sp)
    for (int i = 0; i < g.d; ++i) c.a.at(0, sp, i * g.d + i) = a_scale;
  c.delta = std::min(a_scale, 1.0 / a_scale);
  return c;
}

void validate_coefficients(const DivFormCoefficients& c, const SpaceTimeGrid& target) {
  int d = target.d;
  require(c.delta > 0.0 && c.delta <= 1.0, Errc::invalid_argument, "delta must lie in (0, 1]");
  require(c.a.components == d * d, Errc::invalid_argument, "a must have d*d components");
  require(c.afrak.components == d && c.b.components == d, Errc::invalid_argument,
          "afrak and b must have d components");
  require(same_spatial_layout(c.a.grid, target) && same_spatial_layout(c.afrak.grid, target) &&
              same_spatial_layout(c.b.grid, target),
          Errc::invalid_argument, "coefficient grids must match the solve grid spatially");
  c.a.check_finite();
  c.afrak.check_finite();
  c.b.check_finite();

  double amax = 0.0;
  for (double v : c.a.values) amax = std::max(amax, std::abs(v));
  double sym_tol = 1e-9 * (1.0 + amax);
  double lo_bound = c.delta * (1.0 - 1e-9) - 1e-12;
  double hi_bound = (1.0 / c.delta) * (1.0 + 1e-9) + 1e-12;

  Eigen::MatrixXd m(d, d);
  std::int64_t nsp = c.a.grid.spatial_count();
  for (int it = 0; it < c.a.grid.nt; ++it) {
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      double glo = 1e300, ghi = -1e300;
      for (int i = 0; i < d; ++i) {
        double center = c.a.at(it, sp, i * d + i);
        double radius = 0.0;
        for (int j = 0; j < d; ++j) {
          if (j == i) continue;
          double off = c.a.at(it, sp, i * d + j);
          require(std::abs(off - c.a.at(it, sp, j * d + i)) <= sym_tol, Errc::invalid_argument,
                  "coefficient matrix not symmetric");
          radius += std::abs(off);
        }
        glo = std::min(glo, center - radius);
        ghi = std::max(ghi, center + radius);
      }
      if (glo >= lo_bound && ghi <= hi_bound) continue;  // Gershgorin clears the point
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = c.a.at(it, sp, i * d + j);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
      require(es.eigenvalues().minCoeff() >= lo_bound && es.eigenvalues().maxCoeff() <= hi_bound,
              Errc::invalid_argument, "coefficient eigenvalues outside [delta, 1/delta]");
    }
  }
}

SolveReport solve_backward(const DivFormCoefficients& coeffs, const GridField& terminal, double T,
                           int steps) {
  const SpaceTimeGrid& gs = terminal.grid;
  require(terminal.components == 1, Errc::invalid_argument, "scalar terminal value expected");
  require(gs.nt == 1, Errc::invalid_argument, "terminal value must be a single-slice field");
  require(T > 0.0 && steps >= 1, Errc::invalid_argument, "invalid time interval");
  terminal.check_finite();
  validate_coefficients(coeffs, gs);

  double dt = T / steps;
  require(dt <= gs.dx * gs.dx / coeffs.delta * (1.0 + 1e-9), Errc::invalid_argument,
          "time step violates the dt <= dx^2/delta safeguard; raise the step count");

  int d = gs.d;
  std::int64_t nsp = gs.spatial_count();
  SpaceTimeGrid gu(d, steps + 1, gs.nx, -0.5 * dt, dt, gs.dx, gs.x0);
  SolveReport rep;
  rep.u = GridField(gu, 1);
  for (std::int64_t sp = 0; sp < nsp; ++sp) rep.u.at(steps, sp) = terminal.at(0, sp);

  std::int64_t stride_of[8];
  {
    std::int64_t s = 1;
    for (int a = d - 1; a >= 0; --a) {
      stride_of[a] = s;
      s *= gs.nx;
    }
  }
  std::vector<int> ix(static_cast<std::size_t>(d));

  bool time_constant =
      coeffs.a.grid.nt == 1 && coeffs.afrak.grid.nt == 1 && coeffs.b.grid.nt == 1;

  using Trip = Eigen::Triplet<double>;
  Eigen::SparseMatrix<double> M(nsp, nsp);
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
  solver.setTolerance(1e-12);
  solver.setMaxIterations(4 * nsp);

  auto assemble = [&](double tau) {
    int ib = coeff_slice(coeffs.b.grid, tau);
    std::vector<Trip> trips;
    trips.reserve(static_cast<std::size_t>(nsp) * (2 * d + 1) * 2);
    double inv_dx = 1.0 / gs.dx;
    for (std::int64_t p = 0; p < nsp; ++p) trips.emplace_back(p, p, 1.0);

    // add -dt * coefficient of u_col in (S u)_row; ghost columns are dropped
    // (homogeneous Dirichlet).
    auto add = [&](std::int64_t row, std::int64_t col, double v) {
      trips.emplace_back(row, col, -dt * v);
    };

    for_each_face_stencil(coeffs, tau, gs, stride_of, [&](const FaceStencil& fs) {
      for (int k = 0; k < fs.n; ++k) {
        if (fs.below >= 0) add(fs.below, fs.col[k], 0.5 * fs.w[k] * inv_dx);
        if (fs.above >= 0) add(fs.above, fs.col[k], -0.5 * fs.w[k] * inv_dx);
      }
    });

    // Upwind convection toward +b.
    for (std::int64_t p = 0; p < nsp; ++p) {
      gs.spatial_coords(p, ix.data());
      for (int i = 0; i < d; ++i) {
        double bi = coeffs.b.at(ib, p, i);
        if (bi > 0.0) {
          add(p, p, -bi * inv_dx);
          if (ix[static_cast<std::size_t>(i)] + 1 < gs.nx) add(p, p + stride_of[i], bi * inv_dx);
        } else if (bi < 0.0) {
          add(p, p, bi * inv_dx);
          if (ix[static_cast<std::size_t>(i)] > 0) add(p, p - stride_of[i], -bi * inv_dx);
        }
      }
    }
    M.setFromTriplets(trips.begin(), trips.end());
    solver.compute(M);
    require(solver.info() == Eigen::Success, Errc::numeric,
            "linear solver setup failed on the implicit step matrix");
  };

  if (time_constant) assemble(0.0);
  Eigen::VectorXd x(nsp), rhs(nsp);
  for (int j = steps - 1; j >= 0; --j) {
    if (!time_constant) assemble(j * dt);
    for (std::int64_t sp = 0; sp < nsp; ++sp)
      rhs[sp] = rep.u.at(j + 1, sp);
    Eigen::Map<const Eigen::VectorXd> guess(&rep.u.values[rep.u.offset(j + 1, 0)], nsp);
    x = solver.solveWithGuess(rhs, guess.eval());
    if (solver.info() != Eigen::Success) {
      std::ostringstream os;
      os << "linear solver did not converge at step " << j << ": iterations="
         << solver.iterations() << " error=" << solver.error();
      fail(Errc::numeric, os.str());
    }
    rep.iterations += static_cast<std::int64_t>(solver.iterations());
    double step_res = (rhs - M * x).lpNorm<Eigen::Infinity>() / dt;
    rep.residual_linf = std::max(rep.residual_linf, step_res);
    for (std::int64_t sp = 0; sp < nsp; ++sp) rep.u.at(j, sp) = x[sp];
  }

  for (int j = 0; j <= steps; ++j)
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      gs.spatial_coords(sp, ix.data());
      for (int a = 0; a < d; ++a)
        if (ix[static_cast<std::size_t>(a)] == 0 || ix[static_cast<std::size_t>(a)] == gs.nx - 1) {
          rep.boundary_max = std::max(rep.boundary_max, std::abs(rep.u.at(j, sp)));
          break;
        }
    }
  rep.u.check_finite();
  return rep;
}

double ibp_pairing_defect(const DivFormCoefficients& coeffs, const GridField& u,
                          const GridField& v) {
  const SpaceTimeGrid& gs = u.grid;
  require(u.components == 1 && v.components == 1, Errc::invalid_argument,
          "scalar fields expected");
  require(u.grid.nt == 1 && v.grid == u.grid, Errc::invalid_argument,
          "u and v must share one single-slice grid");
  validate_coefficients(coeffs, gs);
  u.check_finite();
  v.check_finite();

  int d = gs.d;
  std::int64_t nsp = gs.spatial_count();
  std::int64_t stride_of[8];
  {
    std::int64_t s = 1;
    for (int a = d - 1; a >= 0; --a) {
      stride_of[a] = s;
      s *= gs.nx;
    }
  }
  double inv_dx = 1.0 / gs.dx;
  std::vector<double> su(static_cast<std::size_t>(nsp), 0.0);
  NeumaierSum face_pairing;
  for_each_face_stencil(coeffs, 0.0, gs, stride_of, [&](const FaceStencil& fs) {
    double phi = 0.0;
    for (int k = 0; k < fs.n; ++k)
      phi += 0.5 * fs.w[k] * u.at(0, fs.col[k]);
    if (fs.below >= 0) su[static_cast<std::size_t>(fs.below)] += phi * inv_dx;
    if (fs.above >= 0) su[static_cast<std::size_t>(fs.above)] -= phi * inv_dx;
    double v_below = fs.below >= 0 ? v.at(0, fs.below) : 0.0;
    double v_above = fs.above >= 0 ? v.at(0, fs.above) : 0.0;
    face_pairing.add(phi * (v_above - v_below) * inv_dx);
  });
  NeumaierSum cell_pairing, mass;
  for (std::int64_t p = 0; p < nsp; ++p) {
    cell_pairing.add(su[static_cast<std::size_t>(p)] * v.at(0, p));
    mass.add(std::abs(su[static_cast<std::size_t>(p)] * v.at(0, p)));
  }
  double defect = std::abs(cell_pairing.value() + face_pairing.value());
  return defect / std::max(mass.value(), 1e-300);
}

bool admissible_order(int n) { return n == 1 || (n >= 4 && n % 2 == 0); }

EnergyReport energy_report(const GridField& u, const GridField& f, int n, double lambda,
                           double rho0, double T, double n_config, bool allow_any_n) {
  require(allow_any_n || admissible_order(n), Errc::invalid_argument,
          "n must lie in {1, 4, 6, 8, ...} (pass the override to lift this)");
  require(rho0 > 0.0 && T > 0.0 && lambda >= 0.0, Errc::invalid_argument,
          "lambda >= 0, rho0 > 0, T > 0 required");
  const SpaceTimeGrid& g = u.grid;
  require(u.components == 1 && f.components == 1, Errc::invalid_argument,
          "scalar fields expected");

  EnergyReport rep;
  rep.n = n;
  rep.lambda = lambda;
  rep.rho0 = rho0;
  rep.T = T;
  rep.n_config = n_config;
  rep.alpha = n_config * std::exp(2.0 * lambda * rho0) / (rho0 * rho0);

  ExponentialWeight w(lambda);
  ExponentialWeight w0(0.0);
  rep.lhs_terminalless = weighted_space_integral(u, 0, w, abs_power(2 * n));
  double weighted_terminal = weighted_space_integral(f, 0, w, abs_power(2 * n));
  double unweighted_terminal = weighted_space_integral(f, 0, w0, abs_power(2 * n));

  // Gradient term: centered differences inside, one-sided at the box edge.
  std::int64_t stride_of[8];
  {
    std::int64_t s = 1;
    for (int a = g.d - 1; a >= 0; --a) {
      stride_of[a] = s;
      s *= g.nx;
    }
  }
  NeumaierSum grad_sum;
  std::int64_t nsp = g.spatial_count();
  std::vector<int> ix(static_cast<std::size_t>(g.d));
  std::vector<double> x(static_cast<std::size_t>(g.d));
  for (int it = 0; it + 1 < g.nt; ++it) {
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      g.spatial_coords(sp, ix.data());
      g.cell_center(sp, x.data());
      double g2 = 0.0;
      for (int a = 0; a < g.d; ++a) {
        int c = ix[static_cast<std::size_t>(a)];
        double dv;
        if (c == 0)
          dv = (u.at(it, sp + stride_of[a]) - u.at(it, sp)) / g.dx;
        else if (c == g.nx - 1)
          dv = (u.at(it, sp) - u.at(it, sp - stride_of[a])) / g.dx;
        else
          dv = (u.at(it, sp + stride_of[a]) - u.at(it, sp - stride_of[a])) / (2.0 * g.dx);
        g2 += dv * dv;
      }
      double uv = n == 1 ? 1.0 : std::pow(std::abs(u.at(it, sp)), 2 * n - 2);
      grad_sum.add(uv * g2 * w(x.data(), g.d));
    }
  }
  rep.lhs_gradient = grad_sum.value() * g.dt * g.cell_volume();

  rep.rhs = std::exp(2.0 * lambda * rho0 + rep.alpha * T) * weighted_terminal;
  rep.ratio_terminalless =
      unweighted_terminal > 0.0 ? rep.lhs_terminalless / unweighted_terminal : 0.0;
  rep.ratio_gradient = unweighted_terminal > 0.0 ? rep.lhs_gradient / unweighted_terminal : 0.0;
  rep.pass_terminalless = rep.lhs_terminalless <= rep.rhs * (1.0 + 1e-12);
  rep.pass_gradient = rep.lhs_gradient <= rep.rhs * (1.0 + 1e-12);

  double worst = std::max(rep.lhs_terminalless, rep.lhs_gradient);
  if (worst <= 0.0) {
    rep.n_min = 0.0;
  } else if (weighted_terminal <= 0.0) {
    rep.n_min = HUGE_VAL;
  } else {
    double alpha_needed =
        std::max(0.0, std::log(worst / (weighted_terminal * std::exp(2.0 * lambda * rho0))) / T);
    rep.n_min = alpha_needed * rho0 * rho0 * std::exp(-2.0 * lambda * rho0);
  }
  return rep;
}

PolynomialWeightReport polynomial_weight_report(const GridField& u, const GridField& f, double s,
                                                int n, bool allow_any_n) {
  require(allow_any_n || admissible_order(n), Errc::invalid_argument,
          "n must lie in {1, 4, 6, 8, ...} (pass the override to lift this)");
  const SpaceTimeGrid& g = u.grid;
  require(u.components == 1 && f.components == 1, Errc::invalid_argument,
          "scalar fields expected");

  PolynomialWeightReport rep;
  std::int64_t nsp = g.spatial_count();
  std::vector<double> x(static_cast<std::size_t>(g.d));
  auto poly = [&](const double* xx) {
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) r2 += xx[a] * xx[a];
    return std::pow(1.0 + std::sqrt(r2), s);
  };
  NeumaierSum lhs, rhs;
  for (std::int64_t sp = 0; sp < nsp; ++sp) {
    g.cell_center(sp, x.data());
    double wv = poly(x.data());
    lhs.add(wv * std::pow(std::abs(u.at(0, sp)), 2 * n));
    rhs.add(wv * std::pow(std::abs(f.at(0, sp)), 2 * n));
  }
  rep.lhs = lhs.value() * g.cell_volume();
  rep.rhs = rhs.value() * g.cell_volume();
  rep.n_measured = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;

  // Auxiliary equivalence along the +e1 ray: the convolution of the
  // polynomial weight with e^{-|x-y|} should stay within constant multiples
  // of the weight itself. Sample centers at least 4 units from the box edge
  // so the exponential tail the box clips is negligible.
  double half = 0.5 * g.nx * g.dx;
  double margin = std::min(4.0, 0.5 * half);
  std::vector<int> ix(static_cast<std::size_t>(g.d), g.nx / 2);
  double band_lo = 1e300, band_hi = -1e300;
  for (int i = g.nx / 2; i < g.nx; i += std::max(1, g.nx / 16)) {
    ix[0] = i;
    std::int64_t sp0 = g.spatial_index(ix.data());
    g.cell_center(sp0, x.data());
    if (half - std::abs(x[0]) < margin) continue;
    NeumaierSum conv;
    std::vector<double> y(static_cast<std::size_t>(g.d));
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      g.cell_center(sp, y.data());
      double dist2 = 0.0;
      for (int a = 0; a < g.d; ++a) {
        double off = y[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(a)];
        dist2 += off * off;
      }
      conv.add(poly(y.data()) * std::exp(-std::sqrt(dist2)));
    }
    double ratio = conv.value() * g.cell_volume() / poly(x.data());
    band_lo = std::min(band_lo, ratio);
    band_hi = std::max(band_hi, ratio);
  }
  if (band_hi >= band_lo) {
    rep.band_low = band_lo;
    rep.band_high = band_hi;
  }
  return rep;
}

UniformDriftReport uniform_drift_energy_report(const GridField& u, const GridField& f, int n,
                                               double lambda, const DivFormCoefficients& coeffs,
                                               double c_config, bool allow_any_n) {
  require(allow_any_n || admissible_order(n), Errc::invalid_argument,
          "n must lie in {1, 4, 6, 8, ...} (pass the override to lift this)");
  const SpaceTimeGrid& g = u.grid;
  require(u.components == 1 && f.components == 1, Errc::invalid_argument,
          "scalar fields expected");
  double T = (g.nt - 1) * g.dt;

  UniformDriftReport rep;
  ExponentialWeight w(lambda);
  rep.lhs = weighted_space_integral(u, 0, w, abs_power(2 * n));
  rep.rhs_base = weighted_space_integral(f, 0, w, abs_power(2 * n));

  const SpaceTimeGrid& cg = coeffs.b.grid;
  std::int64_t nsp = cg.spatial_count();
  NeumaierSum acc;
  for (int it = 0; it < cg.nt; ++it) {
    double peak = 0.0;
    for (std::int64_t sp = 0; sp < nsp; ++sp) {
      double m = coeffs.afrak.magnitude(it, sp) + coeffs.b.magnitude(it, sp);
      peak = std::max(peak, m);
    }
    acc.add(peak * peak);
  }
  rep.sup_sq_integral = cg.nt == 1 ? T * acc.value() : acc.value() * cg.dt;

  if (rep.sup_sq_integral > 0.0 && rep.rhs_base > 0.0 && rep.lhs > rep.rhs_base)
    rep.c_measured = std::log(rep.lhs / rep.rhs_base) / rep.sup_sq_integral;
  rep.bound_with_c = std::exp(c_config * rep.sup_sq_integral) * rep.rhs_base;
  rep.holds = rep.lhs <= rep.bound_with_c * (1.0 + 1e-12);
  return rep;
}

}  // namespace pf
