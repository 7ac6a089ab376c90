#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/parallel.hpp"
#include "core/sde_flow.hpp"
#include "core/sde_internal.hpp"

namespace pf {

using detail::gauss_increments;
using detail::Stepper;
using detail::steps_for;

namespace {

constexpr std::uint64_t kSeedMix = 0x9E3779B97F4A7C15ULL;

/// sigma, b, and their spatial derivative tables at one point (analytic
/// callbacks when present, else centered differences with h_fd).
void coefficient_tables(const SdeCoefficients& c, double t, const double* x,
                        std::vector<double>& sig, std::vector<double>& b,
                        std::vector<double>& dsig, std::vector<double>& db) {
  int d = c.d, d1 = c.d1;
  sig.assign(static_cast<std::size_t>(d * d1), 0.0);
  b.assign(static_cast<std::size_t>(d), 0.0);
  dsig.assign(static_cast<std::size_t>(d * d1 * d), 0.0);
  db.assign(static_cast<std::size_t>(d * d), 0.0);
  c.sigma(t, x, sig.data());
  c.b(t, x, b.data());
  std::vector<double> xp(x, x + d);
  if (c.dsigma) {
    c.dsigma(t, x, dsig.data());
  } else {
    std::vector<double> sp(sig.size()), sm(sig.size());
    for (int j = 0; j < d; ++j) {
      xp[static_cast<std::size_t>(j)] = x[j] + c.h_fd;
      c.sigma(t, xp.data(), sp.data());
      xp[static_cast<std::size_t>(j)] = x[j] - c.h_fd;
      c.sigma(t, xp.data(), sm.data());
      xp[static_cast<std::size_t>(j)] = x[j];
      for (int ik = 0; ik < d * d1; ++ik)
        dsig[static_cast<std::size_t>(ik * d + j)] =
            (sp[static_cast<std::size_t>(ik)] - sm[static_cast<std::size_t>(ik)]) / (2.0 * c.h_fd);
    }
  }
  if (c.db) {
    c.db(t, x, db.data());
  } else {
    std::vector<double> bp(b.size()), bm(b.size());
    for (int j = 0; j < d; ++j) {
      xp[static_cast<std::size_t>(j)] = x[j] + c.h_fd;
      c.b(t, xp.data(), bp.data());
      xp[static_cast<std::size_t>(j)] = x[j] - c.h_fd;
      c.b(t, xp.data(), bm.data());
      xp[static_cast<std::size_t>(j)] = x[j];
      for (int i = 0; i < d; ++i)
        db[static_cast<std::size_t>(i * d + j)] =
            (bp[static_cast<std::size_t>(i)] - bm[static_cast<std::size_t>(i)]) / (2.0 * c.h_fd);
    }
  }
}

double vec_norm(const double* x, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

}  // namespace

GeneratorReport generator_residual(const SdeCoefficients& c, const DirectionalPolynomial& f,
                                   double T, const std::vector<GeneratorPoint>& centers,
                                   const GeneratorSpec& spec) {
  require(!centers.empty(), Errc::invalid_argument, "need at least one center");
  require(f.eta_dim == c.d, Errc::invalid_argument, "polynomial eta dimension must equal d");
  require(spec.M >= 2, Errc::invalid_argument, "need at least two paths");
  require(spec.dt_fd > 0.0 && spec.dx_fd > 0.0 && spec.de_fd > 0.0, Errc::invalid_argument,
          "stencil offsets must be positive");
  int d = c.d, d1 = c.d1;
  int dim = 2 * d + 1;  // (t, x, eta) offset digits

  GeneratorReport rep;
  for (std::size_t ci = 0; ci < centers.size(); ++ci) {
    const GeneratorPoint& ctr = centers[ci];
    require(ctr.x.size() == static_cast<std::size_t>(d) &&
                ctr.eta.size() == static_cast<std::size_t>(d),
            Errc::invalid_argument, "center x and eta must have d entries");
    require(T - ctr.t > spec.dt_fd, Errc::invalid_argument,
            "time stencil must fit before the terminal time");
    detail::check_ellipticity(c, ctr.t, ctr.x.data());

    std::vector<double> sig, bvec, dsig, dbm;
    coefficient_tables(c, ctr.t, ctr.x.data(), sig, bvec, dsig, dbm);
    std::vector<double> sig_eta(static_cast<std::size_t>(d * d1), 0.0);
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d1; ++k) {
        double v = 0.0;
        for (int l = 0; l < d; ++l)
          v += dsig[static_cast<std::size_t>((j * d1 + k) * d + l)] *
               ctr.eta[static_cast<std::size_t>(l)];
        sig_eta[static_cast<std::size_t>(j * d1 + k)] = v;
      }
    auto block = [&](const std::vector<double>& u, const std::vector<double>& v, int i, int j) {
      double s = 0.0;
      for (int k = 0; k < d1; ++k)
        s += u[static_cast<std::size_t>(i * d1 + k)] * v[static_cast<std::size_t>(j * d1 + k)];
      return s;
    };
    std::vector<double> beta(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        beta[static_cast<std::size_t>(i)] +=
            dbm[static_cast<std::size_t>(i * d + j)] * ctr.eta[static_cast<std::size_t>(j)];

    // Sparse central-difference weights: residual = sum over the 3^(2d+1)
    // stencil of W(node) u(node), grouped by generator term.
    std::array<std::vector<std::pair<std::size_t, double>>, 6> groups;
    std::vector<int> off(static_cast<std::size_t>(dim), 0);
    auto off_index = [&]() {
      std::size_t idx = 0, mul = 1;
      for (int i = 0; i < dim; ++i) {
        idx += static_cast<std::size_t>(off[static_cast<std::size_t>(i)] + 1) * mul;
        mul *= 3;
      }
      return idx;
    };
    auto addw = [&](int g, double w) { groups[static_cast<std::size_t>(g)].push_back({off_index(), w}); };
    double dx2 = spec.dx_fd * spec.dx_fd, de2 = spec.de_fd * spec.de_fd;

    off.assign(static_cast<std::size_t>(dim), 0);
    off[0] = +1;
    addw(0, 0.5 / spec.dt_fd);
    off[0] = -1;
    addw(0, -0.5 / spec.dt_fd);
    off[0] = 0;
    for (int i = 0; i < d; ++i) {
      double aii = block(sig, sig, i, i);
      off[static_cast<std::size_t>(1 + i)] = +1;
      addw(1, 0.5 * aii / dx2);
      off[static_cast<std::size_t>(1 + i)] = -1;
      addw(1, 0.5 * aii / dx2);
      off[static_cast<std::size_t>(1 + i)] = 0;
      addw(1, -aii / dx2);
      double cii = block(sig_eta, sig_eta, i, i);
      off[static_cast<std::size_t>(1 + d + i)] = +1;
      addw(3, 0.5 * cii / de2);
      off[static_cast<std::size_t>(1 + d + i)] = -1;
      addw(3, 0.5 * cii / de2);
      off[static_cast<std::size_t>(1 + d + i)] = 0;
      addw(3, -cii / de2);
    }
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        double aij = block(sig, sig, i, j);
        double cij = block(sig_eta, sig_eta, i, j);
        for (int si = -1; si <= 1; si += 2)
          for (int sj = -1; sj <= 1; sj += 2) {
            off[static_cast<std::size_t>(1 + i)] = si;
            off[static_cast<std::size_t>(1 + j)] = sj;
            addw(1, aij * si * sj / (4.0 * dx2));
            off[static_cast<std::size_t>(1 + i)] = 0;
            off[static_cast<std::size_t>(1 + j)] = 0;
            off[static_cast<std::size_t>(1 + d + i)] = si;
            off[static_cast<std::size_t>(1 + d + j)] = sj;
            addw(3, cij * si * sj / (4.0 * de2));
            off[static_cast<std::size_t>(1 + d + i)] = 0;
            off[static_cast<std::size_t>(1 + d + j)] = 0;
          }
      }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double bij = block(sig, sig_eta, i, j);  // x_i - eta_j cross diffusion
        for (int si = -1; si <= 1; si += 2)
          for (int sj = -1; sj <= 1; sj += 2) {
            off[static_cast<std::size_t>(1 + i)] = si;
            off[static_cast<std::size_t>(1 + d + j)] = sj;
            addw(2, bij * si * sj / (4.0 * spec.dx_fd * spec.de_fd));
            off[static_cast<std::size_t>(1 + i)] = 0;
            off[static_cast<std::size_t>(1 + d + j)] = 0;
          }
      }
    for (int i = 0; i < d; ++i) {
      off[static_cast<std::size_t>(1 + i)] = +1;
      addw(4, bvec[static_cast<std::size_t>(i)] * 0.5 / spec.dx_fd);
      off[static_cast<std::size_t>(1 + i)] = -1;
      addw(4, -bvec[static_cast<std::size_t>(i)] * 0.5 / spec.dx_fd);
      off[static_cast<std::size_t>(1 + i)] = 0;
      off[static_cast<std::size_t>(1 + d + i)] = +1;
      addw(5, beta[static_cast<std::size_t>(i)] * 0.5 / spec.de_fd);
      off[static_cast<std::size_t>(1 + d + i)] = -1;
      addw(5, -beta[static_cast<std::size_t>(i)] * 0.5 / spec.de_fd);
      off[static_cast<std::size_t>(1 + d + i)] = 0;
    }

    // Only stencil nodes carrying weight are simulated; the combination is
    // unchanged because every other node has W = 0.
    std::map<std::size_t, int> slot_of;
    for (auto& g : groups)
      for (auto& e : g)
        if (slot_of.find(e.first) == slot_of.end()) {
          int slot = static_cast<int>(slot_of.size());
          slot_of[e.first] = slot;
        }
    struct NodeSim {
      double t = 0.0;
      std::vector<double> x, eta;
      std::int64_t steps = 0;
      std::int64_t inc_offset = 0;
    };
    std::vector<NodeSim> nodes(slot_of.size());
    double t_min = ctr.t - spec.dt_fd;
    for (const auto& [idx, slot] : slot_of) {
      std::size_t rem = idx;
      std::vector<int> dig(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) {
        dig[static_cast<std::size_t>(i)] = static_cast<int>(rem % 3) - 1;
        rem /= 3;
      }
      NodeSim& nd = nodes[static_cast<std::size_t>(slot)];
      nd.t = ctr.t + dig[0] * spec.dt_fd;
      nd.x = ctr.x;
      nd.eta = ctr.eta;
      for (int i = 0; i < d; ++i) {
        nd.x[static_cast<std::size_t>(i)] += dig[static_cast<std::size_t>(1 + i)] * spec.dx_fd;
        nd.eta[static_cast<std::size_t>(i)] += dig[static_cast<std::size_t>(1 + d + i)] * spec.de_fd;
      }
      nd.steps = steps_for(T - nd.t, spec.h);
      double delta = nd.t - t_min;
      nd.inc_offset = std::llround(delta / spec.h);
      require(std::abs(nd.inc_offset * spec.h - delta) <= 1e-9, Errc::invalid_argument,
              "time offset must be an integer multiple of the step size");
    }
    for (auto& g : groups)
      for (auto& e : g) e.first = static_cast<std::size_t>(slot_of[e.first]);
    int n_slots = static_cast<int>(nodes.size());

    std::uint64_t seed_c = spec.seed ^ (kSeedMix * (ci + 1));
    double sqrt_h = std::sqrt(spec.h);
    struct Partial {
      double r = 0.0, r2 = 0.0;
      std::array<double, 6> g{};
      std::int64_t used = 0;
    };
    Partial tot = chunked_reduce<Partial>(
        spec.M, Partial{},
        [&](std::int64_t pb, std::int64_t pe) {
          Partial part;
          Stepper st(c);
          std::vector<double> x(static_cast<std::size_t>(d)), eta(static_cast<std::size_t>(d)),
              dw(static_cast<std::size_t>(d1));
          std::vector<double> vals(static_cast<std::size_t>(n_slots));
          for (std::int64_t p = pb; p < pe; ++p) {
            bool ok = true;
            for (int slot = 0; slot < n_slots && ok; ++slot) {
              const NodeSim& nd = nodes[static_cast<std::size_t>(slot)];
              x = nd.x;
              eta = nd.eta;
              for (std::int64_t s = 0; s < nd.steps && ok; ++s) {
                gauss_increments(seed_c, static_cast<std::uint64_t>(p), nd.inc_offset + s, d1,
                                 sqrt_h, dw.data());
                ok = st.step(nd.t + s * spec.h, spec.h, dw.data(), x.data(), eta.data(), 1, 1e8);
              }
              if (ok) vals[static_cast<std::size_t>(slot)] = f.eval(x.data(), eta.data());
            }
            if (!ok) continue;
            std::array<double, 6> gv{};
            for (int g = 0; g < 6; ++g)
              for (const auto& e : groups[static_cast<std::size_t>(g)])
                gv[static_cast<std::size_t>(g)] += e.second * vals[e.first];
            double r = 0.0;
            for (double v : gv) r += v;
            part.r += r;
            part.r2 += r * r;
            for (int g = 0; g < 6; ++g) part.g[static_cast<std::size_t>(g)] += gv[static_cast<std::size_t>(g)];
            ++part.used;
          }
          return part;
        },
        [](Partial acc, const Partial& part) {
          acc.r += part.r;
          acc.r2 += part.r2;
          for (int g = 0; g < 6; ++g) acc.g[static_cast<std::size_t>(g)] += part.g[static_cast<std::size_t>(g)];
          acc.used += part.used;
          return acc;
        });

    require(tot.used > 1, Errc::numeric, "not enough surviving paths");
    double m = static_cast<double>(tot.used);
    double rm = tot.r / m;
    double var = std::max(0.0, (tot.r2 - m * rm * rm) / (m - 1.0));
    double hw = 1.96 * std::sqrt(var / m);
    double normalizer = 0.0;
    for (double g : tot.g) normalizer = std::max(normalizer, std::abs(g) / m);
    double resid = 0.0, hwn = 0.0;
    if (normalizer > 1e-12) {
      resid = std::abs(rm) / normalizer;
      hwn = hw / normalizer;
    }
    rep.residual_rel.push_back(resid);
    rep.half_width.push_back(hwn);
    rep.noise_flag.push_back(hwn > resid ? 1 : 0);
  }

  std::vector<double> sorted = rep.residual_rel;
  std::sort(sorted.begin(), sorted.end());
  rep.max_rel = sorted.back();
  std::size_t n = sorted.size();
  rep.median_rel = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return rep;
}

WeightedSupReport weighted_sup_eta_report(const SdeCoefficients& c,
                                          const DirectionalPolynomial& f, int n, double lambda,
                                          double rho0, double T, const SpaceTimeGrid& xgrid,
                                          std::int64_t M, double h, std::uint64_t seed,
                                          int eta_points) {
  int d = c.d, d1 = c.d1;
  require(xgrid.nt == 1, Errc::invalid_argument, "spatial grid must have a single slice");
  require(xgrid.d == d, Errc::invalid_argument, "grid dimension must equal d");
  require(f.eta_dim == d, Errc::invalid_argument, "polynomial eta dimension must equal d");
  require(n >= 1, Errc::invalid_argument, "n must be at least 1");
  require(lambda >= 0.0 && rho0 > 0.0, Errc::invalid_argument,
          "need lambda >= 0 and rho0 > 0");
  require(M >= 2 && eta_points >= 2, Errc::invalid_argument,
          "need at least two paths and two eta points");
  std::int64_t steps = steps_for(T, h);
  std::vector<double> etas = unit_ball_points(d, eta_points);
  {
    std::vector<double> xc(static_cast<std::size_t>(d));
    xgrid.cell_center(0, xc.data());
    detail::check_ellipticity(c, 0.0, xc.data());
  }

  std::int64_t nsp = xgrid.spatial_count();
  double vol = xgrid.cell_volume();
  double sqrt_h = std::sqrt(h);
  NeumaierSum lhs, rhs, lhs0, rhs0, hw_acc;
  std::vector<double> xc(static_cast<std::size_t>(d)), eta_t(static_cast<std::size_t>(d));

  for (std::int64_t node = 0; node < nsp; ++node) {
    xgrid.cell_center(node, xc.data());
    std::uint64_t seed_x = seed ^ (kSeedMix * (static_cast<std::uint64_t>(node) + 1));

    struct Partial {
      std::vector<double> s, s2;
      std::int64_t used = 0;
    };
    Partial tot = chunked_reduce<Partial>(
        M,
        Partial{std::vector<double>(static_cast<std::size_t>(eta_points), 0.0),
                std::vector<double>(static_cast<std::size_t>(eta_points), 0.0), 0},
        [&](std::int64_t pb, std::int64_t pe) {
          Partial part{std::vector<double>(static_cast<std::size_t>(eta_points), 0.0),
                       std::vector<double>(static_cast<std::size_t>(eta_points), 0.0), 0};
          Stepper st(c);
          std::vector<double> x(static_cast<std::size_t>(d)),
              jac(static_cast<std::size_t>(d * d)), dw(static_cast<std::size_t>(d1)),
              et(static_cast<std::size_t>(d));
          for (std::int64_t p = pb; p < pe; ++p) {
            std::copy(xc.begin(), xc.end(), x.begin());
            std::fill(jac.begin(), jac.end(), 0.0);
            for (int i = 0; i < d; ++i) jac[static_cast<std::size_t>(i * d + i)] = 1.0;
            bool ok = true;
            for (std::int64_t s = 0; s < steps && ok; ++s) {
              gauss_increments(seed_x, static_cast<std::uint64_t>(p), s, d1, sqrt_h, dw.data());
              ok = st.step(s * h, h, dw.data(), x.data(), jac.data(), d, 1e8);
            }
            if (!ok) continue;
            ++part.used;
            // eta_T depends linearly on eta_0, so one basis solve covers
            // every eta sample: eta_T = sum_m eta0_m * (basis direction m).
            for (int e = 0; e < eta_points; ++e) {
              for (int i = 0; i < d; ++i) {
                double v = 0.0;
                for (int m = 0; m < d; ++m)
                  v += etas[static_cast<std::size_t>(e * d + m)] *
                       jac[static_cast<std::size_t>(m * d + i)];
                et[static_cast<std::size_t>(i)] = v;
              }
              double val = f.eval(x.data(), et.data());
              part.s[static_cast<std::size_t>(e)] += val;
              part.s2[static_cast<std::size_t>(e)] += val * val;
            }
          }
          return part;
        },
        [](Partial acc, const Partial& part) {
          if (acc.s.empty()) return part;
          for (std::size_t e = 0; e < acc.s.size(); ++e) {
            acc.s[e] += part.s[e];
            acc.s2[e] += part.s2[e];
          }
          acc.used += part.used;
          return acc;
        });

    require(tot.used > 1, Errc::numeric, "all paths blew up at a grid node");
    double m = static_cast<double>(tot.used);
    double sup = 0.0, se_at = 0.0, supf = 0.0;
    for (int e = 0; e < eta_points; ++e) {
      double mean = tot.s[static_cast<std::size_t>(e)] / m;
      double var = std::max(
          0.0, (tot.s2[static_cast<std::size_t>(e)] - m * mean * mean) / (m - 1.0));
      double se = 1.96 * std::sqrt(var / m);
      if (std::abs(mean) > sup) {
        sup = std::abs(mean);
        se_at = se;
      }
      supf = std::max(supf, std::abs(f.eval(xc.data(), etas.data() + e * d)));
    }
    double w = std::exp(-lambda * vec_norm(xc.data(), d));
    double p2n = 2.0 * n;
    lhs.add(std::pow(sup, p2n) * w * vol);
    rhs.add(std::pow(supf, p2n) * w * vol);
    lhs0.add(std::pow(sup, p2n) * vol);
    rhs0.add(std::pow(supf, p2n) * vol);
    hw_acc.add(p2n * std::pow(sup, p2n - 1.0) * se_at * w * vol);
  }

  WeightedSupReport rep;
  rep.lhs = lhs.value();
  rep.rhs_base = rhs.value();
  rep.lhs_lambda0 = lhs0.value();
  rep.rhs_lambda0 = rhs0.value();
  rep.mc_half_width = hw_acc.value();
  rep.mc_dominated = rep.mc_half_width > 0.5 * rep.lhs;
  rep.eta_points = eta_points;

  double w0 = std::exp(2.0 * lambda * rho0);
  auto gap = [&](double nn) {
    return nn * std::exp(2.0 * lambda * rho0 + nn * w0 / (rho0 * rho0) * T) * rep.rhs_base -
           rep.lhs;
  };
  if (rep.lhs <= 0.0) {
    rep.n_min = 0.0;
  } else if (rep.rhs_base <= 0.0) {
    rep.n_min = HUGE_VAL;
  } else {
    double hi = 1.0;
    while (gap(hi) < 0.0 && hi < 1e12) hi *= 2.0;
    if (gap(hi) < 0.0) {
      rep.n_min = HUGE_VAL;
    } else {
      double lo = 0.0;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (gap(mid) >= 0.0 ? hi : lo) = mid;
      }
      rep.n_min = hi;
    }
  }
  rep.n_min_lambda0 = rep.rhs_lambda0 > 0.0
                          ? rep.lhs_lambda0 / rep.rhs_lambda0
                          : (rep.lhs_lambda0 > 0.0 ? HUGE_VAL : 0.0);
  return rep;
}

DerivMomentReport derivative_weighted_moment(const SdeCoefficients& c, int kappa, double t,
                                             const SpaceTimeGrid& xgrid, std::int64_t M, double T,
                                             double h, std::uint64_t seed, bool operator_norm) {
  int d = c.d, d1 = c.d1;
  require(2 * kappa > d + 2, Errc::invalid_argument, "kappa must exceed (d+2)/2");
  require(xgrid.nt == 1, Errc::invalid_argument, "spatial grid must have a single slice");
  require(xgrid.d == d, Errc::invalid_argument, "grid dimension must equal d");
  require(M >= 2, Errc::invalid_argument, "need at least two paths");
  require(T > t, Errc::invalid_argument, "terminal time must exceed the start time");
  std::int64_t steps = steps_for(T - t, h);
  {
    std::vector<double> xc(static_cast<std::size_t>(d));
    xgrid.cell_center(0, xc.data());
    detail::check_ellipticity(c, t, xc.data());
  }

  std::int64_t nsp = xgrid.spatial_count();
  double vol = xgrid.cell_volume();
  double sqrt_h = std::sqrt(h);
  NeumaierSum val, hw2;
  std::int64_t excluded = 0;
  std::vector<double> xc(static_cast<std::size_t>(d));

  for (std::int64_t node = 0; node < nsp; ++node) {
    xgrid.cell_center(node, xc.data());
    std::uint64_t seed_x = seed ^ (kSeedMix * (static_cast<std::uint64_t>(node) + 1));

    struct Partial {
      double s = 0.0, s2 = 0.0;
      std::int64_t used = 0, excl = 0;
    };
    Partial tot = chunked_reduce<Partial>(
        M, Partial{},
        [&](std::int64_t pb, std::int64_t pe) {
          Partial part;
          Stepper st(c);
          std::vector<double> x(static_cast<std::size_t>(d)), jac(static_cast<std::size_t>(d * d)),
              dw(static_cast<std::size_t>(d1));
          Eigen::MatrixXd jm(d, d);
          for (std::int64_t p = pb; p < pe; ++p) {
            std::copy(xc.begin(), xc.end(), x.begin());
            std::fill(jac.begin(), jac.end(), 0.0);
            for (int i = 0; i < d; ++i) jac[static_cast<std::size_t>(i * d + i)] = 1.0;
            bool ok = true;
            for (std::int64_t s = 0; s < steps && ok; ++s) {
              gauss_increments(seed_x, static_cast<std::uint64_t>(p), s, d1, sqrt_h, dw.data());
              ok = st.step(t + s * h, h, dw.data(), x.data(), jac.data(), d, 1e8);
            }
            if (!ok) {
              ++part.excl;
              continue;
            }
            double norm2;
            if (operator_norm) {
              for (int i = 0; i < d; ++i)
                for (int m = 0; m < d; ++m) jm(i, m) = jac[static_cast<std::size_t>(m * d + i)];
              Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jm.transpose() * jm);
              norm2 = es.eigenvalues().maxCoeff();
            } else {
              norm2 = 0.0;
              for (double v : jac) norm2 += v * v;
            }
            part.s += std::pow(norm2, kappa);
            part.s2 += std::pow(norm2, 2 * kappa);
            ++part.used;
          }
          return part;
        },
        [](Partial acc, const Partial& part) {
          acc.s += part.s;
          acc.s2 += part.s2;
          acc.used += part.used;
          acc.excl += part.excl;
          return acc;
        });

    require(tot.used > 1, Errc::numeric, "all paths blew up at a grid node");
    excluded += tot.excl;
    double m = static_cast<double>(tot.used);
    double mean = tot.s / m;
    double var = std::max(0.0, (tot.s2 - m * mean * mean) / (m - 1.0));
    double w = std::exp(-vec_norm(xc.data(), d)) * vol;
    val.add(mean * w);
    hw2.add(w * w * var / m);
  }

  DerivMomentReport rep;
  rep.value = val.value();
  rep.half_width = 1.96 * std::sqrt(hw2.value());
  rep.excluded_fraction =
      static_cast<double>(excluded) / (static_cast<double>(nsp) * static_cast<double>(M));
  rep.operator_norm = operator_norm;
  require(rep.excluded_fraction <= 0.001, Errc::numeric,
          "excluded-path fraction above 0.1%; run rejected");
  return rep;
}

PolyBallReport polynomial_ball_bound(const std::vector<std::vector<PolyBallCase>>& cases,
                                     int eta_dim, const double* x, int sample_count) {
  require(eta_dim >= 1 && eta_dim <= 5, Errc::invalid_argument, "eta dimension must be 1..5");
  require(sample_count >= 16, Errc::invalid_argument, "need at least 16 samples");
  require(!cases.empty(), Errc::invalid_argument, "need at least one case");
  std::vector<double> pts = unit_ball_points(eta_dim, sample_count);
  double ball = unit_ball_volume(eta_dim);

  PolyBallReport rep;
  rep.sample_count = sample_count;
  for (const auto& list : cases) {
    require(!list.empty(), Errc::invalid_argument, "empty case list");
    double lhs = 1.0;
    for (const auto& pc : list) {
      require(pc.poly.eta_dim == eta_dim, Errc::invalid_argument,
              "polynomial dimension mismatch");
      require(pc.power > 0.0, Errc::invalid_argument, "powers must be positive");
      lhs *= std::pow(pc.poly.coeff_max(x), pc.power);
    }
    NeumaierSum acc;
    for (int s = 0; s < sample_count; ++s) {
      double prod = 1.0;
      for (const auto& pc : list)
        prod *= std::pow(std::abs(pc.poly.eval(x, pts.data() + static_cast<std::ptrdiff_t>(s) * eta_dim)),
                         pc.power);
      acc.add(prod);
    }
    double integral = ball * acc.value() / static_cast<double>(sample_count);
    double ratio;
    if (lhs <= 0.0) {
      ratio = 0.0;
    } else if (integral <= 1e-12 * lhs) {
      ++rep.counter_candidates;
      ratio = HUGE_VAL;
    } else {
      ratio = lhs / integral;
    }
    rep.ratios.push_back(ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  return rep;
}

}  // namespace pf
