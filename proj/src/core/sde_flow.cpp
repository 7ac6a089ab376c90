#include "core/sde_flow.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/parallel.hpp"
#include "core/sde_internal.hpp"

namespace pf {

using detail::gauss_increments;
using detail::Stepper;
using detail::steps_for;

namespace detail {

void check_ellipticity(const SdeCoefficients& c, double t, const double* x) {
  require(c.delta > 0.0 && c.delta <= 1.0, Errc::invalid_argument, "delta must lie in (0, 1]");
  std::vector<double> sig(static_cast<std::size_t>(c.d * c.d1));
  c.sigma(t, x, sig.data());
  Eigen::MatrixXd a(c.d, c.d);
  for (int i = 0; i < c.d; ++i)
    for (int j = 0; j < c.d; ++j) {
      double v = 0.0;
      for (int k = 0; k < c.d1; ++k)
        v += sig[static_cast<std::size_t>(i * c.d1 + k)] *
             sig[static_cast<std::size_t>(j * c.d1 + k)];
      a(i, j) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  require(es.eigenvalues().minCoeff() >= c.delta * (1.0 - 1e-9) &&
              es.eigenvalues().maxCoeff() <= (1.0 / c.delta) * (1.0 + 1e-9),
          Errc::invalid_argument, "sigma sigma^T eigenvalues outside [delta, 1/delta]");
}

}  // namespace detail

SdeCoefficients identity_coefficients(int d) {
  SdeCoefficients c;
  c.d = d;
  c.d1 = d;
  c.delta = 1.0;
  c.sigma = [d](double, const double*, double* out) {
    for (int i = 0; i < d * d; ++i) out[i] = 0.0;
    for (int i = 0; i < d; ++i) out[i * d + i] = 1.0;
  };
  c.b = [d](double, const double*, double* out) {
    for (int i = 0; i < d; ++i) out[i] = 0.0;
  };
  c.dsigma = [d](double, const double*, double* out) {
    for (int i = 0; i < d * d * d; ++i) out[i] = 0.0;
  };
  c.db = [d](double, const double*, double* out) {
    for (int i = 0; i < d * d; ++i) out[i] = 0.0;
  };
  return c;
}

SdeCoefficients linear_drift_coefficients(int d, std::vector<double> a_matrix) {
  require(a_matrix.size() == static_cast<std::size_t>(d) * d, Errc::invalid_argument,
          "drift matrix must be d x d");
  SdeCoefficients c = identity_coefficients(d);
  auto a = std::make_shared<std::vector<double>>(std::move(a_matrix));
  c.b = [d, a](double, const double* x, double* out) {
    for (int i = 0; i < d; ++i) {
      double v = 0.0;
      for (int j = 0; j < d; ++j) v += (*a)[static_cast<std::size_t>(i * d + j)] * x[j];
      out[i] = v;
    }
  };
  c.db = [d, a](double, const double*, double* out) {
    for (int i = 0; i < d * d; ++i) out[i] = (*a)[static_cast<std::size_t>(i)];
  };
  return c;
}

SdeCoefficients singular_drift_coefficients(int d, double cc, double p0, double eps_mol) {
  require(p0 > 0.0, Errc::invalid_argument, "singular drift exponent must be positive");
  require(eps_mol >= 0.0, Errc::invalid_argument, "mollification scale must be nonnegative");
  SdeCoefficients c = identity_coefficients(d);
  // b(x) = cc * x * s^{-(p0+1)/2} with s = |x|^2 + eps^2, so |b| = cc / |x|^{p0}
  // away from the mollified core. s is floored so an exact hit of the origin
  // stays finite; the blow-up guard owns the rest.
  c.b = [d, cc, p0, eps_mol](double, const double* x, double* out) {
    double s = eps_mol * eps_mol;
    for (int i = 0; i < d; ++i) s += x[i] * x[i];
    double w = cc * std::pow(std::max(s, 1e-30), -0.5 * (p0 + 1.0));
    for (int i = 0; i < d; ++i) out[i] = w * x[i];
  };
  c.db = [d, cc, p0, eps_mol](double, const double* x, double* out) {
    double s = eps_mol * eps_mol;
    for (int i = 0; i < d; ++i) s += x[i] * x[i];
    s = std::max(s, 1e-30);
    double w = cc * std::pow(s, -0.5 * (p0 + 1.0));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out[i * d + j] = w * ((i == j ? 1.0 : 0.0) - (p0 + 1.0) * x[i] * x[j] / s);
  };
  return c;
}

int DirectionalPolynomial::degree() const {
  int deg = 0;
  for (const Term& t : terms) {
    int s = 0;
    for (int p : t.powers) s += p;
    deg = std::max(deg, s);
  }
  return deg;
}

double DirectionalPolynomial::eval(const double* x, const double* eta) const {
  double v = 0.0;
  for (const Term& t : terms) {
    double c = t.constant;
    if (t.coeff) {
      require(x != nullptr, Errc::invalid_argument, "x-dependent coefficient needs a point");
      c *= t.coeff(x);
    }
    for (int i = 0; i < eta_dim; ++i)
      for (int p = 0; p < t.powers[static_cast<std::size_t>(i)]; ++p) c *= eta[i];
    v += c;
  }
  return v;
}

double DirectionalPolynomial::coeff_max(const double* x) const {
  double m = 0.0;
  for (const Term& t : terms) {
    double c = t.constant;
    if (t.coeff) {
      require(x != nullptr, Errc::invalid_argument, "x-dependent coefficient needs a point");
      c *= t.coeff(x);
    }
    m = std::max(m, std::abs(c));
  }
  return m;
}

namespace {

void validate_request(const SdeCoefficients& c, const FlowRequest& req, bool need_eta) {
  require(req.x0.size() == static_cast<std::size_t>(c.d), Errc::invalid_argument,
          "x0 must have d entries");
  if (need_eta && !req.jacobian)
    require(req.eta0.size() == static_cast<std::size_t>(c.d), Errc::invalid_argument,
            "eta0 must have d entries");
  require(req.M >= 1, Errc::invalid_argument, "need at least one path");
  detail::check_ellipticity(c, req.t0, req.x0.data());
}

}  // namespace

FlowEnsemble simulate_flow(const SdeCoefficients& c, const FlowRequest& req) {
  validate_request(c, req, true);
  std::int64_t steps = steps_for(req.T, req.h);

  FlowEnsemble ens;
  ens.d = c.d;
  ens.d1 = c.d1;
  ens.steps = static_cast<int>(steps);
  ens.t0 = req.t0;
  ens.h = req.h;
  ens.T = req.T;
  ens.x0 = req.x0;
  ens.eta0 = req.jacobian ? std::vector<double>() : req.eta0;
  ens.seed = req.seed;
  ens.M = req.M;
  ens.excluded.assign(static_cast<std::size_t>(req.M), 0);

  int n_dirs = req.jacobian ? c.d : (req.eta0.empty() ? 0 : 1);
  if (req.store_paths) {
    double bytes = static_cast<double>(steps + 1) * static_cast<double>(req.M) * c.d *
                   (1.0 + n_dirs) * 8.0;
    require(bytes < 3e9, Errc::invalid_argument,
            "ensemble too large to store; lower M or disable path storage");
    ens.has_paths = true;
    ens.x.assign(static_cast<std::size_t>((steps + 1) * req.M * c.d), 0.0);
    if (n_dirs == 1) ens.eta.assign(ens.x.size(), 0.0);
    if (req.jacobian) ens.jac.assign(static_cast<std::size_t>((steps + 1) * req.M * c.d * c.d), 0.0);
  }

  double sqrt_h = std::sqrt(req.h);
  for_chunks(req.M, 256, [&](int, std::int64_t pb, std::int64_t pe) {
    Stepper stepper(c);
    std::vector<double> x(static_cast<std::size_t>(c.d));
    std::vector<double> dirs(static_cast<std::size_t>(std::max(1, n_dirs) * c.d));
    std::vector<double> dw(static_cast<std::size_t>(c.d1));
    for (std::int64_t p = pb; p < pe; ++p) {
      x = req.x0;
      if (req.jacobian) {
        std::fill(dirs.begin(), dirs.end(), 0.0);
        for (int i = 0; i < c.d; ++i) dirs[static_cast<std::size_t>(i * c.d + i)] = 1.0;
      } else if (n_dirs == 1) {
        std::copy(req.eta0.begin(), req.eta0.end(), dirs.begin());
      }
      auto record = [&](std::int64_t s) {
        if (!ens.has_paths) return;
        std::size_t base = static_cast<std::size_t>((p * (steps + 1) + s) * c.d);
        std::copy(x.begin(), x.end(), ens.x.begin() + static_cast<std::ptrdiff_t>(base));
        if (n_dirs == 1 && !req.jacobian)
          std::copy(dirs.begin(), dirs.begin() + c.d,
                    ens.eta.begin() + static_cast<std::ptrdiff_t>(base));
        if (req.jacobian)
          std::copy(dirs.begin(), dirs.end(),
                    ens.jac.begin() + static_cast<std::ptrdiff_t>(base) * c.d);
      };
      record(0);
      bool ok = true;
      for (std::int64_t s = 0; s < steps && ok; ++s) {
        gauss_increments(req.seed, static_cast<std::uint64_t>(p), s, c.d1, sqrt_h, dw.data());
        ok = stepper.step(req.t0 + s * req.h, req.h, dw.data(), x.data(), dirs.data(), n_dirs,
                          req.blowup_guard);
        if (ok) record(s + 1);
      }
      if (!ok) ens.excluded[static_cast<std::size_t>(p)] = 1;
    }
  });
  for (std::uint8_t e : ens.excluded) ens.excluded_count += e;
  return ens;
}

BumpReport jacobian_vs_bump(const SdeCoefficients& c, const FlowRequest& req, double eps) {
  validate_request(c, req, true);
  require(eps > 0.0, Errc::invalid_argument, "bump size must be positive");
  require(req.eta0.size() == static_cast<std::size_t>(c.d), Errc::invalid_argument,
          "eta0 must have d entries");
  std::int64_t steps = steps_for(req.T, req.h);
  double sqrt_h = std::sqrt(req.h);

  struct Partial {
    std::vector<double> dev;
    std::int64_t used = 0;
    std::int64_t excluded = 0;
  };
  Partial total = chunked_reduce<Partial>(
      req.M, Partial{std::vector<double>(static_cast<std::size_t>(steps + 1), 0.0), 0, 0},
      [&](std::int64_t pb, std::int64_t pe) {
        Partial part{std::vector<double>(static_cast<std::size_t>(steps + 1), 0.0), 0, 0};
        Stepper st_a(c), st_b(c);
        std::vector<double> x(static_cast<std::size_t>(c.d)), xb(static_cast<std::size_t>(c.d));
        std::vector<double> eta(static_cast<std::size_t>(c.d));
        std::vector<double> dw(static_cast<std::size_t>(c.d1));
        std::vector<double> dev(static_cast<std::size_t>(steps + 1));
        for (std::int64_t p = pb; p < pe; ++p) {
          x = req.x0;
          eta = req.eta0;
          for (int i = 0; i < c.d; ++i)
            xb[static_cast<std::size_t>(i)] = req.x0[static_cast<std::size_t>(i)] +
                                              eps * req.eta0[static_cast<std::size_t>(i)];
          bool ok = true;
          std::fill(dev.begin(), dev.end(), 0.0);
          for (std::int64_t s = 0; s < steps && ok; ++s) {
            double t = req.t0 + s * req.h;
            gauss_increments(req.seed, static_cast<std::uint64_t>(p), s, c.d1, sqrt_h, dw.data());
            ok = st_a.step(t, req.h, dw.data(), x.data(), eta.data(), 1, req.blowup_guard) &&
                 st_b.step(t, req.h, dw.data(), xb.data(), nullptr, 0, req.blowup_guard);
            if (!ok) break;
            double num = 0.0, emag = 0.0;
            for (int i = 0; i < c.d; ++i) {
              double diff = eta[static_cast<std::size_t>(i)] -
                            (xb[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) / eps;
              num += diff * diff;
              emag += eta[static_cast<std::size_t>(i)] * eta[static_cast<std::size_t>(i)];
            }
            dev[static_cast<std::size_t>(s + 1)] = std::sqrt(num) / (1.0 + std::sqrt(emag));
          }
          if (!ok) {
            ++part.excluded;
            continue;
          }
          ++part.used;
          for (std::size_t s = 0; s < dev.size(); ++s) part.dev[s] += dev[s];
        }
        return part;
      },
      [](Partial acc, const Partial& part) {
        for (std::size_t s = 0; s < acc.dev.size(); ++s) acc.dev[s] += part.dev[s];
        acc.used += part.used;
        acc.excluded += part.excluded;
        return acc;
      });

  require(total.used > 0, Errc::numeric, "all paths blew up");
  BumpReport rep;
  rep.excluded = total.excluded;
  rep.used_paths = total.used;
  for (double v : total.dev)
    rep.max_deviation = std::max(rep.max_deviation, v / static_cast<double>(total.used));
  return rep;
}

ChainRuleReport chain_rule_residual(const SdeCoefficients& c, const SmoothFn& f,
                                    const FlowRequest& req, double eps_x) {
  validate_request(c, req, true);
  require(f.value && f.grad, Errc::invalid_argument, "test function needs value and gradient");
  require(eps_x > 0.0, Errc::invalid_argument, "central-difference step must be positive");
  require(req.eta0.size() == static_cast<std::size_t>(c.d), Errc::invalid_argument,
          "eta0 must have d entries");
  std::int64_t steps = steps_for(req.T, req.h);
  double sqrt_h = std::sqrt(req.h);

  struct Partial {
    double lhs = 0.0, rhs = 0.0, diff = 0.0, diff2 = 0.0;
    std::int64_t used = 0;
  };
  Partial tot = chunked_reduce<Partial>(
      req.M, Partial{},
      [&](std::int64_t pb, std::int64_t pe) {
        Partial part;
        Stepper st_c(c), st_p(c), st_m(c);
        std::vector<double> xc(static_cast<std::size_t>(c.d)), xp(static_cast<std::size_t>(c.d)),
            xm(static_cast<std::size_t>(c.d)), eta(static_cast<std::size_t>(c.d)),
            grad(static_cast<std::size_t>(c.d)), dw(static_cast<std::size_t>(c.d1));
        for (std::int64_t p = pb; p < pe; ++p) {
          xc = req.x0;
          eta = req.eta0;
          for (int i = 0; i < c.d; ++i) {
            xp[static_cast<std::size_t>(i)] =
                req.x0[static_cast<std::size_t>(i)] + eps_x * req.eta0[static_cast<std::size_t>(i)];
            xm[static_cast<std::size_t>(i)] =
                req.x0[static_cast<std::size_t>(i)] - eps_x * req.eta0[static_cast<std::size_t>(i)];
          }
          bool ok = true;
          for (std::int64_t s = 0; s < steps && ok; ++s) {
            double t = req.t0 + s * req.h;
            gauss_increments(req.seed, static_cast<std::uint64_t>(p), s, c.d1, sqrt_h, dw.data());
            ok = st_c.step(t, req.h, dw.data(), xc.data(), eta.data(), 1, req.blowup_guard) &&
                 st_p.step(t, req.h, dw.data(), xp.data(), nullptr, 0, req.blowup_guard) &&
                 st_m.step(t, req.h, dw.data(), xm.data(), nullptr, 0, req.blowup_guard);
          }
          if (!ok) continue;
          f.grad(xc.data(), grad.data());
          double lhs = 0.0;
          for (int i = 0; i < c.d; ++i)
            lhs += grad[static_cast<std::size_t>(i)] * eta[static_cast<std::size_t>(i)];
          double rhs = (f.value(xp.data()) - f.value(xm.data())) / (2.0 * eps_x);
          part.lhs += lhs;
          part.rhs += rhs;
          part.diff += lhs - rhs;
          part.diff2 += (lhs - rhs) * (lhs - rhs);
          ++part.used;
        }
        return part;
      },
      [](Partial acc, const Partial& part) {
        acc.lhs += part.lhs;
        acc.rhs += part.rhs;
        acc.diff += part.diff;
        acc.diff2 += part.diff2;
        acc.used += part.used;
        return acc;
      });

  require(tot.used > 1, Errc::numeric, "not enough surviving paths");
  ChainRuleReport rep;
  double m = static_cast<double>(tot.used);
  rep.lhs = tot.lhs / m;
  rep.rhs = tot.rhs / m;
  double mean_diff = tot.diff / m;
  double var = std::max(0.0, (tot.diff2 - m * mean_diff * mean_diff) / (m - 1.0));
  double hw = 1.96 * std::sqrt(var / m);
  double denom = std::abs(rep.lhs) + std::abs(rep.rhs) + 1e-12;
  rep.residual = std::abs(rep.lhs - rep.rhs) / denom;
  rep.half_width = hw / denom;
  rep.inconclusive = rep.half_width > rep.residual;
  return rep;
}

StrongOrderReport strong_order_study(const SdeCoefficients& c, const FlowRequest& req,
                                     int levels) {
  validate_request(c, req, false);
  require(levels >= 2, Errc::invalid_argument, "need at least two levels");
  std::int64_t steps_base = steps_for(req.T, req.h);
  std::int64_t factor = std::int64_t{1} << levels;  // finest refinement vs base
  std::int64_t steps_fine = steps_base * factor;
  double h_fine = req.h / static_cast<double>(factor);
  double sqrt_h_fine = std::sqrt(h_fine);
  int n_levels = levels + 1;  // last one is the reference

  struct Partial {
    std::vector<double> err;
    std::int64_t used = 0;
  };
  Partial tot = chunked_reduce<Partial>(
      req.M, Partial{std::vector<double>(static_cast<std::size_t>(levels), 0.0), 0},
      [&](std::int64_t pb, std::int64_t pe) {
        Partial part{std::vector<double>(static_cast<std::size_t>(levels), 0.0), 0};
        Stepper st(c);
        std::vector<double> x(static_cast<std::size_t>(c.d));
        std::vector<double> dw(static_cast<std::size_t>(c.d1)), dw1(static_cast<std::size_t>(c.d1));
        std::vector<double> ends(static_cast<std::size_t>(n_levels * c.d));
        for (std::int64_t p = pb; p < pe; ++p) {
          bool ok = true;
          for (int l = 0; l < n_levels && ok; ++l) {
            std::int64_t ratio = std::int64_t{1} << (levels - l);
            std::int64_t steps_l = steps_fine / ratio;
            double h_l = req.h / static_cast<double>(std::int64_t{1} << l);
            x = req.x0;
            for (std::int64_t s = 0; s < steps_l && ok; ++s) {
              std::fill(dw.begin(), dw.end(), 0.0);
              for (std::int64_t fs = s * ratio; fs < (s + 1) * ratio; ++fs) {
                gauss_increments(req.seed, static_cast<std::uint64_t>(p), fs, c.d1, sqrt_h_fine,
                                 dw1.data());
                for (int k = 0; k < c.d1; ++k) dw[static_cast<std::size_t>(k)] += dw1[static_cast<std::size_t>(k)];
              }
              ok = st.step(req.t0 + s * h_l, h_l, dw.data(), x.data(), nullptr, 0,
                           req.blowup_guard);
            }
            std::copy(x.begin(), x.end(),
                      ends.begin() + static_cast<std::ptrdiff_t>(l) * c.d);
          }
          if (!ok) continue;
          ++part.used;
          const double* ref = ends.data() + static_cast<std::ptrdiff_t>(levels) * c.d;
          for (int l = 0; l < levels; ++l) {
            double e2 = 0.0;
            for (int i = 0; i < c.d; ++i) {
              double diff = ends[static_cast<std::size_t>(l * c.d + i)] - ref[i];
              e2 += diff * diff;
            }
            part.err[static_cast<std::size_t>(l)] += std::sqrt(e2);
          }
        }
        return part;
      },
      [](Partial acc, const Partial& part) {
        for (std::size_t l = 0; l < acc.err.size(); ++l) acc.err[l] += part.err[l];
        acc.used += part.used;
        return acc;
      });

  require(tot.used > 0, Errc::numeric, "all paths blew up");
  StrongOrderReport rep;
  for (int l = 0; l < levels; ++l) {
    rep.h_values.push_back(req.h / static_cast<double>(std::int64_t{1} << l));
    rep.errors.push_back(tot.err[static_cast<std::size_t>(l)] / static_cast<double>(tot.used));
  }
  for (int l = 0; l + 1 < levels; ++l)
    rep.slopes.push_back(std::log2(rep.errors[static_cast<std::size_t>(l)] /
                                   rep.errors[static_cast<std::size_t>(l + 1)]));
  return rep;
}

MomentSupReport moment_sup_report(const SdeCoefficients& c, double q, const FlowRequest& req,
                                  int n_deriv, double eps_bump) {
  validate_request(c, req, true);
  require(q > 0.0, Errc::invalid_argument, "q must be positive");
  require(n_deriv == 0 || n_deriv == 1, Errc::invalid_argument, "n_deriv must be 0 or 1");
  require(req.eta0.size() == static_cast<std::size_t>(c.d), Errc::invalid_argument,
          "eta0 must have d entries");
  std::int64_t steps = steps_for(req.T, req.h);
  double sqrt_h = std::sqrt(req.h);
  const std::vector<double> scales{1.0, 2.0, 4.0, 8.0};
  std::size_t k_scales = scales.size();

  struct Partial {
    double base = 0.0, x_only = 0.0, term_x = 0.0;
    std::vector<double> ladder;
    std::int64_t used = 0, excluded = 0;
  };
  Partial tot = chunked_reduce<Partial>(
      req.M, Partial{0.0, 0.0, 0.0, std::vector<double>(k_scales, 0.0), 0, 0},
      [&](std::int64_t pb, std::int64_t pe) {
        Partial part{0.0, 0.0, 0.0, std::vector<double>(k_scales, 0.0), 0, 0};
        Stepper st(c), st_b(c);
        std::vector<double> x(static_cast<std::size_t>(c.d)), xb(static_cast<std::size_t>(c.d)),
            eta(static_cast<std::size_t>(c.d)), dw(static_cast<std::size_t>(c.d1));
        std::vector<double> sup_ladder(k_scales);
        for (std::int64_t p = pb; p < pe; ++p) {
          x = req.x0;
          eta = req.eta0;
          bool bump = n_deriv == 1;
          if (bump)
            for (int i = 0; i < c.d; ++i)
              xb[static_cast<std::size_t>(i)] =
                  req.x0[static_cast<std::size_t>(i)] +
                  eps_bump * req.eta0[static_cast<std::size_t>(i)];
          double sup_base = 0.0, sup_x = 0.0;
          std::fill(sup_ladder.begin(), sup_ladder.end(), 0.0);
          bool ok = true;
          for (std::int64_t s = 0; s < steps && ok; ++s) {
            double t = req.t0 + s * req.h;
            gauss_increments(req.seed, static_cast<std::uint64_t>(p), s, c.d1, sqrt_h, dw.data());
            ok = st.step(t, req.h, dw.data(), x.data(), eta.data(), 1, req.blowup_guard);
            if (ok && bump)
              ok = st_b.step(t, req.h, dw.data(), xb.data(), nullptr, 0, req.blowup_guard);
            if (!ok) break;
            double dx2 = 0.0, eta2 = 0.0, xi2 = 0.0;
            for (int i = 0; i < c.d; ++i) {
              double dx = x[static_cast<std::size_t>(i)] - req.x0[static_cast<std::size_t>(i)];
              dx2 += dx * dx;
              eta2 += eta[static_cast<std::size_t>(i)] * eta[static_cast<std::size_t>(i)];
              if (bump) {
                double xi = (xb[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) /
                            eps_bump;
                xi2 += xi * xi;
              }
            }
            sup_base = std::max(sup_base, dx2 + eta2 + xi2);
            sup_x = std::max(sup_x, dx2);
            // eta_s is exactly linear in eta_0, so the ladder reuses this path.
            for (std::size_t k = 0; k < k_scales; ++k)
              sup_ladder[k] = std::max(sup_ladder[k], dx2 + scales[k] * scales[k] * eta2);
          }
          if (!ok) {
            ++part.excluded;
            continue;
          }
          ++part.used;
          part.base += std::pow(sup_base, 0.5 * q);
          part.x_only += std::pow(sup_x, 0.5 * q);
          double dxt2 = 0.0;
          for (int i = 0; i < c.d; ++i) {
            double dx = x[static_cast<std::size_t>(i)] - req.x0[static_cast<std::size_t>(i)];
            dxt2 += dx * dx;
          }
          part.term_x += std::pow(dxt2, 0.5 * q);
          for (std::size_t k = 0; k < k_scales; ++k)
            part.ladder[k] += std::pow(sup_ladder[k], 0.5 * q);
        }
        return part;
      },
      [](Partial acc, const Partial& part) {
        acc.base += part.base;
        acc.x_only += part.x_only;
        acc.term_x += part.term_x;
        for (std::size_t k = 0; k < acc.ladder.size(); ++k) acc.ladder[k] += part.ladder[k];
        acc.used += part.used;
        acc.excluded += part.excluded;
        return acc;
      });

  require(tot.used > 0, Errc::numeric, "all paths blew up");
  MomentSupReport rep;
  double m = static_cast<double>(tot.used);
  rep.estimate = tot.base / m;
  rep.estimate_x_only = tot.x_only / m;
  rep.doob_upper = q > 1.0 ? std::pow(q / (q - 1.0), q) * (tot.term_x / m) : 0.0;
  rep.excluded = tot.excluded;
  rep.ladder_scales = scales;
  for (std::size_t k = 0; k < k_scales; ++k) rep.ladder_estimates.push_back(tot.ladder[k] / m);
  std::size_t last = k_scales - 1;
  rep.fitted_m = (std::log(rep.ladder_estimates[last]) - std::log(rep.ladder_estimates[last - 1])) /
                 (std::log(scales[last]) - std::log(scales[last - 1]));
  return rep;
}

}  // namespace pf
