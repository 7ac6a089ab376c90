#include "core/kolmogorov.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"
#include "core/sde_internal.hpp"

namespace pf {

using detail::gauss_increments;
using detail::Stepper;

namespace {

bool advance(std::int64_t* z, const std::int64_t* sizes, int r) {
  for (int i = r - 1; i >= 0; --i) {
    if (++z[i] < sizes[i]) return true;
    z[i] = 0;
  }
  return false;
}

}  // namespace

MixedRadixLattice::MixedRadixLattice(std::vector<int> radices, int depth_)
    : r(static_cast<int>(radices.size())), c(std::move(radices)), depth(depth_) {
  require(r >= 1 && r <= 6, Errc::invalid_argument, "dimension count must be in [1, 6]");
  require(depth >= 0 && depth <= 20, Errc::invalid_argument, "depth must be in [0, 20]");
  for (int ci : c) require(ci >= 2, Errc::invalid_argument, "every radix must be at least 2");
  double pts = 1.0;
  for (int i = 0; i < r; ++i) pts *= static_cast<double>(pow_c(i, depth)) + 1.0;
  require(pts < 5e7, Errc::invalid_argument, "lattice too large; lower the depth");
}

std::int64_t MixedRadixLattice::pow_c(int axis, int e) const {
  std::int64_t v = 1;
  for (int j = 0; j < e; ++j) v *= c[static_cast<std::size_t>(axis)];
  return v;
}

std::int64_t MixedRadixLattice::axis_points(int axis, int level) const {
  return pow_c(axis, level) + 1;
}

std::int64_t MixedRadixLattice::point_count(int level) const {
  std::int64_t n = 1;
  for (int i = 0; i < r; ++i) n *= axis_points(i, level);
  return n;
}

double MixedRadixLattice::coord(int axis, std::int64_t zi, int level) const {
  return static_cast<double>(zi) / static_cast<double>(pow_c(axis, level));
}

LatticeField::LatticeField(MixedRadixLattice lat, double fill)
    : lattice(std::move(lat)),
      values(static_cast<std::size_t>(lattice.point_count(lattice.depth)), fill) {}

LatticeField LatticeField::from_function(const MixedRadixLattice& lat,
                                         const std::function<double(const double*)>& fn) {
  LatticeField f(lat);
  int r = lat.r;
  std::vector<std::int64_t> z(static_cast<std::size_t>(r), 0), sizes(static_cast<std::size_t>(r));
  std::vector<double> x(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) sizes[static_cast<std::size_t>(i)] = lat.axis_points(i, lat.depth);
  std::size_t flat = 0;
  do {
    for (int i = 0; i < r; ++i)
      x[static_cast<std::size_t>(i)] = lat.coord(i, z[static_cast<std::size_t>(i)], lat.depth);
    f.values[flat++] = fn(x.data());
  } while (advance(z.data(), sizes.data(), r));
  return f;
}

std::int64_t LatticeField::flat_index(const std::int64_t* z) const {
  std::int64_t idx = 0;
  for (int i = 0; i < lattice.r; ++i) {
    std::int64_t n = lattice.axis_points(i, lattice.depth);
    require(z[i] >= 0 && z[i] < n, Errc::invalid_argument, "lattice index out of range");
    idx = idx * n + z[i];
  }
  return idx;
}

double LatticeField::at_level(int level, const std::int64_t* z) const {
  std::int64_t idx = 0;
  for (int i = 0; i < lattice.r; ++i) {
    std::int64_t scale = lattice.pow_c(i, lattice.depth - level);
    idx = idx * lattice.axis_points(i, lattice.depth) + z[i] * scale;
  }
  return values[static_cast<std::size_t>(idx)];
}

IncrementCheck increment_condition_level(const LatticeField& u, double alpha) {
  const MixedRadixLattice& lat = u.lattice;
  require(lat.depth >= 2, Errc::invalid_argument, "need lattice depth at least 2");
  require(alpha > 0.0, Errc::invalid_argument, "alpha must be positive");
  int r = lat.r;

  IncrementCheck res;
  res.level_max.assign(static_cast<std::size_t>(lat.depth + 1), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(lat.depth + 1), 1);
  std::vector<std::int64_t> z(static_cast<std::size_t>(r)), zn(static_cast<std::size_t>(r)),
      sizes(static_cast<std::size_t>(r));
  for (int m = 0; m <= lat.depth; ++m) {
    double bound = std::exp2(-m * alpha);
    double tol_bound = bound * (1.0 + 1e-12);
    double worst = 0.0;
    std::fill(z.begin(), z.end(), 0);
    for (int i = 0; i < r; ++i) sizes[static_cast<std::size_t>(i)] = lat.axis_points(i, m);
    do {
      double u0 = u.at_level(m, z.data());
      for (int i = 0; i < r; ++i) {
        if (z[static_cast<std::size_t>(i)] + 1 >= sizes[static_cast<std::size_t>(i)]) continue;
        zn = z;
        ++zn[static_cast<std::size_t>(i)];
        double delta = std::abs(u.at_level(m, zn.data()) - u0);
        worst = std::max(worst, delta);
        if (delta > tol_bound && res.witness.level < m) {
          res.witness.level = m;
          res.witness.axis = i;
          res.witness.z1.assign(static_cast<std::size_t>(r), 0.0);
          res.witness.z2.assign(static_cast<std::size_t>(r), 0.0);
          for (int j = 0; j < r; ++j) {
            res.witness.z1[static_cast<std::size_t>(j)] = lat.coord(j, z[static_cast<std::size_t>(j)], m);
            res.witness.z2[static_cast<std::size_t>(j)] = lat.coord(j, zn[static_cast<std::size_t>(j)], m);
          }
          res.witness.delta = delta;
          res.witness.bound = bound;
        }
      }
    } while (advance(z.data(), sizes.data(), r));
    res.level_max[static_cast<std::size_t>(m)] = worst;
    ok[static_cast<std::size_t>(m)] = worst <= tol_bound ? 1 : 0;
  }

  int last_fail = -1;
  for (int m = 0; m <= lat.depth; ++m)
    if (!ok[static_cast<std::size_t>(m)]) last_fail = m;
  if (last_fail == lat.depth) {
    res.holds = false;
    res.n_star = -1;
  } else {
    res.holds = true;
    res.n_star = last_fail + 1;
  }
  return res;
}

HolderCertificate holder_certificate(const LatticeField& u, double alpha, int n_star,
                                     std::uint64_t seed) {
  const MixedRadixLattice& lat = u.lattice;
  require(alpha > 0.0, Errc::invalid_argument, "alpha must be positive");
  require(n_star >= 0, Errc::invalid_argument, "n_star must be non-negative");
  int r = lat.r;

  HolderCertificate cert;
  cert.alpha = alpha;
  cert.n_star = n_star;
  for (int i = 0; i < r; ++i) {
    cert.alpha_i.push_back(alpha / std::log2(static_cast<double>(lat.c[static_cast<std::size_t>(i)])));
    cert.validity_box.push_back(
        std::pow(static_cast<double>(lat.c[static_cast<std::size_t>(i)]), -(n_star + 1)));
  }

  std::vector<std::int64_t> w(static_cast<std::size_t>(r), 0), sizes(static_cast<std::size_t>(r));
  bool any = false;
  for (int i = 0; i < r; ++i) {
    if (lat.depth - n_star - 1 >= 0) w[static_cast<std::size_t>(i)] = lat.pow_c(i, lat.depth - n_star - 1);
    if (w[static_cast<std::size_t>(i)] > 0) any = true;
    sizes[static_cast<std::size_t>(i)] = lat.axis_points(i, lat.depth);
  }
  require(any, Errc::invalid_argument, "no admissible pairs at this depth");

  double cand = 1.0;
  for (int i = 0; i < r; ++i)
    cand *= static_cast<double>(sizes[static_cast<std::size_t>(i)]) *
            (2.0 * static_cast<double>(w[static_cast<std::size_t>(i)]) + 1.0);

  std::vector<double> inv_scale(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i)
    inv_scale[static_cast<std::size_t>(i)] =
        1.0 / static_cast<double>(lat.pow_c(i, lat.depth));
  auto pair_ratio = [&](const std::int64_t* z1, const std::int64_t* off) {
    double den = 0.0;
    std::int64_t z2[8];
    for (int i = 0; i < r; ++i) {
      z2[i] = z1[i] + off[i];
      if (off[i] != 0) {
        double dist = std::abs(static_cast<double>(off[i])) * inv_scale[static_cast<std::size_t>(i)];
        den = std::max(den, std::pow(dist, cert.alpha_i[static_cast<std::size_t>(i)]));
      }
    }
    double num = std::abs(u.at(z2) - u.at(z1));
    return num / den;
  };

  double best = 0.0;
  std::int64_t pairs = 0;
  if (cand <= 1e6) {
    cert.mode = "exhaustive";
    std::vector<std::int64_t> z(static_cast<std::size_t>(r), 0), off(static_cast<std::size_t>(r), 0),
        off_sizes(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i)
      off_sizes[static_cast<std::size_t>(i)] = 2 * w[static_cast<std::size_t>(i)] + 1;
    do {
      std::vector<std::int64_t> o(static_cast<std::size_t>(r), 0);
      std::vector<std::int64_t> oidx(static_cast<std::size_t>(r), 0);
      do {
        for (int i = 0; i < r; ++i)
          o[static_cast<std::size_t>(i)] = oidx[static_cast<std::size_t>(i)] - w[static_cast<std::size_t>(i)];
        // positive-lexicographic offsets cover every unordered pair once
        int first_nz = -1;
        for (int i = 0; i < r; ++i)
          if (o[static_cast<std::size_t>(i)] != 0) {
            first_nz = i;
            break;
          }
        if (first_nz < 0 || o[static_cast<std::size_t>(first_nz)] < 0) continue;
        bool in_range = true;
        for (int i = 0; i < r && in_range; ++i) {
          std::int64_t zi = z[static_cast<std::size_t>(i)] + o[static_cast<std::size_t>(i)];
          in_range = zi >= 0 && zi < sizes[static_cast<std::size_t>(i)];
        }
        if (!in_range) continue;
        best = std::max(best, pair_ratio(z.data(), o.data()));
        ++pairs;
      } while (advance(oidx.data(), off_sizes.data(), r));
    } while (advance(z.data(), sizes.data(), r));
  } else {
    cert.mode = "sampled";
    const std::int64_t target = 1000000;
    std::uint64_t ctr = 0;
    std::vector<std::int64_t> z(static_cast<std::size_t>(r)), o(static_cast<std::size_t>(r));
    while (pairs < target) {
      bool nonzero = false, in_range = true;
      for (int i = 0; i < r; ++i) {
        std::int64_t n = sizes[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(i)] = std::min<std::int64_t>(
            n - 1, static_cast<std::int64_t>(uniform_draw(seed, 0, ctr++) * static_cast<double>(n)));
        std::int64_t wi = w[static_cast<std::size_t>(i)];
        o[static_cast<std::size_t>(i)] =
            static_cast<std::int64_t>(uniform_draw(seed, 0, ctr++) * (2.0 * static_cast<double>(wi) + 1.0)) - wi;
        if (o[static_cast<std::size_t>(i)] != 0) nonzero = true;
        std::int64_t zi = z[static_cast<std::size_t>(i)] + o[static_cast<std::size_t>(i)];
        if (zi < 0 || zi >= n) in_range = false;
      }
      if (!nonzero || !in_range) continue;
      best = std::max(best, pair_ratio(z.data(), o.data()));
      ++pairs;
    }
  }
  require(pairs > 0, Errc::invalid_argument, "no admissible pairs at this depth");
  cert.n_measured = best;
  cert.pair_count = pairs;
  return cert;
}

double continuity_extension(const LatticeField& u, const double* query, int depth) {
  const MixedRadixLattice& lat = u.lattice;
  require(depth >= 0 && depth <= lat.depth, Errc::invalid_argument,
          "depth exceeds the stored lattice");
  std::int64_t z[8];
  for (int i = 0; i < lat.r; ++i) {
    double q = query[i];
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "query outside the unit box");
    double v = q * static_cast<double>(lat.pow_c(i, depth));
    double rounded = std::nearbyint(v);
    std::int64_t zi;
    if (std::abs(v - rounded) <= 1e-9 * std::max(1.0, std::abs(v)))
      zi = static_cast<std::int64_t>(rounded);
    else
      zi = static_cast<std::int64_t>(std::floor(v));
    zi = std::max<std::int64_t>(0, std::min(zi, lat.pow_c(i, depth)));
    z[i] = zi;
  }
  return u.at_level(depth, z);
}

LatticeFlowEnsemble sample_flow_on_lattice(const SdeCoefficients& c, int depth, std::int64_t M,
                                           std::uint64_t seed, double time_scale, double box_lo,
                                           double box_scale) {
  require(depth >= 1 && depth <= 10, Errc::invalid_argument, "depth must be in [1, 10]");
  require(M >= 1, Errc::invalid_argument, "need at least one realization");
  require(time_scale > 0.0 && box_scale > 0.0, Errc::invalid_argument,
          "time and box scales must be positive");
  int d = c.d;

  LatticeFlowEnsemble ens;
  ens.d = d;
  ens.depth = depth;
  ens.M = M;
  ens.seed = seed;
  ens.time_scale = time_scale;
  ens.box_lo = box_lo;
  ens.box_scale = box_scale;
  std::int64_t steps = std::int64_t{1} << (2 * depth);
  ens.nt = steps + 1;
  std::int64_t ax = ens.axis_pts();
  ens.nsp = 1;
  for (int i = 0; i < d; ++i) ens.nsp *= ax;
  double bytes = static_cast<double>(M) * static_cast<double>(ens.nt) *
                 static_cast<double>(ens.nsp) * d * 8.0;
  require(bytes < 3.5e9, Errc::invalid_argument, "lattice ensemble too large; lower depth or M");
  ens.values.assign(static_cast<std::size_t>(M * ens.nt * ens.nsp * d), 0.0);

  {
    std::vector<double> probe(static_cast<std::size_t>(d), box_lo + 0.5 * box_scale);
    detail::check_ellipticity(c, 0.0, probe.data());
    Stepper probe_stepper(c);  // validate before entering workers
  }

  double h = time_scale / static_cast<double>(steps);
  double sqrt_h = std::sqrt(h);
  double inv_fx = 1.0 / static_cast<double>(std::int64_t{1} << depth);
  std::atomic<std::int64_t> bad{0};
  for_chunks(M * ens.nsp, 256, [&](int, std::int64_t wb, std::int64_t we) {
    Stepper st(c);
    std::vector<double> x(static_cast<std::size_t>(d)), dw(static_cast<std::size_t>(c.d1));
    for (std::int64_t w = wb; w < we; ++w) {
      std::int64_t real = w / ens.nsp, js = w % ens.nsp;
      std::int64_t rem = js;
      for (int i = d - 1; i >= 0; --i) {
        x[static_cast<std::size_t>(i)] = box_lo + box_scale * (static_cast<double>(rem % ax) * inv_fx);
        rem /= ax;
      }
      double* out = ens.values.data() + static_cast<std::ptrdiff_t>((real * ens.nt * ens.nsp + js) * d);
      std::copy(x.begin(), x.end(), out);
      bool ok = true;
      for (std::int64_t s = 0; s < steps && ok; ++s) {
        gauss_increments(seed, static_cast<std::uint64_t>(real), s, c.d1, sqrt_h, dw.data());
        ok = st.step(s * h, h, dw.data(), x.data(), nullptr, 0, 1e8);
        if (ok) {
          out = ens.values.data() +
                static_cast<std::ptrdiff_t>(((real * ens.nt + s + 1) * ens.nsp + js) * d);
          std::copy(x.begin(), x.end(), out);
        }
      }
      if (!ok) bad.fetch_add(1);
    }
  });
  require(bad.load() == 0, Errc::numeric, "flow sample diverged; shrink the box or the drift");
  return ens;
}

namespace {

double diff_norm(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double v = a[i] - b[i];
    s += v * v;
  }
  return std::sqrt(s);
}

/// Decodes a level-m spatial lattice index into a finest-level flat index.
std::int64_t level_to_finest(std::int64_t js_m, std::int64_t am, std::int64_t ax,
                             std::int64_t scale, int d) {
  std::int64_t js = 0, digits[8];
  for (int i = d - 1; i >= 0; --i) {
    digits[i] = js_m % am;
    js_m /= am;
  }
  for (int i = 0; i < d; ++i) js = js * ax + digits[i] * scale;
  return js;
}

}  // namespace

FlowHolderReport flow_holder_check(const LatticeFlowEnsemble& ens, double alpha, double gamma,
                                   double kappa, double K, std::uint64_t pair_seed) {
  int d = ens.d;
  int depth = ens.depth;
  require(ens.M >= 2 && !ens.values.empty(), Errc::invalid_argument,
          "ensemble must hold at least two realizations");
  require(depth >= 3, Errc::invalid_argument,
          "insufficient lattice depth: need at least four levels");
  require(2.0 * kappa > d + 2, Errc::invalid_argument, "kappa must exceed (d+2)/2");
  require(gamma >= 2.0 * kappa, Errc::invalid_argument,
          "hypothesis violated: gamma >= 2*kappa required");
  double alpha_cap = 1.0 - (d + 2) / (2.0 * kappa);
  require(alpha > 0.0 && alpha < alpha_cap, Errc::invalid_argument,
          "hypothesis violated: alpha < 1 - (d+2)/(2*kappa) required");

  FlowHolderReport rep;
  rep.alpha = alpha;
  rep.gamma = gamma;
  rep.kappa = kappa;
  rep.realizations = ens.M;
  std::int64_t ax = ens.axis_pts();
  std::int64_t M = ens.M;

  // Fitted constant of the time-increment moment hypothesis: max over
  // level-m adjacent time pairs and level-m spatial points of the
  // realization-mean of |du|^gamma, rescaled by |t-s|^{1/2}.
  double kt = 0.0;
  for (int m = 0; m <= depth; ++m) {
    std::int64_t st_t = std::int64_t{1} << (2 * (depth - m));
    std::int64_t scale = std::int64_t{1} << (depth - m);
    std::int64_t am = (std::int64_t{1} << m) + 1;
    std::int64_t nsp_m = 1;
    for (int i = 0; i < d; ++i) nsp_m *= am;
    std::int64_t n_tpairs = std::int64_t{1} << (2 * m);
    double dt_m = std::pow(4.0, -m);
    double level_best = chunked_reduce<double>(
        nsp_m, 0.0,
        [&](std::int64_t jb, std::int64_t je) {
          double local = 0.0;
          for (std::int64_t jm = jb; jm < je; ++jm) {
            std::int64_t js = level_to_finest(jm, am, ax, scale, d);
            for (std::int64_t a = 0; a < n_tpairs; ++a) {
              std::int64_t jt1 = a * st_t, jt2 = (a + 1) * st_t;
              double mean = 0.0;
              for (std::int64_t real = 0; real < M; ++real)
                mean += std::pow(diff_norm(ens.value(real, jt1, js), ens.value(real, jt2, js), d),
                                 gamma);
              local = std::max(local, mean / static_cast<double>(M));
            }
          }
          return local;
        },
        [](double acc, double v) { return std::max(acc, v); }, 64);
    kt = std::max(kt, std::pow(level_best, 1.0 / gamma) / std::sqrt(dt_m));
  }
  rep.k_time = kt;

  // Fitted constant of the spatial sup-ratio hypothesis at a coarse set of
  // times: per-realization sup over a fixed pair set, realization-mean per
  // time, max over times.
  {
    std::vector<std::int64_t> p1, p2;
    std::vector<double> wdist;  // |x-y|^{2 kappa - d} per pair
    double inv_fx = 1.0 / static_cast<double>(std::int64_t{1} << depth);
    // same-axis neighbors at every level
    for (int m = 1; m <= depth; ++m) {
      std::int64_t scale = std::int64_t{1} << (depth - m);
      std::int64_t am = (std::int64_t{1} << m) + 1;
      std::int64_t nsp_m = 1;
      for (int i = 0; i < d; ++i) nsp_m *= am;
      for (std::int64_t jm = 0; jm < nsp_m; ++jm) {
        std::int64_t js = level_to_finest(jm, am, ax, scale, d);
        std::int64_t rem = jm, digits[8];
        for (int i = d - 1; i >= 0; --i) {
          digits[i] = rem % am;
          rem /= am;
        }
        std::int64_t stride = 1;
        for (int i = d - 1; i >= 0; --i) {
          if (digits[i] + 1 < am) {
            p1.push_back(js);
            p2.push_back(js + scale * stride);
            wdist.push_back(std::pow(static_cast<double>(scale) * inv_fx, 2.0 * kappa - d));
          }
          stride *= ax;
        }
      }
    }
    // seeded uniform far pairs
    std::uint64_t ctr = 0;
    int added = 0;
    while (added < 1500) {
      std::int64_t a = 0, b = 0;
      double dist2 = 0.0;
      for (int i = 0; i < d; ++i) {
        auto za = static_cast<std::int64_t>(uniform_draw(pair_seed, 2, ctr++) * static_cast<double>(ax));
        auto zb = static_cast<std::int64_t>(uniform_draw(pair_seed, 2, ctr++) * static_cast<double>(ax));
        za = std::min(za, ax - 1);
        zb = std::min(zb, ax - 1);
        a = a * ax + za;
        b = b * ax + zb;
        double dx = static_cast<double>(za - zb) * inv_fx;
        dist2 += dx * dx;
      }
      if (a == b) continue;
      p1.push_back(a);
      p2.push_back(b);
      wdist.push_back(std::pow(std::sqrt(dist2), 2.0 * kappa - d));
      ++added;
    }

    int tm = std::min(2, depth);
    std::int64_t t_stride = std::int64_t{1} << (2 * (depth - tm));
    std::int64_t n_times = (std::int64_t{1} << (2 * tm)) + 1;
    std::vector<double> time_sums = chunked_reduce<std::vector<double>>(
        M, std::vector<double>(static_cast<std::size_t>(n_times), 0.0),
        [&](std::int64_t rb, std::int64_t re) {
          std::vector<double> sums(static_cast<std::size_t>(n_times), 0.0);
          for (std::int64_t real = rb; real < re; ++real)
            for (std::int64_t ti = 0; ti < n_times; ++ti) {
              std::int64_t jt = ti * t_stride;
              double sup = 0.0;
              for (std::size_t q = 0; q < p1.size(); ++q) {
                double num = std::pow(
                    diff_norm(ens.value(real, jt, p1[q]), ens.value(real, jt, p2[q]), d),
                    2.0 * kappa);
                sup = std::max(sup, num / wdist[q]);
              }
              sums[static_cast<std::size_t>(ti)] += sup;
            }
          return sums;
        },
        [](std::vector<double> acc, const std::vector<double>& v) {
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
          return acc;
        },
        64);
    double ks = 0.0;
    for (double s : time_sums) ks = std::max(ks, s / static_cast<double>(M));
    rep.k_space = std::pow(ks, 1.0 / (2.0 * kappa));
  }

  rep.k_used = K > 0.0 ? K : std::max(rep.k_time, rep.k_space);

  // Joint-modulus pair buckets per candidate n: |t-s| <= 2^{-n}, ||x-y|| <= 2^{-n}.
  std::int64_t ft = std::int64_t{1} << (2 * depth);
  double inv_ft = 1.0 / static_cast<double>(ft);
  double inv_fx = 1.0 / static_cast<double>(std::int64_t{1} << depth);
  struct ModPair {
    std::int64_t jt1, js1, jt2, js2;
    double den;  // |t-s|^{alpha/2} + |x-y|^alpha
  };
  std::vector<std::vector<ModPair>> buckets(static_cast<std::size_t>(depth + 1));
  {
    std::uint64_t ctr = 0;
    for (int n = 0; n <= depth; ++n) {
      std::int64_t bt = std::min(ft, std::int64_t{1} << (2 * depth - n));
      std::int64_t bx = std::max<std::int64_t>(1, std::int64_t{1} << (depth - n));
      auto& bucket = buckets[static_cast<std::size_t>(n)];
      while (bucket.size() < 600) {
        std::int64_t jt1 = static_cast<std::int64_t>(uniform_draw(pair_seed, 3, ctr++) *
                                                     static_cast<double>(ens.nt));
        jt1 = std::min(jt1, ens.nt - 1);
        std::int64_t dt = static_cast<std::int64_t>(uniform_draw(pair_seed, 3, ctr++) *
                                                    static_cast<double>(2 * bt + 1)) - bt;
        std::int64_t jt2 = jt1 + dt;
        if (jt2 < 0 || jt2 >= ens.nt) continue;
        std::int64_t js1 = 0, js2 = 0;
        double dist2 = 0.0;
        bool okp = true;
        for (int i = 0; i < d; ++i) {
          auto za = static_cast<std::int64_t>(uniform_draw(pair_seed, 3, ctr++) * static_cast<double>(ax));
          za = std::min(za, ax - 1);
          std::int64_t dz = static_cast<std::int64_t>(uniform_draw(pair_seed, 3, ctr++) *
                                                      static_cast<double>(2 * bx + 1)) - bx;
          std::int64_t zb = za + dz;
          if (zb < 0 || zb >= ax) {
            okp = false;
            break;
          }
          js1 = js1 * ax + za;
          js2 = js2 * ax + zb;
          double dx = static_cast<double>(dz) * inv_fx;
          dist2 += dx * dx;
        }
        if (!okp) continue;
        if (jt1 == jt2 && js1 == js2) continue;
        double den = std::pow(std::abs(static_cast<double>(jt1 - jt2)) * inv_ft, alpha / 2.0) +
                     std::pow(std::sqrt(dist2), alpha);
        bucket.push_back({jt1, js1, jt2, js2, den});
      }
    }
  }

  // Per-realization event scan: V_m = max level-m increment (time pairs at
  // shared x, sup-norm spatial neighbors at shared t); A_n holds when
  // V_m <= K 2^{-m alpha} for all m >= n.
  struct Partial {
    std::vector<double> space_max;           // per level, axis-only
    std::vector<std::int64_t> fail;          // per n
    std::vector<std::int64_t> nhist;         // minimal-n histogram + none bin
    std::vector<double> moduli;              // per-realization (3.3.5) ratio
    std::int64_t no_n = 0;
  };
  Partial init;
  init.space_max.assign(static_cast<std::size_t>(depth + 1), 0.0);
  init.fail.assign(static_cast<std::size_t>(depth + 1), 0);
  init.nhist.assign(static_cast<std::size_t>(depth + 2), 0);
  double k_tol = rep.k_used * (1.0 + 1e-12);

  Partial tot = chunked_reduce<Partial>(
      M, init,
      [&](std::int64_t rb, std::int64_t re) {
        Partial part = init;
        std::vector<double> vm(static_cast<std::size_t>(depth + 1));
        std::int64_t digits[8];
        for (std::int64_t real = rb; real < re; ++real) {
          std::fill(vm.begin(), vm.end(), 0.0);
          for (int m = 0; m <= depth; ++m) {
            std::int64_t st_t = std::int64_t{1} << (2 * (depth - m));
            std::int64_t scale = std::int64_t{1} << (depth - m);
            std::int64_t am = (std::int64_t{1} << m) + 1;
            std::int64_t nsp_m = 1;
            for (int i = 0; i < d; ++i) nsp_m *= am;
            std::int64_t nt_m = (std::int64_t{1} << (2 * m)) + 1;
            double worst = 0.0, axis_worst = 0.0;
            for (std::int64_t jm = 0; jm < nsp_m; ++jm) {
              std::int64_t rem = jm;
              for (int i = d - 1; i >= 0; --i) {
                digits[i] = rem % am;
                rem /= am;
              }
              std::int64_t js = 0;
              for (int i = 0; i < d; ++i) js = js * ax + digits[i] * scale;
              // (i) adjacent level-m time pairs at this x
              for (std::int64_t a = 0; a + 1 < nt_m; ++a)
                worst = std::max(worst, diff_norm(ens.value(real, a * st_t, js),
                                                  ens.value(real, (a + 1) * st_t, js), d));
              // (ii) spatial sup-norm neighbors at level-m times
              std::int64_t o_sizes[8];
              std::int64_t oidx[8] = {0};
              for (int i = 0; i < d; ++i) o_sizes[i] = 3;
              for (;;) {
                std::int64_t o[8];
                int first_nz = -1;
                bool in_range = true;
                std::int64_t js2 = 0;
                for (int i = 0; i < d; ++i) {
                  o[i] = oidx[i] - 1;
                  if (o[i] != 0 && first_nz < 0) first_nz = i;
                  std::int64_t zi = digits[i] + o[i];
                  if (zi < 0 || zi >= am) in_range = false;
                  js2 = js2 * ax + (in_range ? zi * scale : 0);
                }
                bool use = in_range && first_nz >= 0 && o[first_nz] > 0;
                if (use) {
                  bool axis_pair = true;
                  int nz = 0;
                  for (int i = 0; i < d; ++i)
                    if (o[i] != 0) ++nz;
                  axis_pair = nz == 1;
                  for (std::int64_t a = 0; a < nt_m; ++a) {
                    double delta =
                        diff_norm(ens.value(real, a * st_t, js), ens.value(real, a * st_t, js2), d);
                    worst = std::max(worst, delta);
                    if (axis_pair) axis_worst = std::max(axis_worst, delta);
                  }
                }
                if (!advance(oidx, o_sizes, d)) break;
              }
            }
            vm[static_cast<std::size_t>(m)] = worst;
            part.space_max[static_cast<std::size_t>(m)] =
                std::max(part.space_max[static_cast<std::size_t>(m)], axis_worst);
          }
          // suffix scan for the minimal admissible n
          double suffix = 0.0;
          int n_min = -1;
          for (int n = depth; n >= 0; --n) {
            suffix = std::max(suffix, vm[static_cast<std::size_t>(n)] * std::exp2(n * alpha));
            if (suffix > k_tol)
              ++part.fail[static_cast<std::size_t>(n)];
            else
              n_min = n;
          }
          if (n_min < 0) {
            ++part.no_n;
            ++part.nhist[static_cast<std::size_t>(depth + 1)];
          } else {
            ++part.nhist[static_cast<std::size_t>(n_min)];
            double ratio = 0.0;
            for (const ModPair& mp : buckets[static_cast<std::size_t>(n_min)])
              ratio = std::max(ratio, diff_norm(ens.value(real, mp.jt1, mp.js1),
                                                ens.value(real, mp.jt2, mp.js2), d) /
                                          (rep.k_used * mp.den));
            part.moduli.push_back(ratio);
          }
        }
        return part;
      },
      [](Partial acc, const Partial& part) {
        for (std::size_t i = 0; i < acc.space_max.size(); ++i)
          acc.space_max[i] = std::max(acc.space_max[i], part.space_max[i]);
        for (std::size_t i = 0; i < acc.fail.size(); ++i) acc.fail[i] += part.fail[i];
        for (std::size_t i = 0; i < acc.nhist.size(); ++i) acc.nhist[i] += part.nhist[i];
        acc.moduli.insert(acc.moduli.end(), part.moduli.begin(), part.moduli.end());
        acc.no_n += part.no_n;
        return acc;
      },
      64);

  rep.level_space_max = tot.space_max;
  rep.n_star_counts = tot.nhist;
  rep.no_n_count = tot.no_n;
  for (int n = 0; n <= depth; ++n)
    rep.failure_rate.push_back(static_cast<double>(tot.fail[static_cast<std::size_t>(n)]) /
                               static_cast<double>(M));

  double slope_sum = 0.0;
  int slope_count = 0;
  for (int m = 0; m < depth; ++m) {
    double a = tot.space_max[static_cast<std::size_t>(m)];
    double b = tot.space_max[static_cast<std::size_t>(m + 1)];
    if (a > 0.0 && b > 0.0) {
      slope_sum += std::log2(a / b);
      ++slope_count;
    }
  }
  rep.spatial_exponent = slope_count > 0 ? slope_sum / slope_count : 0.0;
  for (int m = 0; m <= depth; ++m)
    rep.spatial_modulus =
        std::max(rep.spatial_modulus, tot.space_max[static_cast<std::size_t>(m)] *
                                          std::exp2(m * rep.spatial_exponent));

  if (!tot.moduli.empty()) {
    std::vector<double> sorted = tot.moduli;
    std::sort(sorted.begin(), sorted.end());
    rep.modulus_max = sorted.back();
    std::size_t n = sorted.size();
    rep.modulus_median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  return rep;
}

}  // namespace pf
