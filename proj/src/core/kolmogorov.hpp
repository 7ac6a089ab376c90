#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/sde_flow.hpp"

namespace pf {

/// Mixed-radix lattice on [0,1]^r: level-m points are (z^i c_i^{-m}) with
/// z^i in {0,...,c_i^m}. Level-m points embed in level m+1; the level-m
/// lattice has prod_i (c_i^m + 1) points.
struct MixedRadixLattice {
  int r = 1;
  std::vector<int> c;
  int depth = 1;

  MixedRadixLattice() : c{2} {}
  MixedRadixLattice(std::vector<int> radices, int depth_);

  std::int64_t pow_c(int axis, int e) const;
  std::int64_t axis_points(int axis, int level) const;  // c_i^level + 1
  std::int64_t point_count(int level) const;
  double coord(int axis, std::int64_t zi, int level) const;  // zi * c_i^{-level}
};

/// Scalar field stored on the finest lattice level; coarser levels read
/// through the embedding, so a level-m point has exactly one value.
struct LatticeField {
  MixedRadixLattice lattice;
  std::vector<double> values;

  LatticeField() = default;
  explicit LatticeField(MixedRadixLattice lat, double fill = 0.0);
  static LatticeField from_function(const MixedRadixLattice& lat,
                                    const std::function<double(const double*)>& fn);

  std::int64_t flat_index(const std::int64_t* z) const;  // finest-level multi-index
  double at(const std::int64_t* z) const { return values[static_cast<std::size_t>(flat_index(z))]; }
  double& at(const std::int64_t* z) { return values[static_cast<std::size_t>(flat_index(z))]; }
  /// Value at a level-m multi-index via the embedding.
  double at_level(int level, const std::int64_t* z) const;
};

struct IncrementWitness {
  int level = -1;
  int axis = -1;
  std::vector<double> z1, z2;
  double delta = 0.0;
  double bound = 0.0;
};

/// Result of the level-increment hypothesis scan.
struct IncrementCheck {
  bool holds = false;
  int n_star = -1;                  // minimal admissible n when holds
  IncrementWitness witness;         // a violating pair at the deepest level otherwise
  std::vector<double> level_max;    // max axis-neighbor increment per level
};

/// Exhaustively checks |u(z1)-u(z2)| <= 2^{-m alpha} for axis-neighbor pairs
/// at every level m and returns the minimal n valid through the stored depth.
IncrementCheck increment_condition_level(const LatticeField& u, double alpha);

struct HolderCertificate {
  double alpha = 0.0;
  int n_star = 0;
  std::vector<double> alpha_i;       // alpha * ln 2 / ln c_i (exactly alpha/2 for radix 4)
  double n_measured = 0.0;
  std::string mode;                  // "exhaustive" or "sampled"
  std::int64_t pair_count = 0;
  std::vector<double> validity_box;  // admissible |z1^i - z2^i| <= c_i^{-n_star-1}
};

/// N_measured = max |u(z1)-u(z2)| / max_i |z1^i-z2^i|^{alpha_i} over pairs
/// inside the validity box: exhaustive up to ~1e6 candidate pairs, seeded
/// uniform pair sampling above.
HolderCertificate holder_certificate(const LatticeField& u, double alpha, int n_star,
                                     std::uint64_t seed = 11);

/// Value of u at the level-`depth` radix truncation of a query in [0,1]^r.
double continuity_extension(const LatticeField& u, const double* query, int depth);

/// Flow samples x_t(0, x) on the parabolic mixed-radix lattice: 4-adic time,
/// 2-adic space, all initial points of one realization driven by the same
/// increment stream. Lattice coordinates map affinely onto the flow domain
/// (t = time_scale * z^1, x_i = box_lo + box_scale * z^{1+i}).
struct LatticeFlowEnsemble {
  int d = 2;
  int depth = 3;
  std::int64_t M = 0;
  std::uint64_t seed = 0;
  double time_scale = 1.0;
  double box_lo = 0.0;
  double box_scale = 1.0;
  std::int64_t nt = 0;   // 4^depth + 1
  std::int64_t nsp = 0;  // (2^depth + 1)^d
  std::vector<double> values;  // [((real*nt + jt)*nsp + js)*d + i]

  std::int64_t axis_pts() const { return (std::int64_t{1} << depth) + 1; }
  const double* value(std::int64_t real, std::int64_t jt, std::int64_t js) const {
    return values.data() + static_cast<std::ptrdiff_t>(((real * nt + jt) * nsp + js)) * d;
  }
};

LatticeFlowEnsemble sample_flow_on_lattice(const SdeCoefficients& c, int depth, std::int64_t M,
                                           std::uint64_t seed, double time_scale = 1.0,
                                           double box_lo = 0.0, double box_scale = 1.0);

struct FlowHolderReport {
  double alpha = 0.0, gamma = 0.0, kappa = 0.0;
  double k_time = 0.0;   // fitted constant of E|u(t,x)-u(s,x)|^gamma <= K^gamma |t-s|^{gamma/2}
  double k_space = 0.0;  // fitted constant of E sup |u(t,x)-u(t,y)|^{2k}/|x-y|^{2k-d} <= K^{2k}
  double k_used = 0.0;   // the K entering the events (input when > 0, else the fitted max)
  double spatial_exponent = 0.0;  // mean log2 slope of the level-max axis increments
  double spatial_modulus = 0.0;   // max_m 2^{m*exponent} * (max level-m same-time axis-neighbor |du|)
  std::vector<double> level_space_max;
  std::vector<double> failure_rate;         // empirical P(A_n^c), n = 0..depth
  std::vector<std::int64_t> n_star_counts;  // histogram of the minimal n; last bin = none found
  double modulus_max = 0.0;       // per-realization joint-modulus ratios
  double modulus_median = 0.0;
  std::int64_t realizations = 0;
  std::int64_t no_n_count = 0;
};

/// Empirical two-hypothesis moment check, per-realization joint modulus, and
/// the event-failure-rate curve for the lattice-sampled flow.
FlowHolderReport flow_holder_check(const LatticeFlowEnsemble& ens, double alpha, double gamma,
                                   double kappa, double K = 0.0, std::uint64_t pair_seed = 17);

}  // namespace pf
