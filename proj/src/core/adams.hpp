#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/grid.hpp"
#include "core/riesz.hpp"

namespace pf {

/// One instance of the weighted potential inequality
/// ||b Pf||_q <= N ||b||_{E_{p,alpha}} ||f||_q with 1 < q < p.
struct AdamsCase {
  GridField b;
  GridField f;
  KernelSpec spec;
  double p = 2.5;
  double q = 2.0;
};

struct RatioReport {
  double ratio = 0.0;
  double numerator = 0.0;
  double morrey_b = 0.0;  // homogeneous norm of b at power alpha (or 1)
  double lq_f = 0.0;
  int family_size = 0;
  int worst_case = -1;
  double boundary_mass = 0.0;  // share of the numerator's q-mass near the box edge
};

double adams_ratio(const AdamsCase& c, RatioReport* detail = nullptr);

/// Conjugate-exponent variant: ||P(bf)||_{q'} / (||b|| ||f||_{q'}), q' = q/(q-1).
double dual_adams_ratio(const AdamsCase& c, RatioReport* detail = nullptr);

/// Backward heat extension with terminal value f at time T: the output grid
/// puts its last slice center exactly at T (u(T,.) = f bitwise), earlier
/// slices are the cell-integrated Gaussian smoothing at scale 2(T-t).
GridField heat_extension(const GridField& f, double T, int nt, double dt);

struct WeightedHeatReport {
  double ratio = 0.0;
  double weighted_energy = 0.0;  // integral of b^2 u^2
  double morrey_b = 0.0;         // ||b||_{E_{p,1}}
  double f_energy = 0.0;         // integral of f^2 dx
};

/// (integral b^2 u^2 dx dt) / (||b||^2_{E_{p,1}} integral f^2 dx) with u the
/// heat extension of f on b's grid.
double weighted_heat_ratio(const GridField& b, const GridField& f, double p, double T,
                           WeightedHeatReport* detail = nullptr);

/// Seeded nonnegative test fields: mixtures of smooth bumps, singularities
/// mollified at scale 2dx, and cylinder indicators.
std::vector<GridField> make_test_family(const SpaceTimeGrid& g, int count, std::uint64_t seed);

struct FamilyParams {
  KernelSpec spec{1.0, 8.0};
  double p = 2.5;
  double q = 2.0;
  int family_size = 50;
  std::uint64_t seed = 2026;
  bool dual = false;
};

struct FamilyCaseRow {
  int case_id = 0;
  double ratio = 0.0;
  double morrey_b = 0.0;
  double lq_f = 0.0;
};

/// Max ratio over a seeded family of (b, f) pairs; rows for CSV output.
RatioReport adams_family_report(const SpaceTimeGrid& g, const FamilyParams& params,
                                std::vector<FamilyCaseRow>* rows = nullptr);

}  // namespace pf
