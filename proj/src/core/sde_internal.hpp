#pragma once

#include <cmath>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/sde_flow.hpp"

namespace pf::detail {

inline void gauss_increments(std::uint64_t seed, std::uint64_t path, std::int64_t step, int d1,
                             double sqrt_h, double* dw) {
  for (int k = 0; k < d1; ++k)
    dw[k] = normal_draw(seed, path, static_cast<std::uint64_t>(step) * d1 + k) * sqrt_h;
}

inline std::int64_t steps_for(double T, double h) {
  require(T > 0.0 && h > 0.0, Errc::invalid_argument, "T and h must be positive");
  auto steps = static_cast<std::int64_t>(std::llround(T / h));
  require(steps >= 1 && std::abs(steps * h - T) <= 1e-9 * std::max(1.0, T),
          Errc::invalid_argument, "T must be an integer multiple of h");
  return steps;
}

/// Euler-Maruyama stepper with per-instance scratch (one per worker thread).
/// Direction vectors evolve with per-axis derivative contractions, so the
/// update is exactly linear in each direction even under the finite
/// difference fallback.
class Stepper {
 public:
  explicit Stepper(const SdeCoefficients& c)
      : c_(c),
        d_(c.d),
        d1_(c.d1),
        sig_(static_cast<std::size_t>(d_ * d1_)),
        b_(static_cast<std::size_t>(d_)),
        dsig_(static_cast<std::size_t>(d_ * d1_ * d_)),
        db_(static_cast<std::size_t>(d_ * d_)),
        xp_(static_cast<std::size_t>(d_)),
        sp_(static_cast<std::size_t>(d_ * d1_)),
        sm_(static_cast<std::size_t>(d_ * d1_)),
        bp_(static_cast<std::size_t>(d_)),
        bm_(static_cast<std::size_t>(d_)) {
    require(d_ >= 1 && d1_ >= d_ && d_ <= 16, Errc::invalid_argument,
            "need 16 >= d1 >= d >= 1");
    require(c_.sigma && c_.b, Errc::invalid_argument, "sigma and b callbacks required");
  }

  bool step(double t, double h, const double* dw, double* x, double* dirs, int n_dirs,
            double guard) {
    c_.sigma(t, x, sig_.data());
    c_.b(t, x, b_.data());
    if (n_dirs > 0) fill_derivs(t, x);

    double tmp[16];
    for (int m = 0; m < n_dirs; ++m) {
      double* eta = dirs + static_cast<std::ptrdiff_t>(m) * d_;
      for (int i = 0; i < d_; ++i) {
        double upd = 0.0;
        for (int k = 0; k < d1_; ++k) {
          double sd = 0.0;
          for (int j = 0; j < d_; ++j) sd += dsig_[static_cast<std::size_t>((i * d1_ + k) * d_ + j)] * eta[j];
          upd += sd * dw[k];
        }
        double bd = 0.0;
        for (int j = 0; j < d_; ++j) bd += db_[static_cast<std::size_t>(i * d_ + j)] * eta[j];
        tmp[i] = eta[i] + upd + bd * h;
      }
      for (int i = 0; i < d_; ++i) eta[i] = tmp[i];
    }

    for (int i = 0; i < d_; ++i) {
      double upd = 0.0;
      for (int k = 0; k < d1_; ++k) upd += sig_[static_cast<std::size_t>(i * d1_ + k)] * dw[k];
      tmp[i] = x[i] + upd + b_[static_cast<std::size_t>(i)] * h;
    }
    for (int i = 0; i < d_; ++i) x[i] = tmp[i];

    for (int i = 0; i < d_; ++i)
      if (!std::isfinite(x[i]) || std::abs(x[i]) > guard) return false;
    for (int m = 0; m < n_dirs * d_; ++m)
      if (!std::isfinite(dirs[m]) || std::abs(dirs[m]) > guard) return false;
    return true;
  }

 private:
  void fill_derivs(double t, const double* x) {
    if (c_.dsigma) {
      c_.dsigma(t, x, dsig_.data());
    } else {
      for (int j = 0; j < d_; ++j) {
        for (int i = 0; i < d_; ++i) xp_[static_cast<std::size_t>(i)] = x[i];
        xp_[static_cast<std::size_t>(j)] = x[j] + c_.h_fd;
        c_.sigma(t, xp_.data(), sp_.data());
        xp_[static_cast<std::size_t>(j)] = x[j] - c_.h_fd;
        c_.sigma(t, xp_.data(), sm_.data());
        for (int ik = 0; ik < d_ * d1_; ++ik)
          dsig_[static_cast<std::size_t>(ik * d_ + j)] =
              (sp_[static_cast<std::size_t>(ik)] - sm_[static_cast<std::size_t>(ik)]) /
              (2.0 * c_.h_fd);
        xp_[static_cast<std::size_t>(j)] = x[j];
      }
    }
    if (c_.db) {
      c_.db(t, x, db_.data());
    } else {
      for (int j = 0; j < d_; ++j) {
        for (int i = 0; i < d_; ++i) xp_[static_cast<std::size_t>(i)] = x[i];
        xp_[static_cast<std::size_t>(j)] = x[j] + c_.h_fd;
        c_.b(t, xp_.data(), bp_.data());
        xp_[static_cast<std::size_t>(j)] = x[j] - c_.h_fd;
        c_.b(t, xp_.data(), bm_.data());
        for (int i = 0; i < d_; ++i)
          db_[static_cast<std::size_t>(i * d_ + j)] =
              (bp_[static_cast<std::size_t>(i)] - bm_[static_cast<std::size_t>(i)]) /
              (2.0 * c_.h_fd);
        xp_[static_cast<std::size_t>(j)] = x[j];
      }
    }
  }

  const SdeCoefficients& c_;
  int d_, d1_;
  std::vector<double> sig_, b_, dsig_, db_, xp_, sp_, sm_, bp_, bm_;
};

void check_ellipticity(const SdeCoefficients& c, double t, const double* x);

}  // namespace pf::detail
