#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace pf {

/// Uniform space-time grid: nt time slices of nx^d spatial cells with sizes (dt, dx).
/// (t0, x0) is the lower box corner; cell centers sit half a cell inward.
struct SpaceTimeGrid {
  int d = 2;
  int nt = 1;
  int nx = 2;
  double t0 = 0.0;
  double dt = 1.0;
  double dx = 1.0;
  std::vector<double> x0;

  SpaceTimeGrid() : x0(2, 0.0) {}
  SpaceTimeGrid(int d_, int nt_, int nx_, double t0_, double dt_, double dx_,
                std::vector<double> x0_);

  /// Symmetric box [-half, half]^d in space, [t_lo, t_lo + nt*dt) in time.
  static SpaceTimeGrid centered(int d, int nt, int nx, double t_lo, double dt, double half_width);

  std::int64_t spatial_count() const;
  std::int64_t point_count() const { return static_cast<std::int64_t>(nt) * spatial_count(); }
  double tc(int it) const { return t0 + (it + 0.5) * dt; }
  double xc(int axis, int i) const { return x0[static_cast<std::size_t>(axis)] + (i + 0.5) * dx; }
  double t_end() const { return t0 + nt * dt; }
  double cell_volume() const;
  void spatial_coords(std::int64_t flat, int* ix) const;
  std::int64_t spatial_index(const int* ix) const;
  void cell_center(std::int64_t flat, double* x) const;
  bool operator==(const SpaceTimeGrid& o) const;
};

/// Parabolic cylinder [t, t + r^2) x B_r(x).
struct ParabolicCylinder {
  double t = 0.0;
  std::vector<double> x;
  double r = 1.0;

  ParabolicCylinder() = default;
  ParabolicCylinder(double t_, std::vector<double> x_, double r_);
  double measure(int d) const;  // r^2 * |B_r(x)|
};

/// Spatial weight e^{-lambda |x|}.
struct ExponentialWeight {
  double lambda = 0.0;
  explicit ExponentialWeight(double l = 0.0);
  double operator()(const double* x, int d) const;
};

/// Scalar/vector/matrix field sampled on a SpaceTimeGrid; time-major storage,
/// one slice contiguous, components innermost.
struct GridField {
  SpaceTimeGrid grid;
  int components = 1;
  std::vector<double> values;

  GridField() = default;
  GridField(SpaceTimeGrid g, int comps, double fill = 0.0);

  std::int64_t value_count() const {
    return grid.point_count() * components;
  }
  std::size_t offset(int it, std::int64_t sp, int comp = 0) const {
    return static_cast<std::size_t>((static_cast<std::int64_t>(it) * grid.spatial_count() + sp) *
                                        components +
                                    comp);
  }
  double at(int it, std::int64_t sp, int comp = 0) const { return values[offset(it, sp, comp)]; }
  double& at(int it, std::int64_t sp, int comp = 0) { return values[offset(it, sp, comp)]; }
  /// |value| for scalars, Euclidean magnitude across components otherwise.
  double magnitude(int it, std::int64_t sp) const;
  void check_finite() const;

  struct Sampling {
    enum class Mode { point, lp_cell_mean };
    Mode mode = Mode::point;
    double p = 1.0;        // exponent of the cellwise L^p mean
    double rel_tol = 1e-5;
    int max_depth = 22;
    bool time_constant = false;  // sample slice 0 once and replicate
  };

  /// Samples fn(t, x, out[components]) at cell centers, or by cellwise L^p means
  /// (adaptive subcell quadrature) for fields too singular for point sampling.
  static GridField from_function(
      const SpaceTimeGrid& g, int comps,
      const std::function<void(double t, const double* x, double* out)>& fn,
      const Sampling& sampling);
  static GridField from_function(
      const SpaceTimeGrid& g, int comps,
      const std::function<void(double t, const double* x, double* out)>& fn);

  using Chunk = std::pair<std::string, std::vector<std::uint8_t>>;

  /// Binary container: "PFLD" header + f64 values, optional tagged chunks,
  /// plus a JSON sidecar mirror at path + ".json".
  void save(const std::string& path, bool json_sidecar = true,
            const std::vector<Chunk>& chunks = {}) const;
  static GridField load(const std::string& path, std::vector<Chunk>* chunks_out = nullptr);
};

}  // namespace pf
