#include "core/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/parallel.hpp"

namespace pf {

SpaceTimeGrid::SpaceTimeGrid(int d_, int nt_, int nx_, double t0_, double dt_, double dx_,
                             std::vector<double> x0_)
    : d(d_), nt(nt_), nx(nx_), t0(t0_), dt(dt_), dx(dx_), x0(std::move(x0_)) {
  require(d >= 2, Errc::invalid_argument, "grid dimension must be >= 2");
  require(nt >= 1, Errc::invalid_argument, "nt must be >= 1");
  require(nx >= 2, Errc::invalid_argument, "nx must be >= 2");
  require(dt > 0.0 && dx > 0.0, Errc::invalid_argument, "cell sizes must be positive");
  require(x0.size() == static_cast<std::size_t>(d), Errc::invalid_argument,
          "x0 must have d entries");
  double pts = static_cast<double>(nt) * std::pow(static_cast<double>(nx), d);
  require(pts < 4e9, Errc::invalid_argument, "grid too large for addressable memory");
}

SpaceTimeGrid SpaceTimeGrid::centered(int d, int nt, int nx, double t_lo, double dt,
                                      double half_width) {
  double dx = 2.0 * half_width / nx;
  return SpaceTimeGrid(d, nt, nx, t_lo, dt, dx, std::vector<double>(d, -half_width));
}

std::int64_t SpaceTimeGrid::spatial_count() const {
  std::int64_t n = 1;
  for (int i = 0; i < d; ++i) n *= nx;
  return n;
}

double SpaceTimeGrid::cell_volume() const { return std::pow(dx, d); }

void SpaceTimeGrid::spatial_coords(std::int64_t flat, int* ix) const {
  for (int axis = d - 1; axis >= 0; --axis) {
    ix[axis] = static_cast<int>(flat % nx);
    flat /= nx;
  }
}

std::int64_t SpaceTimeGrid::spatial_index(const int* ix) const {
  std::int64_t flat = 0;
  for (int axis = 0; axis < d; ++axis) flat = flat * nx + ix[axis];
  return flat;
}

void SpaceTimeGrid::cell_center(std::int64_t flat, double* x) const {
  for (int axis = d - 1; axis >= 0; --axis) {
    x[axis] = xc(axis, static_cast<int>(flat % nx));
    flat /= nx;
  }
}

bool SpaceTimeGrid::operator==(const SpaceTimeGrid& o) const {
  return d == o.d && nt == o.nt && nx == o.nx && t0 == o.t0 && dt == o.dt && dx == o.dx &&
         x0 == o.x0;
}

ParabolicCylinder::ParabolicCylinder(double t_, std::vector<double> x_, double r_)
    : t(t_), x(std::move(x_)), r(r_) {
  require(r > 0.0, Errc::invalid_argument, "cylinder radius must be positive");
}

double ParabolicCylinder::measure(int d) const {
  return r * r * unit_ball_volume(d) * std::pow(r, d);
}

ExponentialWeight::ExponentialWeight(double l) : lambda(l) {
  require(lambda >= 0.0, Errc::invalid_argument, "weight decay rate must be >= 0");
}

double ExponentialWeight::operator()(const double* x, int d) const {
  double n2 = 0.0;
  for (int i = 0; i < d; ++i) n2 += x[i] * x[i];
  return std::exp(-lambda * std::sqrt(n2));
}

GridField::GridField(SpaceTimeGrid g, int comps, double fill)
    : grid(std::move(g)), components(comps) {
  require(components >= 1, Errc::invalid_argument, "component count must be >= 1");
  values.assign(static_cast<std::size_t>(grid.point_count() * components), fill);
}

double GridField::magnitude(int it, std::int64_t sp) const {
  if (components == 1) return std::abs(at(it, sp, 0));
  double n2 = 0.0;
  for (int c = 0; c < components; ++c) {
    double v = at(it, sp, c);
    n2 += v * v;
  }
  return std::sqrt(n2);
}

void GridField::check_finite() const {
  for (double v : values)
    require(std::isfinite(v), Errc::numeric, "field contains a non-finite value");
}

GridField GridField::from_function(
    const SpaceTimeGrid& g, int comps,
    const std::function<void(double, const double*, double*)>& fn, const Sampling& sampling) {
  require(comps >= 1 && comps <= 64, Errc::invalid_argument, "component count out of range");
  GridField f(g, comps);
  std::int64_t nsp = g.spatial_count();
  int slices = sampling.time_constant ? 1 : g.nt;

  for (int it = 0; it < slices; ++it) {
    double t = g.tc(it);
    for_chunks(nsp, 256, [&](int, std::int64_t begin, std::int64_t end) {
      std::vector<double> x(static_cast<std::size_t>(g.d));
      std::vector<double> out(static_cast<std::size_t>(comps));
      std::vector<double> lo(static_cast<std::size_t>(g.d)), hi(static_cast<std::size_t>(g.d));
      std::vector<double> tmp(static_cast<std::size_t>(comps));
      for (std::int64_t sp = begin; sp < end; ++sp) {
        g.cell_center(sp, x.data());
        if (sampling.mode == Sampling::Mode::point) {
          fn(t, x.data(), out.data());
          for (int c = 0; c < comps; ++c) f.at(it, sp, c) = out[static_cast<std::size_t>(c)];
        } else {
          for (int a = 0; a < g.d; ++a) {
            lo[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(a)] - 0.5 * g.dx;
            hi[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(a)] + 0.5 * g.dx;
          }
          double vol = g.cell_volume();
          for (int c = 0; c < comps; ++c) {
            auto integrand = [&](const double* y) {
              fn(t, y, tmp.data());
              return std::pow(std::abs(tmp[static_cast<std::size_t>(c)]), sampling.p);
            };
            double mean = adaptive_cell_integral(integrand, lo.data(), hi.data(), g.d,
                                                 sampling.rel_tol, sampling.max_depth) /
                          vol;
            f.at(it, sp, c) = std::pow(mean, 1.0 / sampling.p);
          }
        }
      }
    });
  }
  if (sampling.time_constant) {
    std::size_t slice = static_cast<std::size_t>(nsp * comps);
    for (int it = 1; it < g.nt; ++it)
      std::memcpy(f.values.data() + static_cast<std::size_t>(it) * slice, f.values.data(),
                  slice * sizeof(double));
  }
  f.check_finite();
  return f;
}

GridField GridField::from_function(
    const SpaceTimeGrid& g, int comps,
    const std::function<void(double, const double*, double*)>& fn) {
  return from_function(g, comps, fn, Sampling());
}

namespace {

constexpr std::uint32_t kPfldVersion = 1;

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void GridField::save(const std::string& path, bool json_sidecar,
                     const std::vector<Chunk>& chunks) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), Errc::io, "cannot open '" + path + "' for writing");
  os.write("PFLD", 4);
  put(os, kPfldVersion);
  put(os, static_cast<std::uint32_t>(grid.d));
  put(os, static_cast<std::uint32_t>(grid.nt));
  put(os, static_cast<std::uint32_t>(grid.nx));
  put(os, static_cast<std::uint32_t>(components));
  put(os, grid.t0);
  for (double v : grid.x0) put(os, v);
  put(os, grid.dt);
  put(os, grid.dx);
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  for (const auto& [tag, payload] : chunks) {
    require(!tag.empty() && tag.size() <= 32, Errc::invalid_argument,
            "chunk tag must be 1..32 bytes");
    put(os, static_cast<std::uint32_t>(tag.size()));
    os.write(tag.data(), static_cast<std::streamsize>(tag.size()));
    put(os, static_cast<std::uint64_t>(payload.size()));
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
  }
  require(os.good(), Errc::io, "write failed for '" + path + "'");
  os.close();

  if (!json_sidecar) return;
  nlohmann::json j;
  j["magic"] = "PFLD";
  j["version"] = kPfldVersion;
  j["d"] = grid.d;
  j["nt"] = grid.nt;
  j["nx"] = grid.nx;
  j["components"] = components;
  j["t0"] = grid.t0;
  j["x0"] = grid.x0;
  j["dt"] = grid.dt;
  j["dx"] = grid.dx;
  j["values"] = values;
  if (!chunks.empty()) {
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& [tag, payload] : chunks)
      cj.push_back({{"name", tag}, {"bytes", payload.size()}});
    j["chunks"] = cj;
  }
  std::ofstream js(path + ".json", std::ios::trunc);
  require(js.good(), Errc::io, "cannot open sidecar for '" + path + "'");
  js << j.dump();
  js.close();
}

GridField GridField::load(const std::string& path, std::vector<Chunk>* chunks_out) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::io, "cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, "PFLD", 4) == 0, Errc::io,
          "'" + path + "' is not a PFLD container");
  std::uint32_t version, d, nt, nx, comps;
  get(is, version);
  require(version == kPfldVersion, Errc::io, "unsupported PFLD version");
  get(is, d);
  get(is, nt);
  get(is, nx);
  get(is, comps);
  double t0, dt, dx;
  get(is, t0);
  std::vector<double> x0(d);
  for (auto& v : x0) get(is, v);
  get(is, dt);
  get(is, dx);
  require(is.good(), Errc::io, "truncated PFLD header");
  SpaceTimeGrid g(static_cast<int>(d), static_cast<int>(nt), static_cast<int>(nx), t0, dt, dx,
                  std::move(x0));
  GridField f(g, static_cast<int>(comps));
  is.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  require(is.good(), Errc::io, "truncated PFLD values");
  while (chunks_out) {
    std::uint32_t tag_len = 0;
    get(is, tag_len);
    if (!is.good()) break;
    require(tag_len >= 1 && tag_len <= 32, Errc::io, "corrupt PFLD chunk tag");
    std::string tag(tag_len, '\0');
    is.read(tag.data(), tag_len);
    std::uint64_t size = 0;
    get(is, size);
    require(is.good() && size < (1ull << 40), Errc::io, "corrupt PFLD chunk");
    std::vector<std::uint8_t> payload(size);
    is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(size));
    require(is.good(), Errc::io, "truncated PFLD chunk");
    chunks_out->emplace_back(std::move(tag), std::move(payload));
  }
  f.check_finite();
  return f;
}

}  // namespace pf
