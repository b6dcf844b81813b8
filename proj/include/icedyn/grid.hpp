#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace icedyn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Velocity placement on the quadrilateral mesh.
///   A  - both components at vertices, tracers at vertices
///   B  - both components at vertices, tracers at cell centers
///   C  - u at vertical-edge midpoints, v at horizontal-edge midpoints
///   CD - both components at all edge midpoints
enum class Staggering { A, B, C, CD };

inline std::string to_string(Staggering s) {
  switch (s) {
    case Staggering::A: return "A";
    case Staggering::B: return "B";
    case Staggering::C: return "C";
    case Staggering::CD: return "CD";
  }
  return "?";
}

inline Staggering staggering_from_string(const std::string& s) {
  if (s == "A") return Staggering::A;
  if (s == "B") return Staggering::B;
  if (s == "C") return Staggering::C;
  if (s == "CD") return Staggering::CD;
  throw std::invalid_argument("unknown staggering '" + s + "' (expected A, B, C or CD)");
}

/// Uniform quadrilateral mesh of nx-by-ny square cells with edge length dx.
///
/// Index conventions (row-major, i fastest):
///   vertices        (i, j), 0 <= i <= nx, 0 <= j <= ny   at (i*dx, j*dx)
///   cells           (i, j), 0 <= i <  nx, 0 <= j <  ny   centered ((i+.5)dx, (j+.5)dx)
///   vertical edges  (i, j), 0 <= i <= nx, 0 <= j <  ny   midpoint (i*dx, (j+.5)dx)
///   horizontal edges(i, j), 0 <= i <  nx, 0 <= j <= ny   midpoint ((i+.5)dx, j*dx)
struct StructuredGrid {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  Vec2 origin{0.0, 0.0};

  double extent_x() const { return nx * dx; }
  double extent_y() const { return ny * dx; }

  std::size_t n_vertices() const { return std::size_t(nx + 1) * (ny + 1); }
  std::size_t n_cells() const { return std::size_t(nx) * ny; }
  std::size_t n_vedges() const { return std::size_t(nx + 1) * ny; }
  std::size_t n_hedges() const { return std::size_t(nx) * (ny + 1); }
  std::size_t n_edges() const { return n_vedges() + n_hedges(); }

  std::size_t vidx(int i, int j) const { return std::size_t(j) * (nx + 1) + i; }
  std::size_t cidx(int i, int j) const { return std::size_t(j) * nx + i; }
  std::size_t veidx(int i, int j) const { return std::size_t(j) * (nx + 1) + i; }
  std::size_t heidx(int i, int j) const { return std::size_t(j) * nx + i; }

  Vec2 vertex(int i, int j) const { return {origin.x + i * dx, origin.y + j * dx}; }
  Vec2 center(int i, int j) const { return {origin.x + (i + 0.5) * dx, origin.y + (j + 0.5) * dx}; }
  Vec2 vedge(int i, int j) const { return {origin.x + i * dx, origin.y + (j + 0.5) * dx}; }
  Vec2 hedge(int i, int j) const { return {origin.x + (i + 0.5) * dx, origin.y + j * dx}; }
};

inline StructuredGrid build_grid(int nx, int ny, double dx, Vec2 origin = {0.0, 0.0}) {
  require(nx >= 2 && ny >= 2, "build_grid: nx and ny must be >= 2");
  require(dx > 0.0, "build_grid: dx must be positive");
  return StructuredGrid{nx, ny, dx, origin};
}

/// Where the tracer (A, H) values live for a given staggering.
enum class TracerLoc { Vertex, Center };

inline TracerLoc tracer_location(Staggering s) {
  return s == Staggering::A ? TracerLoc::Vertex : TracerLoc::Center;
}

/// Flat degree-of-freedom layout for one (grid, staggering) pair.
///
/// The velocity vector is a single array of `n_velocity` doubles split into
/// component blocks; block order fixes the binary file layout:
///   A, B : [u at vertices][v at vertices]
///   C    : [u at vertical edges][v at horizontal edges]
///   CD   : [u at vertical edges][v at vertical edges][u at horizontal edges][v at horizontal edges]
struct DofLayout {
  Staggering stag = Staggering::A;
  int nx = 0, ny = 0;
  double dx = 0.0;

  std::size_t n_velocity = 0;
  std::size_t n_tracer = 0;

  std::size_t nv = 0;   // vertices
  std::size_t nve = 0;  // vertical edges
  std::size_t nhe = 0;  // horizontal edges

  // Block offsets; meaning depends on staggering (see class comment).
  std::size_t off_u = 0, off_v = 0;                            // A, B, C
  std::size_t off_uve = 0, off_vve = 0, off_uhe = 0, off_vhe = 0;  // CD

  std::vector<std::uint8_t> boundary;  // per velocity DoF, 1 if located on the domain rim
  std::vector<std::uint8_t> comp;      // per velocity DoF, 0 = x-component, 1 = y-component
  std::vector<double> omega;           // lumped area weight per velocity DoF (m^2)
  std::vector<double> pos_x, pos_y;    // DoF positions (m)

  // Co-located velocity "points" carrying a full (u,v) pair: vertices for A/B,
  // edges for CD. The C-grid has none; its components are handled separately.
  std::size_t n_points = 0;
  std::vector<std::size_t> point_iu, point_iv;

  // A, B
  std::size_t u_vertex(int i, int j) const { return off_u + std::size_t(j) * (nx + 1) + i; }
  std::size_t v_vertex(int i, int j) const { return off_v + std::size_t(j) * (nx + 1) + i; }
  // C
  std::size_t u_vedge_c(int i, int j) const { return off_u + std::size_t(j) * (nx + 1) + i; }
  std::size_t v_hedge_c(int i, int j) const { return off_v + std::size_t(j) * nx + i; }
  // CD
  std::size_t u_vedge(int i, int j) const { return off_uve + std::size_t(j) * (nx + 1) + i; }
  std::size_t v_vedge(int i, int j) const { return off_vve + std::size_t(j) * (nx + 1) + i; }
  std::size_t u_hedge(int i, int j) const { return off_uhe + std::size_t(j) * nx + i; }
  std::size_t v_hedge(int i, int j) const { return off_vhe + std::size_t(j) * nx + i; }

  std::size_t tracer_index(int i, int j) const {
    return stag == Staggering::A ? std::size_t(j) * (nx + 1) + i : std::size_t(j) * nx + i;
  }

  Vec2 tracer_pos(std::size_t k, const StructuredGrid& g) const {
    if (stag == Staggering::A) {
      int i = int(k % (nx + 1)), j = int(k / (nx + 1));
      return g.vertex(i, j);
    }
    int i = int(k % nx), j = int(k / nx);
    return g.center(i, j);
  }
};

inline DofLayout dof_layout(const StructuredGrid& g, Staggering stag) {
  DofLayout L;
  L.stag = stag;
  L.nx = g.nx;
  L.ny = g.ny;
  L.dx = g.dx;
  L.nv = g.n_vertices();
  L.nve = g.n_vedges();
  L.nhe = g.n_hedges();
  L.n_tracer = (stag == Staggering::A) ? L.nv : g.n_cells();

  const double h = g.dx;
  const double quarter = 0.25 * h * h;

  auto vertex_cells = [&](int i, int j) {
    return double((i == 0 || i == g.nx) ? 1 : 2) * double((j == 0 || j == g.ny) ? 1 : 2);
  };

  switch (stag) {
    case Staggering::A:
    case Staggering::B: {
      L.n_velocity = 2 * L.nv;
      L.off_u = 0;
      L.off_v = L.nv;
      L.boundary.assign(L.n_velocity, 0);
      L.comp.assign(L.n_velocity, 0);
      std::fill(L.comp.begin() + L.off_v, L.comp.end(), 1);
      L.omega.assign(L.n_velocity, 0.0);
      L.pos_x.assign(L.n_velocity, 0.0);
      L.pos_y.assign(L.n_velocity, 0.0);
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          const std::size_t k = g.vidx(i, j);
          const bool rim = (i == 0 || i == g.nx || j == 0 || j == g.ny);
          const double w = quarter * vertex_cells(i, j);
          const Vec2 p = g.vertex(i, j);
          for (std::size_t dof : {L.off_u + k, L.off_v + k}) {
            L.boundary[dof] = rim ? 1 : 0;
            L.omega[dof] = w;
            L.pos_x[dof] = p.x;
            L.pos_y[dof] = p.y;
          }
        }
      L.n_points = L.nv;
      L.point_iu.resize(L.n_points);
      L.point_iv.resize(L.n_points);
      for (std::size_t k = 0; k < L.nv; ++k) {
        L.point_iu[k] = L.off_u + k;
        L.point_iv[k] = L.off_v + k;
      }
      break;
    }
    case Staggering::C: {
      L.n_velocity = L.nve + L.nhe;
      L.off_u = 0;
      L.off_v = L.nve;
      L.boundary.assign(L.n_velocity, 0);
      L.comp.assign(L.n_velocity, 0);
      std::fill(L.comp.begin() + L.off_v, L.comp.end(), 1);
      L.omega.assign(L.n_velocity, h * h);
      L.pos_x.assign(L.n_velocity, 0.0);
      L.pos_y.assign(L.n_velocity, 0.0);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          const std::size_t dof = L.off_u + g.veidx(i, j);
          L.boundary[dof] = (i == 0 || i == g.nx) ? 1 : 0;
          const Vec2 p = g.vedge(i, j);
          L.pos_x[dof] = p.x;
          L.pos_y[dof] = p.y;
        }
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t dof = L.off_v + g.heidx(i, j);
          L.boundary[dof] = (j == 0 || j == g.ny) ? 1 : 0;
          const Vec2 p = g.hedge(i, j);
          L.pos_x[dof] = p.x;
          L.pos_y[dof] = p.y;
        }
      L.n_points = 0;
      break;
    }
    case Staggering::CD: {
      L.n_velocity = 2 * (L.nve + L.nhe);
      L.off_uve = 0;
      L.off_vve = L.nve;
      L.off_uhe = 2 * L.nve;
      L.off_vhe = 2 * L.nve + L.nhe;
      L.boundary.assign(L.n_velocity, 0);
      L.comp.assign(L.n_velocity, 0);
      std::fill(L.comp.begin() + L.off_vve, L.comp.begin() + L.off_uhe, 1);
      std::fill(L.comp.begin() + L.off_vhe, L.comp.end(), 1);
      L.omega.assign(L.n_velocity, 0.0);
      L.pos_x.assign(L.n_velocity, 0.0);
      L.pos_y.assign(L.n_velocity, 0.0);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          const std::size_t e = g.veidx(i, j);
          const bool rim = (i == 0 || i == g.nx);
          const double w = quarter * (rim ? 1.0 : 2.0);
          const Vec2 p = g.vedge(i, j);
          for (std::size_t dof : {L.off_uve + e, L.off_vve + e}) {
            L.boundary[dof] = rim ? 1 : 0;
            L.omega[dof] = w;
            L.pos_x[dof] = p.x;
            L.pos_y[dof] = p.y;
          }
        }
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t e = g.heidx(i, j);
          const bool rim = (j == 0 || j == g.ny);
          const double w = quarter * (rim ? 1.0 : 2.0);
          const Vec2 p = g.hedge(i, j);
          for (std::size_t dof : {L.off_uhe + e, L.off_vhe + e}) {
            L.boundary[dof] = rim ? 1 : 0;
            L.omega[dof] = w;
            L.pos_x[dof] = p.x;
            L.pos_y[dof] = p.y;
          }
        }
      L.n_points = L.nve + L.nhe;
      L.point_iu.resize(L.n_points);
      L.point_iv.resize(L.n_points);
      for (std::size_t e = 0; e < L.nve; ++e) {
        L.point_iu[e] = L.off_uve + e;
        L.point_iv[e] = L.off_vve + e;
      }
      for (std::size_t e = 0; e < L.nhe; ++e) {
        L.point_iu[L.nve + e] = L.off_uhe + e;
        L.point_iv[L.nve + e] = L.off_vhe + e;
      }
      break;
    }
  }
  return L;
}

/// Apply the no-slip mask: zero every DoF on the domain rim.
inline void zero_boundary(std::vector<double>& v, const DofLayout& L) {
  for (std::size_t k = 0; k < v.size(); ++k)
    if (L.boundary[k]) v[k] = 0.0;
}

/// Scalar field sampled at the pixel centers of a uniform output mesh.
struct RegularField {
  int nx = 0;
  int ny = 0;
  double spacing = 0.0;
  Vec2 origin{0.0, 0.0};
  std::vector<double> values;  // row-major, i fastest

  double& at(int i, int j) { return values[std::size_t(j) * nx + i]; }
  double at(int i, int j) const { return values[std::size_t(j) * nx + i]; }
  double px(int i) const { return origin.x + (i + 0.5) * spacing; }
  double py(int j) const { return origin.y + (j + 0.5) * spacing; }
};

namespace detail {

// 1-D lattice helper: point p has coordinate start + p*step, p in [0, n).
// Ghost extension by one layer on each side keeps bilinear interpolation
// affine-exact up to the domain rim when the lattice does not reach it.
struct Lattice1d {
  double start;
  double step;
  int n;

  // Returns (cell, local coordinate in [0,1]) allowing one ghost interval on
  // either side; `cell` may be -1 or n-1 referring to extrapolated ghosts.
  void locate(double x, int& cell, double& t) const {
    double s = (x - start) / step;
    cell = int(std::floor(s));
    if (cell < -1) cell = -1;
    if (cell > n - 1) cell = n - 1;
    t = s - cell;
  }
};

}  // namespace detail

/// Bilinear interpolation of a tracer-point field onto a uniform pixel grid.
/// Pixels sample at cell centers of the output mesh. Center-located input is
/// extended by one linearly extrapolated ghost layer so the whole domain is
/// covered; inside the data hull the interpolation introduces no new extrema.
inline RegularField interpolate_to_regular(const std::vector<double>& field,
                                           const StructuredGrid& g, TracerLoc loc,
                                           double spacing) {
  require(spacing > 0.0, "interpolate_to_regular: spacing must be positive");
  require(spacing <= g.extent_x() && spacing <= g.extent_y(),
          "interpolate_to_regular: spacing larger than domain");
  const double rx = g.extent_x() / spacing;
  const double ry = g.extent_y() / spacing;
  require(std::abs(rx - std::round(rx)) < 1e-9 && std::abs(ry - std::round(ry)) < 1e-9,
          "interpolate_to_regular: spacing must divide the domain extent");

  const int npx = (loc == TracerLoc::Vertex) ? g.nx + 1 : g.nx;
  const int npy = (loc == TracerLoc::Vertex) ? g.ny + 1 : g.ny;
  require(field.size() == std::size_t(npx) * npy, "interpolate_to_regular: field size mismatch");

  const double off = (loc == TracerLoc::Vertex) ? 0.0 : 0.5;
  detail::Lattice1d lx{g.origin.x + off * g.dx, g.dx, npx};
  detail::Lattice1d ly{g.origin.y + off * g.dx, g.dx, npy};

  // Ghost-extended copy of the lattice keeps the interpolation loop branch-free.
  const int ex = npx + 2, ey = npy + 2;
  std::vector<double> ext(std::size_t(ex) * ey);
  auto src = [&](int i, int j) { return field[std::size_t(j) * npx + i]; };
  for (int j = 0; j < npy; ++j)
    for (int i = 0; i < npx; ++i) ext[std::size_t(j + 1) * ex + (i + 1)] = src(i, j);
  for (int j = 1; j <= npy; ++j) {
    ext[std::size_t(j) * ex + 0] = 2.0 * ext[std::size_t(j) * ex + 1] - ext[std::size_t(j) * ex + 2];
    ext[std::size_t(j) * ex + (ex - 1)] =
        2.0 * ext[std::size_t(j) * ex + (ex - 2)] - ext[std::size_t(j) * ex + (ex - 3)];
  }
  for (int i = 0; i < ex; ++i) {
    ext[std::size_t(0) * ex + i] = 2.0 * ext[std::size_t(1) * ex + i] - ext[std::size_t(2) * ex + i];
    ext[std::size_t(ey - 1) * ex + i] =
        2.0 * ext[std::size_t(ey - 2) * ex + i] - ext[std::size_t(ey - 3) * ex + i];
  }

  RegularField out;
  out.nx = int(std::round(rx));
  out.ny = int(std::round(ry));
  out.spacing = spacing;
  out.origin = g.origin;
  out.values.resize(std::size_t(out.nx) * out.ny);

  for (int j = 0; j < out.ny; ++j) {
    const double y = out.py(j);
    int cj;
    double ty;
    ly.locate(y, cj, ty);
    for (int i = 0; i < out.nx; ++i) {
      const double x = out.px(i);
      int ci;
      double tx;
      lx.locate(x, ci, tx);
      // shift into the extended lattice (ghost layer at index 0)
      const std::size_t b = std::size_t(cj + 1) * ex + (ci + 1);
      const double f00 = ext[b], f10 = ext[b + 1], f01 = ext[b + ex], f11 = ext[b + ex + 1];
      out.at(i, j) = (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11);
    }
  }
  return out;
}

}  // namespace icedyn
