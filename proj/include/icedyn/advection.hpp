#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "icedyn/grid.hpp"

// Conservative tracer transport on the cell lattice (center tracers) or the
// vertex-centered dual lattice (A staggering): first-order donor-cell upwind
// and a superbee-limited TVD scheme with dimensional splitting.

namespace icedyn {

struct CflViolation : std::runtime_error {
  explicit CflViolation(double courant)
      : std::runtime_error("advection CFL violation: max Courant number " +
                           std::to_string(courant) + " exceeds 1"),
        courant(courant) {}
  double courant;
};

enum class AdvectionScheme { Upwind, Superbee };

inline std::string to_string(AdvectionScheme s) {
  return s == AdvectionScheme::Upwind ? "upwind" : "superbee";
}

inline AdvectionScheme advection_from_string(const std::string& s) {
  if (s == "upwind") return AdvectionScheme::Upwind;
  if (s == "superbee") return AdvectionScheme::Superbee;
  throw std::invalid_argument("unknown advection scheme '" + s + "'");
}

/// Normal velocity on the faces of the cell lattice: the stored edge-normal
/// DoF for C/CD, the two-endpoint vertex average for A/B. No-slip makes all
/// rim faces carry exactly zero.
struct FaceVelocities {
  std::vector<double> fu;  // vertical faces, (nx+1) x ny, positive = +x flow
  std::vector<double> fv;  // horizontal faces, nx x (ny+1), positive = +y flow
};

inline FaceVelocities face_velocities(const std::vector<double>& v, const StructuredGrid& g,
                                      const DofLayout& L) {
  require(v.size() == L.n_velocity, "face_velocities: velocity size mismatch");
  FaceVelocities f;
  f.fu.assign(g.n_vedges(), 0.0);
  f.fv.assign(g.n_hedges(), 0.0);
  switch (L.stag) {
    case Staggering::A:
    case Staggering::B:
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
          f.fu[g.veidx(i, j)] = 0.5 * (v[L.u_vertex(i, j)] + v[L.u_vertex(i, j + 1)]);
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          f.fv[g.heidx(i, j)] = 0.5 * (v[L.v_vertex(i, j)] + v[L.v_vertex(i + 1, j)]);
      break;
    case Staggering::C:
      for (std::size_t k = 0; k < g.n_vedges(); ++k) f.fu[k] = v[L.off_u + k];
      for (std::size_t k = 0; k < g.n_hedges(); ++k) f.fv[k] = v[L.off_v + k];
      break;
    case Staggering::CD:
      for (std::size_t k = 0; k < g.n_vedges(); ++k) f.fu[k] = v[L.off_uve + k];
      for (std::size_t k = 0; k < g.n_hedges(); ++k) f.fv[k] = v[L.off_vhe + k];
      break;
  }
  return f;
}

namespace detail {

// Rectilinear control-volume mesh with per-axis widths. Covers both tracer
// lattices: uniform h cells, or the vertex dual lattice whose rim cells are
// half-width. All boundary faces carry zero velocity under no-slip.
struct AdvMesh {
  int mx = 0, my = 0;
  std::vector<double> wx, wy;      // control-volume widths per axis
  std::vector<double> fu;          // (mx+1) x my vertical-face normal velocities
  std::vector<double> fv;          // mx x (my+1) horizontal-face normal velocities

  std::size_t cid(int i, int j) const { return std::size_t(j) * mx + i; }
  std::size_t fuid(int i, int j) const { return std::size_t(j) * (mx + 1) + i; }
  std::size_t fvid(int i, int j) const { return std::size_t(j) * mx + i; }
  double area(int i, int j) const { return wx[i] * wy[j]; }
};

inline AdvMesh adv_mesh(const std::vector<double>& v, const StructuredGrid& g, const DofLayout& L) {
  AdvMesh m;
  if (tracer_location(L.stag) == TracerLoc::Center) {
    const FaceVelocities f = face_velocities(v, g, L);
    m.mx = g.nx;
    m.my = g.ny;
    m.wx.assign(m.mx, g.dx);
    m.wy.assign(m.my, g.dx);
    m.fu.assign(std::size_t(m.mx + 1) * m.my, 0.0);
    m.fv.assign(std::size_t(m.mx) * (m.my + 1), 0.0);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i <= g.nx; ++i) m.fu[m.fuid(i, j)] = f.fu[g.veidx(i, j)];
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) m.fv[m.fvid(i, j)] = f.fv[g.heidx(i, j)];
    return m;
  }
  // vertex dual lattice; interior dual faces bisect the primal edges
  m.mx = g.nx + 1;
  m.my = g.ny + 1;
  m.wx.assign(m.mx, g.dx);
  m.wy.assign(m.my, g.dx);
  m.wx.front() = m.wx.back() = 0.5 * g.dx;
  m.wy.front() = m.wy.back() = 0.5 * g.dx;
  m.fu.assign(std::size_t(m.mx + 1) * m.my, 0.0);
  m.fv.assign(std::size_t(m.mx) * (m.my + 1), 0.0);
  for (int j = 0; j < m.my; ++j)
    for (int i = 1; i < m.mx; ++i)
      m.fu[m.fuid(i, j)] = 0.5 * (v[L.u_vertex(i - 1, j)] + v[L.u_vertex(i, j)]);
  for (int j = 1; j < m.my; ++j)
    for (int i = 0; i < m.mx; ++i)
      m.fv[m.fvid(i, j)] = 0.5 * (v[L.v_vertex(i, j - 1)] + v[L.v_vertex(i, j)]);
  return m;
}

inline void check_cfl(const AdvMesh& m, double dt) {
  double cmax = 0.0;
  for (int j = 0; j < m.my; ++j)
    for (int i = 0; i <= m.mx; ++i) {
      const double u = std::abs(m.fu[m.fuid(i, j)]);
      const double w = std::min(m.wx[std::max(i - 1, 0)], m.wx[std::min(i, m.mx - 1)]);
      cmax = std::max(cmax, u * dt / w);
    }
  for (int j = 0; j <= m.my; ++j)
    for (int i = 0; i < m.mx; ++i) {
      const double u = std::abs(m.fv[m.fvid(i, j)]);
      const double w = std::min(m.wy[std::max(j - 1, 0)], m.wy[std::min(j, m.my - 1)]);
      cmax = std::max(cmax, u * dt / w);
    }
  if (cmax > 1.0) throw CflViolation(cmax);
}

inline double superbee(double r) {
  return std::max({0.0, std::min(1.0, 2.0 * r), std::min(2.0, r)});
}

// One limited 1-D sweep over a strided line of cells. `q` is updated in
// place in conservative flux form; `width[i]` are the cell widths, `vel[f]`
// the face velocities (n+1 faces for n cells, outermost faces closed).
inline void tvd_sweep(double* q, std::size_t qstride, const double* width, const double* vel,
                      std::size_t vstride, int n, double dt) {
  static thread_local std::vector<double> flux;
  flux.assign(std::size_t(n) + 1, 0.0);
  auto qv = [&](int c) { return q[std::size_t(c) * qstride]; };
  for (int fidx = 1; fidx < n; ++fidx) {
    const double u = vel[std::size_t(fidx) * vstride];
    if (u == 0.0) continue;
    const int up = u > 0.0 ? fidx - 1 : fidx;
    const double dq = qv(fidx) - qv(fidx - 1);
    double F = u * qv(up);
    // antidiffusive correction, limited; vanishes beside the walls where the
    // second upwind neighbor is missing
    const int upup = u > 0.0 ? fidx - 2 : fidx + 1;
    if (upup >= 0 && upup < n && dq != 0.0) {
      const double r = (u > 0.0 ? qv(fidx - 1) - qv(upup) : qv(upup) - qv(fidx)) / dq;
      const double c = std::abs(u) * dt / width[up];
      F += 0.5 * std::abs(u) * (1.0 - c) * superbee(r) * dq;
    }
    flux[fidx] = F;
  }
  for (int c = 0; c < n; ++c)
    q[std::size_t(c) * qstride] -= dt * (flux[c + 1] - flux[c]) / width[c];
}

}  // namespace detail

/// Donor-cell upwind step. Conservative in sum(q * area); monotone under the
/// CFL bound; tracers untouched where all adjacent face velocities vanish.
inline std::vector<double> upwind_advect(const std::vector<double>& q,
                                         const std::vector<double>& v, const StructuredGrid& g,
                                         const DofLayout& L, double dt) {
  require(q.size() == L.n_tracer, "upwind_advect: tracer size mismatch");
  const detail::AdvMesh m = detail::adv_mesh(v, g, L);
  detail::check_cfl(m, dt);
  std::vector<double> out = q;
  for (int j = 0; j < m.my; ++j)
    for (int i = 1; i < m.mx; ++i) {
      const double u = m.fu[m.fuid(i, j)];
      if (u == 0.0) continue;
      const double F = u * (u > 0.0 ? q[m.cid(i - 1, j)] : q[m.cid(i, j)]) * m.wy[j] * dt;
      out[m.cid(i - 1, j)] -= F / m.area(i - 1, j);
      out[m.cid(i, j)] += F / m.area(i, j);
    }
  for (int j = 1; j < m.my; ++j)
    for (int i = 0; i < m.mx; ++i) {
      const double u = m.fv[m.fvid(i, j)];
      if (u == 0.0) continue;
      const double F = u * (u > 0.0 ? q[m.cid(i, j - 1)] : q[m.cid(i, j)]) * m.wx[i] * dt;
      out[m.cid(i, j - 1)] -= F / m.area(i, j - 1);
      out[m.cid(i, j)] += F / m.area(i, j);
    }
  return out;
}

/// Superbee-limited TVD step via dimensional splitting. `step_parity`
/// alternates the sweep order (even: x then y, odd: y then x) to cancel
/// first-order splitting bias over consecutive steps.
inline std::vector<double> flux_limited_advect(const std::vector<double>& q,
                                               const std::vector<double>& v,
                                               const StructuredGrid& g, const DofLayout& L,
                                               double dt, long step_parity = 0) {
  require(q.size() == L.n_tracer, "flux_limited_advect: tracer size mismatch");
  const detail::AdvMesh m = detail::adv_mesh(v, g, L);
  detail::check_cfl(m, dt);
  std::vector<double> out = q;

  auto sweep_x = [&]() {
    for (int j = 0; j < m.my; ++j)
      detail::tvd_sweep(&out[m.cid(0, j)], 1, m.wx.data(), &m.fu[m.fuid(0, j)], 1, m.mx, dt);
  };
  auto sweep_y = [&]() {
    for (int i = 0; i < m.mx; ++i)
      detail::tvd_sweep(&out[m.cid(i, 0)], m.mx, m.wy.data(), &m.fv[m.fvid(i, 0)], m.mx, m.my, dt);
  };
  if (step_parity % 2 == 0) {
    sweep_x();
    sweep_y();
  } else {
    sweep_y();
    sweep_x();
  }
  return out;
}

/// Tracer control-volume areas (m^2): h^2 for cell tracers, the clipped dual
/// areas for vertex tracers. sum(q * area) is the conserved total.
inline std::vector<double> tracer_areas(const StructuredGrid& g, const DofLayout& L) {
  if (tracer_location(L.stag) == TracerLoc::Center)
    return std::vector<double>(g.n_cells(), g.dx * g.dx);
  std::vector<double> a(g.n_vertices());
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      const double fx = (i == 0 || i == g.nx) ? 0.5 : 1.0;
      const double fy = (j == 0 || j == g.ny) ? 0.5 : 1.0;
      a[g.vidx(i, j)] = fx * fy * g.dx * g.dx;
    }
  return a;
}

/// Clamp concentration to [0, 1]; returns the total clamped amount
/// sum(|A - clamp(A)| * area) for logging.
inline double clamp_concentration(std::vector<double>& A, const std::vector<double>& area) {
  double moved = 0.0;
  for (std::size_t k = 0; k < A.size(); ++k) {
    const double c = std::clamp(A[k], 0.0, 1.0);
    moved += std::abs(A[k] - c) * area[k];
    A[k] = c;
  }
  return moved;
}

}  // namespace icedyn
