#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "icedyn/grid.hpp"
#include "icedyn/physics.hpp"

// Per-staggering discrete operators: strain rates, viscosity fields, stress
// divergence, the nonconforming-element jump penalty, and the pointwise
// momentum residual. All assembly loops are serial; parallelism in this code
// base lives at the level of independent simulation runs.

namespace icedyn {

namespace fe {

inline constexpr double kG = 0.57735026918962576451;  // 1/sqrt(3), 2x2 Gauss abscissa

// Quadrature points on [-1,1]^2 in the order (-g,-g), (g,-g), (-g,g), (g,g);
// each carries weight 1 on the reference square.
inline constexpr double qxi[4] = {-kG, kG, -kG, kG};
inline constexpr double qeta[4] = {-kG, -kG, kG, kG};

// Bilinear nodal basis; node order (i,j), (i+1,j), (i,j+1), (i+1,j+1).
inline double q1_val(int a, double xi, double eta) {
  const double sx = (a == 1 || a == 3) ? 1.0 : -1.0;
  const double sy = (a >= 2) ? 1.0 : -1.0;
  return 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta);
}
inline double q1_dxi(int a, double /*xi*/, double eta) {
  const double sx = (a == 1 || a == 3) ? 1.0 : -1.0;
  const double sy = (a >= 2) ? 1.0 : -1.0;
  return 0.25 * sx * (1.0 + sy * eta);
}
inline double q1_deta(int a, double xi, double /*eta*/) {
  const double sx = (a == 1 || a == 3) ? 1.0 : -1.0;
  const double sy = (a >= 2) ? 1.0 : -1.0;
  return 0.25 * sy * (1.0 + sx * xi);
}

// Rotated-bilinear (nonconforming, midpoint-value) basis on the reference
// square, spanning {1, xi, eta, xi^2 - eta^2}; DoF order bottom, right, top,
// left edge midpoints. Continuity across element edges holds at midpoints only.
inline double cr_val(int a, double xi, double eta) {
  const double q = 0.25 * (xi * xi - eta * eta);
  switch (a) {
    case 0: return 0.25 - 0.5 * eta - q;
    case 1: return 0.25 + 0.5 * xi + q;
    case 2: return 0.25 + 0.5 * eta - q;
    default: return 0.25 - 0.5 * xi + q;
  }
}
inline double cr_dxi(int a, double xi, double /*eta*/) {
  switch (a) {
    case 0: return -0.5 * xi;
    case 1: return 0.5 + 0.5 * xi;
    case 2: return -0.5 * xi;
    default: return -0.5 + 0.5 * xi;
  }
}
inline double cr_deta(int a, double /*xi*/, double eta) {
  switch (a) {
    case 0: return -0.5 + 0.5 * eta;
    case 1: return -0.5 * eta;
    case 2: return 0.5 + 0.5 * eta;
    default: return -0.5 * eta;
  }
}

// 3-point Gauss rule on [-1,1]; exact through degree 5, enough for the
// quartic edge-jump products of the rotated-bilinear traces.
inline constexpr double edge_q[3] = {-0.77459666924148337704, 0.0, 0.77459666924148337704};
inline constexpr double edge_w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

// Trace of the rotated-bilinear basis along one element edge, parameterized
// by the edge coordinate q in [-1,1]. Identical on both sides of a shared
// edge, so inter-element jumps reduce to these three shapes (the shared
// midpoint DoF cancels).
inline double trace_own(double q) { return 1.0 - 0.25 * q * q; }      // basis of the edge itself
inline double trace_adj(double q, int end) {                           // edges touching end q=-1 / q=+1
  return (end == 0 ? -0.5 * q : 0.5 * q) + 0.25 * q * q;
}
inline double trace_opp(double q) { return -0.25 * q * q; }            // opposite edge of the cell

}  // namespace fe

/// Symmetric-tensor field in the staggering's natural storage:
///   A, B, CD - three components at the four 2x2 Gauss points of every cell,
///              entry [cell*4 + q] with q ordered as fe::qxi/qeta;
///   C        - c11, c22 at cell centers, c12 at vertices.
/// Used for both strain rates (1/s) and stresses (N/m).
struct TensorField {
  Staggering stag = Staggering::A;
  std::vector<double> c11, c22, c12;
};

using StrainField = TensorField;
using StressField = TensorField;

inline TensorField make_tensor_field(const StructuredGrid& g, Staggering stag) {
  TensorField f;
  f.stag = stag;
  const std::size_t nq = (stag == Staggering::C) ? g.n_cells() : 4 * g.n_cells();
  f.c11.assign(nq, 0.0);
  f.c22.assign(nq, 0.0);
  f.c12.assign(stag == Staggering::C ? g.n_vertices() : nq, 0.0);
  return f;
}

/// Symmetrized velocity gradient in the staggering's storage.
///   A, B : gradients of the bilinear interpolant at the cell Gauss points
///   CD   : gradients of the rotated-bilinear interpolant at the Gauss points
///   C    : central differences; c12 at vertices with reflected ghost values
///          (v_ghost = -v_interior) enforcing no-slip on tangential components
inline StrainField strain_rate_field(const std::vector<double>& v, const StructuredGrid& g,
                                     const DofLayout& L) {
  require(v.size() == L.n_velocity, "strain_rate_field: velocity size mismatch");
  StrainField out = make_tensor_field(g, L.stag);
  const double h = g.dx;
  const double sc = 2.0 / h;  // reference-to-physical gradient factor

  switch (L.stag) {
    case Staggering::A:
    case Staggering::B: {
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t c = g.cidx(i, j);
          const std::size_t n[4] = {g.vidx(i, j), g.vidx(i + 1, j), g.vidx(i, j + 1),
                                    g.vidx(i + 1, j + 1)};
          for (int q = 0; q < 4; ++q) {
            double ux = 0, uy = 0, vx = 0, vy = 0;
            for (int a = 0; a < 4; ++a) {
              const double dx = sc * fe::q1_dxi(a, fe::qxi[q], fe::qeta[q]);
              const double dy = sc * fe::q1_deta(a, fe::qxi[q], fe::qeta[q]);
              ux += v[L.off_u + n[a]] * dx;
              uy += v[L.off_u + n[a]] * dy;
              vx += v[L.off_v + n[a]] * dx;
              vy += v[L.off_v + n[a]] * dy;
            }
            out.c11[4 * c + q] = ux;
            out.c22[4 * c + q] = vy;
            out.c12[4 * c + q] = 0.5 * (uy + vx);
          }
        }
      break;
    }
    case Staggering::CD: {
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t c = g.cidx(i, j);
          const std::size_t eu[4] = {L.u_hedge(i, j), L.u_vedge(i + 1, j), L.u_hedge(i, j + 1),
                                     L.u_vedge(i, j)};
          const std::size_t ev[4] = {L.v_hedge(i, j), L.v_vedge(i + 1, j), L.v_hedge(i, j + 1),
                                     L.v_vedge(i, j)};
          for (int q = 0; q < 4; ++q) {
            double ux = 0, uy = 0, vx = 0, vy = 0;
            for (int a = 0; a < 4; ++a) {
              const double dx = sc * fe::cr_dxi(a, fe::qxi[q], fe::qeta[q]);
              const double dy = sc * fe::cr_deta(a, fe::qxi[q], fe::qeta[q]);
              ux += v[eu[a]] * dx;
              uy += v[eu[a]] * dy;
              vx += v[ev[a]] * dx;
              vy += v[ev[a]] * dy;
            }
            out.c11[4 * c + q] = ux;
            out.c22[4 * c + q] = vy;
            out.c12[4 * c + q] = 0.5 * (uy + vx);
          }
        }
      break;
    }
    case Staggering::C: {
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t c = g.cidx(i, j);
          out.c11[c] = (v[L.u_vedge_c(i + 1, j)] - v[L.u_vedge_c(i, j)]) / h;
          out.c22[c] = (v[L.v_hedge_c(i, j + 1)] - v[L.v_hedge_c(i, j)]) / h;
        }
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          double dudy, dvdx;
          if (j == 0)
            dudy = 2.0 * v[L.u_vedge_c(i, 0)] / h;
          else if (j == g.ny)
            dudy = -2.0 * v[L.u_vedge_c(i, g.ny - 1)] / h;
          else
            dudy = (v[L.u_vedge_c(i, j)] - v[L.u_vedge_c(i, j - 1)]) / h;
          if (i == 0)
            dvdx = 2.0 * v[L.v_hedge_c(0, j)] / h;
          else if (i == g.nx)
            dvdx = -2.0 * v[L.v_hedge_c(g.nx - 1, j)] / h;
          else
            dvdx = (v[L.v_hedge_c(i, j)] - v[L.v_hedge_c(i - 1, j)]) / h;
          out.c12[g.vidx(i, j)] = 0.5 * (dudy + dvdx);
        }
      break;
    }
  }
  return out;
}

/// Nonlinear rheology coefficients at the stress evaluation points.
/// For the C staggering these live at cell centers (Delta built from the
/// cell's corner-averaged c12^2) with eta additionally interpolated to the
/// vertices for the shear stress relation.
struct ViscosityField {
  Staggering stag = Staggering::A;
  std::vector<double> zeta, eta, P;  // at Gauss points (A/B/CD) or centers (C)
  std::vector<double> eta_vertex;    // C only
};

inline ViscosityField viscosity_field(const StrainField& eps, const std::vector<double>& H,
                                      const std::vector<double>& A, const StructuredGrid& g,
                                      const DofLayout& L, const PhysParams& p) {
  require(H.size() == L.n_tracer && A.size() == L.n_tracer, "viscosity_field: tracer size mismatch");
  ViscosityField out;
  out.stag = L.stag;

  if (L.stag == Staggering::C) {
    const std::size_t nc = g.n_cells();
    require(eps.c11.size() == nc, "viscosity_field: strain layout mismatch");
    out.zeta.resize(nc);
    out.eta.resize(nc);
    out.P.resize(nc);
    const double inv_e2 = 1.0 / (p.e_ellipse * p.e_ellipse);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t c = g.cidx(i, j);
        const double e12sq =
            0.25 * (eps.c12[g.vidx(i, j)] * eps.c12[g.vidx(i, j)] +
                    eps.c12[g.vidx(i + 1, j)] * eps.c12[g.vidx(i + 1, j)] +
                    eps.c12[g.vidx(i, j + 1)] * eps.c12[g.vidx(i, j + 1)] +
                    eps.c12[g.vidx(i + 1, j + 1)] * eps.c12[g.vidx(i + 1, j + 1)]);
        const double dm = eps.c11[c] - eps.c22[c];
        const double tr = eps.c11[c] + eps.c22[c];
        const double Delta = std::sqrt(inv_e2 * dm * dm + 4.0 * inv_e2 * e12sq + tr * tr +
                                       p.delta_min * p.delta_min);
        const Viscosities vi = viscosities_and_pressure(Delta, ice_strength(H[c], A[c], p), p);
        out.zeta[c] = vi.zeta;
        out.eta[c] = vi.eta;
        out.P[c] = vi.P;
      }
    out.eta_vertex.assign(g.n_vertices(), 0.0);
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i <= g.nx; ++i) {
        double sum = 0.0;
        int n = 0;
        for (int dj = -1; dj <= 0; ++dj)
          for (int di = -1; di <= 0; ++di) {
            const int ci = i + di, cj = j + dj;
            if (ci >= 0 && ci < g.nx && cj >= 0 && cj < g.ny) {
              sum += out.eta[g.cidx(ci, cj)];
              ++n;
            }
          }
        out.eta_vertex[g.vidx(i, j)] = sum / n;
      }
    return out;
  }

  const std::size_t nq = 4 * g.n_cells();
  require(eps.c11.size() == nq, "viscosity_field: strain layout mismatch");
  out.zeta.resize(nq);
  out.eta.resize(nq);
  out.P.resize(nq);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = g.cidx(i, j);
      for (int q = 0; q < 4; ++q) {
        double Hq, Aq;
        if (L.stag == Staggering::A) {
          // vertex-based tracers sampled bilinearly at the Gauss point
          const std::size_t n[4] = {g.vidx(i, j), g.vidx(i + 1, j), g.vidx(i, j + 1),
                                    g.vidx(i + 1, j + 1)};
          Hq = Aq = 0.0;
          for (int a = 0; a < 4; ++a) {
            const double w = fe::q1_val(a, fe::qxi[q], fe::qeta[q]);
            Hq += w * H[n[a]];
            Aq += w * A[n[a]];
          }
        } else {
          Hq = H[c];
          Aq = A[c];
        }
        const std::size_t k = 4 * c + q;
        const Sym2 d{eps.c11[k], eps.c22[k], eps.c12[k]};
        const Viscosities vi =
            viscosities_and_pressure(deformation_delta(d, p), ice_strength(Hq, Aq, p), p);
        out.zeta[k] = vi.zeta;
        out.eta[k] = vi.eta;
        out.P[k] = vi.P;
      }
    }
  return out;
}

/// Stress from frozen coefficients, without the pressure part:
///   s11 = (zeta+eta) e11 + (zeta-eta) e22, s22 = (zeta-eta) e11 + (zeta+eta) e22,
///   s12 = 2 eta e12. Linear in the strain argument.
inline StressField linear_stress_field(const ViscosityField& vf, const StrainField& eps,
                                       const StructuredGrid& g) {
  StressField out = make_tensor_field(g, eps.stag);
  if (eps.stag == Staggering::C) {
    for (std::size_t c = 0; c < eps.c11.size(); ++c) {
      const double tr = eps.c11[c] + eps.c22[c];
      const double dm = eps.c11[c] - eps.c22[c];
      out.c11[c] = vf.zeta[c] * tr + vf.eta[c] * dm;
      out.c22[c] = vf.zeta[c] * tr - vf.eta[c] * dm;
    }
    for (std::size_t k = 0; k < eps.c12.size(); ++k)
      out.c12[k] = 2.0 * vf.eta_vertex[k] * eps.c12[k];
    return out;
  }
  for (std::size_t k = 0; k < eps.c11.size(); ++k) {
    const double tr = eps.c11[k] + eps.c22[k];
    const double dm = eps.c11[k] - eps.c22[k];
    out.c11[k] = vf.zeta[k] * tr + vf.eta[k] * dm;
    out.c22[k] = vf.zeta[k] * tr - vf.eta[k] * dm;
    out.c12[k] = 2.0 * vf.eta[k] * eps.c12[k];
  }
  return out;
}

/// Isotropic pressure part -(P/2) I of the stress.
inline StressField pressure_stress_field(const ViscosityField& vf, const StructuredGrid& g) {
  StressField out = make_tensor_field(g, vf.stag);
  for (std::size_t k = 0; k < vf.P.size(); ++k) {
    out.c11[k] = -0.5 * vf.P[k];
    out.c22[k] = -0.5 * vf.P[k];
  }
  return out;
}

inline void add_scaled(TensorField& a, const TensorField& b, double s) {
  for (std::size_t k = 0; k < a.c11.size(); ++k) a.c11[k] += s * b.c11[k];
  for (std::size_t k = 0; k < a.c22.size(); ++k) a.c22[k] += s * b.c22[k];
  for (std::size_t k = 0; k < a.c12.size(); ++k) a.c12[k] += s * b.c12[k];
}

/// Full viscous-plastic stress evaluated from a velocity field.
inline StressField vp_stress_field(const std::vector<double>& v, const std::vector<double>& H,
                                   const std::vector<double>& A, const StructuredGrid& g,
                                   const DofLayout& L, const PhysParams& p) {
  const StrainField eps = strain_rate_field(v, g, L);
  const ViscosityField vf = viscosity_field(eps, H, A, g, L, p);
  StressField s = linear_stress_field(vf, eps, g);
  const StressField pr = pressure_stress_field(vf, g);
  add_scaled(s, pr, 1.0);
  return s;
}

/// Pointwise stress-divergence force (N/m^2), one value per velocity DoF.
///
/// A, B, CD: weak-form divergence divided by the lumped area, so that
///   sum_k omega_k force_k w_k = -integral sigma : eps(w)
/// holds exactly for any w vanishing on the rim. C: finite-volume central
/// differences of the staggered stress components. Boundary rows are zero.
inline std::vector<double> stress_divergence(const StressField& sig, const StructuredGrid& g,
                                             const DofLayout& L) {
  require(sig.stag == L.stag, "stress_divergence: staggering mismatch");
  std::vector<double> f(L.n_velocity, 0.0);
  const double h = g.dx;
  const double sc = 2.0 / h;
  const double wq = 0.25 * h * h;  // quadrature weight x Jacobian per Gauss point

  switch (L.stag) {
    case Staggering::A:
    case Staggering::B: {
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t c = g.cidx(i, j);
          const std::size_t n[4] = {g.vidx(i, j), g.vidx(i + 1, j), g.vidx(i, j + 1),
                                    g.vidx(i + 1, j + 1)};
          for (int q = 0; q < 4; ++q) {
            const std::size_t k = 4 * c + q;
            for (int a = 0; a < 4; ++a) {
              const double dx = sc * fe::q1_dxi(a, fe::qxi[q], fe::qeta[q]);
              const double dy = sc * fe::q1_deta(a, fe::qxi[q], fe::qeta[q]);
              f[L.off_u + n[a]] -= wq * (sig.c11[k] * dx + sig.c12[k] * dy);
              f[L.off_v + n[a]] -= wq * (sig.c22[k] * dy + sig.c12[k] * dx);
            }
          }
        }
      break;
    }
    case Staggering::CD: {
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t c = g.cidx(i, j);
          const std::size_t eu[4] = {L.u_hedge(i, j), L.u_vedge(i + 1, j), L.u_hedge(i, j + 1),
                                     L.u_vedge(i, j)};
          const std::size_t ev[4] = {L.v_hedge(i, j), L.v_vedge(i + 1, j), L.v_hedge(i, j + 1),
                                     L.v_vedge(i, j)};
          for (int q = 0; q < 4; ++q) {
            const std::size_t k = 4 * c + q;
            for (int a = 0; a < 4; ++a) {
              const double dx = sc * fe::cr_dxi(a, fe::qxi[q], fe::qeta[q]);
              const double dy = sc * fe::cr_deta(a, fe::qxi[q], fe::qeta[q]);
              f[eu[a]] -= wq * (sig.c11[k] * dx + sig.c12[k] * dy);
              f[ev[a]] -= wq * (sig.c22[k] * dy + sig.c12[k] * dx);
            }
          }
        }
      break;
    }
    case Staggering::C: {
      for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
          f[L.u_vedge_c(i, j)] = (sig.c11[g.cidx(i, j)] - sig.c11[g.cidx(i - 1, j)]) / h +
                                 (sig.c12[g.vidx(i, j + 1)] - sig.c12[g.vidx(i, j)]) / h;
      for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          f[L.v_hedge_c(i, j)] = (sig.c22[g.cidx(i, j)] - sig.c22[g.cidx(i, j - 1)]) / h +
                                 (sig.c12[g.vidx(i + 1, j)] - sig.c12[g.vidx(i, j)]) / h;
      return f;  // rows outside the loops stay zero
    }
  }
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (L.boundary[k])
      f[k] = 0.0;
    else
      f[k] /= L.omega[k];
  }
  return f;
}

/// Cell-mean bulk viscosity, used to weight the edge-jump penalty.
inline std::vector<double> cell_mean_zeta(const ViscosityField& vf, const StructuredGrid& g) {
  std::vector<double> z(g.n_cells(), 0.0);
  if (vf.stag == Staggering::C) {
    z = vf.zeta;
    return z;
  }
  for (std::size_t c = 0; c < z.size(); ++c)
    z[c] = 0.25 * (vf.zeta[4 * c] + vf.zeta[4 * c + 1] + vf.zeta[4 * c + 2] + vf.zeta[4 * c + 3]);
  return z;
}

/// Interior-edge jump penalty for the rotated-bilinear (CD) velocity:
///   S(v, w) = gamma_s sum_E (zeta_E / h_E) int_E [v].[w] ds
/// applied per component; returns the pointwise force S(v, phi_k)/omega_k.
/// The form is positive semidefinite in the lumped-area inner product; used
/// with a positive sign in the momentum residual it damps the checkerboard
/// modes of the element's strain null space.
inline std::vector<double> cr_jump_stabilization(const std::vector<double>& v,
                                                 const StructuredGrid& g, const DofLayout& L,
                                                 const std::vector<double>& zeta_cell,
                                                 double gamma_s) {
  require(L.stag == Staggering::CD, "cr_jump_stabilization: requires the CD staggering");
  require(v.size() == L.n_velocity, "cr_jump_stabilization: velocity size mismatch");
  require(zeta_cell.size() == g.n_cells(), "cr_jump_stabilization: zeta size mismatch");
  std::vector<double> f(L.n_velocity, 0.0);
  if (gamma_s == 0.0) return f;
  const double h = g.dx;

  // Six non-shared DoFs per interior edge and component: the two adjacent and
  // the opposite edge of each neighbor cell (the shared DoF's traces cancel).
  struct Entry {
    std::size_t dof;
    int kind;    // 0 = adjacent at q=-1, 1 = adjacent at q=+1, 2 = opposite
    double sign; // +1 first cell, -1 second cell
  };

  auto accumulate = [&](const Entry (&ent)[6], double zbar) {
    for (int gp = 0; gp < 3; ++gp) {
      const double q = fe::edge_q[gp];
      double tr[3] = {fe::trace_adj(q, 0), fe::trace_adj(q, 1), fe::trace_opp(q)};
      double jump = 0.0;
      for (const Entry& e : ent) jump += e.sign * tr[e.kind] * v[e.dof];
      // ds = (h/2) dq; gamma (zbar/h) (h/2) = gamma zbar / 2
      const double w = gamma_s * zbar * 0.5 * fe::edge_w[gp] * jump;
      for (const Entry& e : ent) f[e.dof] += w * e.sign * tr[e.kind];
    }
  };

  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) {  // interior vertical edges; q runs bottom->top
      const double zbar = 0.5 * (zeta_cell[g.cidx(i - 1, j)] + zeta_cell[g.cidx(i, j)]);
      const Entry ent_u[6] = {{L.u_hedge(i - 1, j), 0, 1.0},     {L.u_hedge(i - 1, j + 1), 1, 1.0},
                              {L.u_vedge(i - 1, j), 2, 1.0},     {L.u_hedge(i, j), 0, -1.0},
                              {L.u_hedge(i, j + 1), 1, -1.0},    {L.u_vedge(i + 1, j), 2, -1.0}};
      const Entry ent_v[6] = {{L.v_hedge(i - 1, j), 0, 1.0},     {L.v_hedge(i - 1, j + 1), 1, 1.0},
                              {L.v_vedge(i - 1, j), 2, 1.0},     {L.v_hedge(i, j), 0, -1.0},
                              {L.v_hedge(i, j + 1), 1, -1.0},    {L.v_vedge(i + 1, j), 2, -1.0}};
      accumulate(ent_u, zbar);
      accumulate(ent_v, zbar);
    }
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {  // interior horizontal edges; q runs left->right
      const double zbar = 0.5 * (zeta_cell[g.cidx(i, j - 1)] + zeta_cell[g.cidx(i, j)]);
      const Entry ent_u[6] = {{L.u_vedge(i, j - 1), 0, 1.0},     {L.u_vedge(i + 1, j - 1), 1, 1.0},
                              {L.u_hedge(i, j - 1), 2, 1.0},     {L.u_vedge(i, j), 0, -1.0},
                              {L.u_vedge(i + 1, j), 1, -1.0},    {L.u_hedge(i, j + 1), 2, -1.0}};
      const Entry ent_v[6] = {{L.v_vedge(i, j - 1), 0, 1.0},     {L.v_vedge(i + 1, j - 1), 1, 1.0},
                              {L.v_hedge(i, j - 1), 2, 1.0},     {L.v_vedge(i, j), 0, -1.0},
                              {L.v_vedge(i + 1, j), 1, -1.0},    {L.v_hedge(i, j + 1), 2, -1.0}};
      accumulate(ent_u, zbar);
      accumulate(ent_v, zbar);
    }

  for (std::size_t k = 0; k < f.size(); ++k) {
    if (L.boundary[k])
      f[k] = 0.0;
    else
      f[k] /= L.omega[k];
  }
  return f;
}

/// Tracer values carried to the velocity DoFs: identity for vertex tracers on
/// the A staggering, adjacent-cell arithmetic means otherwise (4 cells for B
/// vertices, 2 cells for edge DoFs, fewer on the rim).
struct VelocityPointTracers {
  std::vector<double> mass;  // rho_ice * H (kg/m^2)
  std::vector<double> conc;  // concentration
};

inline VelocityPointTracers tracers_at_velocity_points(const std::vector<double>& H,
                                                       const std::vector<double>& A,
                                                       const StructuredGrid& g, const DofLayout& L,
                                                       const PhysParams& p) {
  require(H.size() == L.n_tracer && A.size() == L.n_tracer,
          "tracers_at_velocity_points: tracer size mismatch");
  VelocityPointTracers out;
  out.mass.assign(L.n_velocity, 0.0);
  out.conc.assign(L.n_velocity, 0.0);

  auto cell_mean_at_vertex = [&](const std::vector<double>& t, int i, int j) {
    double sum = 0.0;
    int n = 0;
    for (int dj = -1; dj <= 0; ++dj)
      for (int di = -1; di <= 0; ++di) {
        const int ci = i + di, cj = j + dj;
        if (ci >= 0 && ci < g.nx && cj >= 0 && cj < g.ny) {
          sum += t[g.cidx(ci, cj)];
          ++n;
        }
      }
    return sum / n;
  };
  auto mean_pair = [&](const std::vector<double>& t, int c0i, int c0j, int c1i, int c1j) {
    double sum = 0.0;
    int n = 0;
    if (c0i >= 0 && c0i < g.nx && c0j >= 0 && c0j < g.ny) { sum += t[g.cidx(c0i, c0j)]; ++n; }
    if (c1i >= 0 && c1i < g.nx && c1j >= 0 && c1j < g.ny) { sum += t[g.cidx(c1i, c1j)]; ++n; }
    return sum / n;
  };

  switch (L.stag) {
    case Staggering::A:
      for (std::size_t k = 0; k < L.nv; ++k) {
        out.mass[L.off_u + k] = out.mass[L.off_v + k] = p.rho_ice * H[k];
        out.conc[L.off_u + k] = out.conc[L.off_v + k] = A[k];
      }
      break;
    case Staggering::B:
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          const std::size_t k = g.vidx(i, j);
          out.mass[L.off_u + k] = out.mass[L.off_v + k] = p.rho_ice * cell_mean_at_vertex(H, i, j);
          out.conc[L.off_u + k] = out.conc[L.off_v + k] = cell_mean_at_vertex(A, i, j);
        }
      break;
    case Staggering::C:
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          const std::size_t k = L.u_vedge_c(i, j);
          out.mass[k] = p.rho_ice * mean_pair(H, i - 1, j, i, j);
          out.conc[k] = mean_pair(A, i - 1, j, i, j);
        }
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t k = L.v_hedge_c(i, j);
          out.mass[k] = p.rho_ice * mean_pair(H, i, j - 1, i, j);
          out.conc[k] = mean_pair(A, i, j - 1, i, j);
        }
      break;
    case Staggering::CD:
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
          const double m = p.rho_ice * mean_pair(H, i - 1, j, i, j);
          const double a = mean_pair(A, i - 1, j, i, j);
          out.mass[L.u_vedge(i, j)] = out.mass[L.v_vedge(i, j)] = m;
          out.conc[L.u_vedge(i, j)] = out.conc[L.v_vedge(i, j)] = a;
        }
      for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const double m = p.rho_ice * mean_pair(H, i, j - 1, i, j);
          const double a = mean_pair(A, i, j - 1, i, j);
          out.mass[L.u_hedge(i, j)] = out.mass[L.v_hedge(i, j)] = m;
          out.conc[L.u_hedge(i, j)] = out.conc[L.v_hedge(i, j)] = a;
        }
      break;
  }
  return out;
}

/// For each velocity DoF, the value of the opposite component at the DoF's
/// position: the co-located partner for A/B/CD, a 4-point average of the
/// surrounding transverse DoFs for C (zero on rim rows, which are masked
/// everywhere they are consumed).
inline std::vector<double> transverse_velocity(const std::vector<double>& v, const StructuredGrid& g,
                                               const DofLayout& L) {
  require(v.size() == L.n_velocity, "transverse_velocity: velocity size mismatch");
  std::vector<double> t(L.n_velocity, 0.0);
  if (L.stag != Staggering::C) {
    for (std::size_t pt = 0; pt < L.n_points; ++pt) {
      t[L.point_iu[pt]] = v[L.point_iv[pt]];
      t[L.point_iv[pt]] = v[L.point_iu[pt]];
    }
    return t;
  }
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i)
      t[L.u_vedge_c(i, j)] = 0.25 * (v[L.v_hedge_c(i - 1, j)] + v[L.v_hedge_c(i, j)] +
                                     v[L.v_hedge_c(i - 1, j + 1)] + v[L.v_hedge_c(i, j + 1)]);
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      t[L.v_hedge_c(i, j)] = 0.25 * (v[L.u_vedge_c(i, j - 1)] + v[L.u_vedge_c(i + 1, j - 1)] +
                                     v[L.u_vedge_c(i, j)] + v[L.u_vedge_c(i + 1, j)]);
  return t;
}

/// External fields sampled at every velocity DoF position (both vector
/// components at each DoF).
struct ForcingSample {
  std::vector<double> ocean_x, ocean_y;  // m/s
  std::vector<double> wind_x, wind_y;    // m/s
  std::vector<double> tilt_x, tilt_y;    // sea-surface slope (dimensionless), default zero
};

inline ForcingSample zero_forcing(const DofLayout& L) {
  ForcingSample f;
  f.ocean_x.assign(L.n_velocity, 0.0);
  f.ocean_y.assign(L.n_velocity, 0.0);
  f.wind_x.assign(L.n_velocity, 0.0);
  f.wind_y.assign(L.n_velocity, 0.0);
  f.tilt_x.assign(L.n_velocity, 0.0);
  f.tilt_y.assign(L.n_velocity, 0.0);
  return f;
}

/// Pointwise residual of the semi-discrete momentum balance (N/m^2):
///   r = m (v - v_old)/dt + m f_c e_z x v - div sigma(v) - A tau(v)
///       + m g_grav tilt + jump penalty
/// with m = rho_ice H and A averaged to velocity points. tau is the sum of the
/// quadratic water drag (relative to the ocean current) and the wind stress.
/// The penalty enters with the damping sign, consistent with its positive
/// semidefiniteness. Boundary rows are identically zero (no-slip).
inline std::vector<double> momentum_residual(const std::vector<double>& H,
                                             const std::vector<double>& A,
                                             const std::vector<double>& v_trial,
                                             const std::vector<double>& v_old, double dt,
                                             const ForcingSample& fs, const StructuredGrid& g,
                                             const DofLayout& L, const PhysParams& p,
                                             double gamma_s) {
  require(dt > 0.0, "momentum_residual: dt must be positive");
  const StrainField eps = strain_rate_field(v_trial, g, L);
  const ViscosityField vf = viscosity_field(eps, H, A, g, L, p);
  StressField sig = linear_stress_field(vf, eps, g);
  add_scaled(sig, pressure_stress_field(vf, g), 1.0);
  std::vector<double> r = stress_divergence(sig, g, L);
  for (double& x : r) x = -x;

  if (L.stag == Staggering::CD && gamma_s != 0.0) {
    const std::vector<double> stab =
        cr_jump_stabilization(v_trial, g, L, cell_mean_zeta(vf, g), gamma_s);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += stab[k];
  }

  const VelocityPointTracers aux = tracers_at_velocity_points(H, A, g, L, p);
  const std::vector<double> trans = transverse_velocity(v_trial, g, L);

  for (std::size_t k = 0; k < L.n_velocity; ++k) {
    if (L.boundary[k]) {
      r[k] = 0.0;
      continue;
    }
    const double m = aux.mass[k];
    const bool is_u = (L.comp[k] == 0);
    const Vec2 vi = is_u ? Vec2{v_trial[k], trans[k]} : Vec2{trans[k], v_trial[k]};
    const Vec2 vw{fs.ocean_x[k], fs.ocean_y[k]};
    const Vec2 va{fs.wind_x[k], fs.wind_y[k]};
    const Vec2 tau = water_stress(vw, vi, p) + wind_stress(va, p);

    const double inertia = m * (v_trial[k] - v_old[k]) / dt;
    const double coriolis = m * p.f_c * (is_u ? -trans[k] : trans[k]);
    const double drag = aux.conc[k] * (is_u ? tau.x : tau.y);
    const double tilt = m * p.g_grav * (is_u ? fs.tilt_x[k] : fs.tilt_y[k]);
    r[k] += inertia + coriolis - drag + tilt;
  }
  return r;
}

/// Lumped-area inner product over velocity DoFs; the discrete L2 pairing in
/// which the weak-form identities of this file hold.
inline double dot_omega(const std::vector<double>& a, const std::vector<double>& b,
                        const DofLayout& L) {
  double s = 0.0;
  for (std::size_t k = 0; k < L.n_velocity; ++k) s += L.omega[k] * a[k] * b[k];
  return s;
}

/// Quadrature pairing of two tensor fields: integral a : b with the convention
/// a : b = a11 b11 + a22 b22 + 2 a12 b12. Defined for Gauss-point storage.
inline double dot_tensor(const TensorField& a, const TensorField& b, const StructuredGrid& g) {
  require(a.stag != Staggering::C && a.c11.size() == b.c11.size(),
          "dot_tensor: Gauss-point storage required");
  const double wq = 0.25 * g.dx * g.dx;
  double s = 0.0;
  for (std::size_t k = 0; k < a.c11.size(); ++k)
    s += wq * (a.c11[k] * b.c11[k] + a.c22[k] * b.c22[k] + 2.0 * a.c12[k] * b.c12[k]);
  return s;
}

/// Strain components averaged to the tracer points: cell means of the
/// quadrature values (A additionally averages adjacent cells to vertices);
/// for C the corner c12 values are averaged to centers.
struct TracerStrain {
  std::vector<double> e11, e22, e12;  // sized n_tracer
};

inline TracerStrain strain_at_tracer_points(const StrainField& eps, const StructuredGrid& g,
                                            const DofLayout& L) {
  TracerStrain out;
  const std::size_t nc = g.n_cells();
  std::vector<double> m11(nc), m22(nc), m12(nc);
  if (L.stag == Staggering::C) {
    m11 = eps.c11;
    m22 = eps.c22;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        m12[g.cidx(i, j)] = 0.25 * (eps.c12[g.vidx(i, j)] + eps.c12[g.vidx(i + 1, j)] +
                                    eps.c12[g.vidx(i, j + 1)] + eps.c12[g.vidx(i + 1, j + 1)]);
  } else {
    for (std::size_t c = 0; c < nc; ++c) {
      m11[c] = 0.25 * (eps.c11[4 * c] + eps.c11[4 * c + 1] + eps.c11[4 * c + 2] + eps.c11[4 * c + 3]);
      m22[c] = 0.25 * (eps.c22[4 * c] + eps.c22[4 * c + 1] + eps.c22[4 * c + 2] + eps.c22[4 * c + 3]);
      m12[c] = 0.25 * (eps.c12[4 * c] + eps.c12[4 * c + 1] + eps.c12[4 * c + 2] + eps.c12[4 * c + 3]);
    }
  }
  if (L.stag != Staggering::A) {
    out.e11 = std::move(m11);
    out.e22 = std::move(m22);
    out.e12 = std::move(m12);
    return out;
  }
  out.e11.assign(L.nv, 0.0);
  out.e22.assign(L.nv, 0.0);
  out.e12.assign(L.nv, 0.0);
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      double s11 = 0, s22 = 0, s12 = 0;
      int n = 0;
      for (int dj = -1; dj <= 0; ++dj)
        for (int di = -1; di <= 0; ++di) {
          const int ci = i + di, cj = j + dj;
          if (ci >= 0 && ci < g.nx && cj >= 0 && cj < g.ny) {
            s11 += m11[g.cidx(ci, cj)];
            s22 += m22[g.cidx(ci, cj)];
            s12 += m12[g.cidx(ci, cj)];
            ++n;
          }
        }
      const std::size_t k = g.vidx(i, j);
      out.e11[k] = s11 / n;
      out.e22[k] = s22 / n;
      out.e12[k] = s12 / n;
    }
  return out;
}

/// Shear deformation rate at tracer points, computed from the averaged
/// strain components.
inline std::vector<double> shear_at_tracer_points(const StrainField& eps, const StructuredGrid& g,
                                                  const DofLayout& L) {
  const TracerStrain ts = strain_at_tracer_points(eps, g, L);
  std::vector<double> s(ts.e11.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    s[k] = shear_rate({ts.e11[k], ts.e22[k], ts.e12[k]});
  return s;
}

/// Regularized deformation magnitude at tracer points.
inline std::vector<double> delta_at_tracer_points(const StrainField& eps, const StructuredGrid& g,
                                                  const DofLayout& L, const PhysParams& p) {
  const TracerStrain ts = strain_at_tracer_points(eps, g, L);
  std::vector<double> d(ts.e11.size());
  for (std::size_t k = 0; k < d.size(); ++k)
    d[k] = deformation_delta({ts.e11[k], ts.e22[k], ts.e12[k]}, p);
  return d;
}

}  // namespace icedyn
