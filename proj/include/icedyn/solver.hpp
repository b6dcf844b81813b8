#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icedyn/grid.hpp"
#include "icedyn/operators.hpp"
#include "icedyn/physics.hpp"

// Momentum solvers: explicit mEVP pseudo-time subcycling and an implicit
// Picard fixed-point iteration with a matrix-free restarted-GMRES inner solve.
// Both share the discrete operators of operators.hpp, so their common fixed
// point satisfies momentum_residual = 0.

namespace icedyn {

struct SolverDivergence : std::runtime_error {
  SolverDivergence(const std::string& what, long iteration)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

inline double norm2(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Restarted GMRES with right diagonal preconditioning.

struct KrylovStats {
  bool converged = false;
  double rel_residual = 0.0;  // true residual over ||b||
  int iterations = 0;
};

/// Solves apply(x) = b to ||b - apply(x)|| <= tol ||b||. `x` carries the
/// initial guess and the result. `precond` is the diagonal of an approximate
/// inverse applied on the right, so the reported residual is the true one.
/// Never throws on stagnation; the caller inspects the stats.
inline KrylovStats gmres(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
                         const std::vector<double>& b, std::vector<double>& x, double tol,
                         int restart, int max_iter, const std::vector<double>& precond) {
  const std::size_t n = b.size();
  KrylovStats st;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    st.converged = true;
    return st;
  }
  const double target = tol * bnorm;

  std::vector<double> r(n), w(n), z(n);
  apply(x, w);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - w[i];
  double rnorm = norm2(r);

  std::vector<std::vector<double>> V;
  std::vector<double> H((restart + 1) * restart, 0.0);
  std::vector<double> cs(restart), sn(restart), g(restart + 1);
  auto h = [&](int i, int j) -> double& { return H[std::size_t(i) * restart + j]; };

  while (rnorm > target && st.iterations < max_iter) {
    V.assign(1, r);
    for (double& v : V[0]) v /= rnorm;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = rnorm;
    int j = 0;
    for (; j < restart && st.iterations < max_iter; ++j) {
      for (std::size_t i = 0; i < n; ++i) z[i] = V[j][i] * precond[i];
      apply(z, w);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += w[k] * V[i][k];
        h(i, j) = dot;
        for (std::size_t k = 0; k < n; ++k) w[k] -= dot * V[i][k];
      }
      h(j + 1, j) = norm2(w);
      ++st.iterations;
      const bool breakdown = (h(j + 1, j) == 0.0);
      if (!breakdown) {
        V.push_back(w);
        for (double& v : V.back()) v /= h(j + 1, j);
      }
      for (int i = 0; i < j; ++i) {  // apply stored rotations to the new column
        const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      cs[j] = denom == 0.0 ? 1.0 : h(j, j) / denom;
      sn[j] = denom == 0.0 ? 0.0 : h(j + 1, j) / denom;
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      if (std::abs(g[j + 1]) <= target || breakdown) {
        ++j;
        break;
      }
    }
    // back-substitute the j x j triangular system and expand
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= h(i, k) * y[k];
      y[i] = s / h(i, i);
    }
    for (int i = 0; i < j; ++i)
      for (std::size_t k = 0; k < n; ++k) x[k] += precond[k] * V[i][k] * y[i];
    apply(x, w);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - w[i];
    const double rnew = norm2(r);
    if (rnew >= rnorm && rnew > target) break;  // stagnated across a restart
    rnorm = rnew;
  }
  st.rel_residual = rnorm / bnorm;
  st.converged = rnorm <= target;
  return st;
}

// ---------------------------------------------------------------------------
// Shared pointwise drag/Coriolis helpers.

namespace detail {

// Diagonal of the frozen-coefficient viscous operator -div sigma_lin(.),
// used only as a preconditioner weight. For the variational staggerings it is
// the exact diagonal of the weak form over omega; for C the exact diagonal of
// the difference stencils.
inline std::vector<double> viscous_diagonal(const ViscosityField& vf, const StructuredGrid& g,
                                            const DofLayout& L) {
  std::vector<double> d(L.n_velocity, 0.0);
  const double h = g.dx;
  const double sc = 2.0 / h;
  const double wq = 0.25 * h * h;

  if (L.stag == Staggering::C) {
    const double h2 = h * h;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 1; i < g.nx; ++i) {
        const double zl = vf.zeta[g.cidx(i - 1, j)] + vf.eta[g.cidx(i - 1, j)];
        const double zr = vf.zeta[g.cidx(i, j)] + vf.eta[g.cidx(i, j)];
        const double eb = vf.eta_vertex[g.vidx(i, j)] * (j == 0 ? 2.0 : 1.0);
        const double et = vf.eta_vertex[g.vidx(i, j + 1)] * (j + 1 == g.ny ? 2.0 : 1.0);
        d[L.u_vedge_c(i, j)] = (zl + zr + eb + et) / h2;
      }
    for (int j = 1; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double zb = vf.zeta[g.cidx(i, j - 1)] + vf.eta[g.cidx(i, j - 1)];
        const double zt = vf.zeta[g.cidx(i, j)] + vf.eta[g.cidx(i, j)];
        const double el = vf.eta_vertex[g.vidx(i, j)] * (i == 0 ? 2.0 : 1.0);
        const double er = vf.eta_vertex[g.vidx(i + 1, j)] * (i + 1 == g.nx ? 2.0 : 1.0);
        d[L.v_hedge_c(i, j)] = (zb + zt + el + er) / h2;
      }
    return d;
  }

  const bool cr = (L.stag == Staggering::CD);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = g.cidx(i, j);
      std::size_t iu[4], iv[4];
      if (cr) {
        iu[0] = L.u_hedge(i, j); iu[1] = L.u_vedge(i + 1, j);
        iu[2] = L.u_hedge(i, j + 1); iu[3] = L.u_vedge(i, j);
        iv[0] = L.v_hedge(i, j); iv[1] = L.v_vedge(i + 1, j);
        iv[2] = L.v_hedge(i, j + 1); iv[3] = L.v_vedge(i, j);
      } else {
        const std::size_t n[4] = {g.vidx(i, j), g.vidx(i + 1, j), g.vidx(i, j + 1),
                                  g.vidx(i + 1, j + 1)};
        for (int a = 0; a < 4; ++a) {
          iu[a] = L.off_u + n[a];
          iv[a] = L.off_v + n[a];
        }
      }
      for (int q = 0; q < 4; ++q) {
        const double zand = vf.zeta[4 * c + q] + vf.eta[4 * c + q];
        const double et = vf.eta[4 * c + q];
        for (int a = 0; a < 4; ++a) {
          const double dx = sc * (cr ? fe::cr_dxi(a, fe::qxi[q], fe::qeta[q])
                                     : fe::q1_dxi(a, fe::qxi[q], fe::qeta[q]));
          const double dy = sc * (cr ? fe::cr_deta(a, fe::qxi[q], fe::qeta[q])
                                     : fe::q1_deta(a, fe::qxi[q], fe::qeta[q]));
          d[iu[a]] += wq * (zand * dx * dx + et * dy * dy);
          d[iv[a]] += wq * (zand * dy * dy + et * dx * dx);
        }
      }
    }
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = L.boundary[k] ? 0.0 : d[k] / L.omega[k];
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// mEVP

struct MevpConfig {
  double alpha = 500.0;
  double beta = 500.0;
  int n_sub = 100;
};

/// Stability-scanned defaults for the square-cell benchmark meshes.
inline MevpConfig default_mevp_for_resolution(double dx) {
  MevpConfig c;
  if (dx >= 6000.0)
    c.alpha = c.beta = 500.0;
  else if (dx >= 3000.0)
    c.alpha = c.beta = 800.0;
  else
    c.alpha = c.beta = 1500.0;
  return c;
}

struct MevpResult {
  std::vector<double> v;
  bool finite = true;
  int diverged_at = -1;  // sub-iteration index of the first nonfinite value
};

/// One momentum solve by mEVP pseudo-time stepping:
///   sigma relaxed by 1/alpha toward the VP stress of the current velocity;
///   velocity relaxed by beta with drag magnitude and Coriolis implicit
///   (2x2 pointwise solve; C lags the transverse Coriolis one sub-iteration).
/// Fixed points satisfy momentum_residual = 0. Boundary DoFs stay zero.
inline MevpResult mevp_step(const std::vector<double>& H, const std::vector<double>& A,
                            const std::vector<double>& v_old, double dt, const ForcingSample& fs,
                            const StructuredGrid& g, const DofLayout& L, const PhysParams& p,
                            double gamma_s, const MevpConfig& cfg) {
  require(cfg.alpha >= 1.0 && cfg.beta >= 1.0, "mevp_step: alpha, beta must be >= 1");
  MevpResult out;
  out.v = v_old;
  zero_boundary(out.v, L);
  const VelocityPointTracers aux = tracers_at_velocity_points(H, A, g, L, p);

  StrainField eps = strain_rate_field(out.v, g, L);
  ViscosityField vf = viscosity_field(eps, H, A, g, L, p);
  StressField sig = linear_stress_field(vf, eps, g);
  add_scaled(sig, pressure_stress_field(vf, g), 1.0);

  const double inv_alpha = 1.0 / cfg.alpha;
  std::vector<double> stab(L.n_velocity, 0.0);

  for (int sub = 1; sub <= cfg.n_sub; ++sub) {
    if (sub > 1) {
      eps = strain_rate_field(out.v, g, L);
      vf = viscosity_field(eps, H, A, g, L, p);
      StressField svp = linear_stress_field(vf, eps, g);
      add_scaled(svp, pressure_stress_field(vf, g), 1.0);
      for (std::size_t k = 0; k < sig.c11.size(); ++k)
        sig.c11[k] += (svp.c11[k] - sig.c11[k]) * inv_alpha;
      for (std::size_t k = 0; k < sig.c22.size(); ++k)
        sig.c22[k] += (svp.c22[k] - sig.c22[k]) * inv_alpha;
      for (std::size_t k = 0; k < sig.c12.size(); ++k)
        sig.c12[k] += (svp.c12[k] - sig.c12[k]) * inv_alpha;
    }
    const std::vector<double> F = stress_divergence(sig, g, L);
    if (L.stag == Staggering::CD && gamma_s != 0.0)
      stab = cr_jump_stabilization(out.v, g, L, cell_mean_zeta(vf, g), gamma_s);
    const std::vector<double> trans = transverse_velocity(out.v, g, L);

    auto rhs_of = [&](std::size_t k, Vec2 vi) {
      const double m = aux.mass[k];
      const Vec2 vw{fs.ocean_x[k], fs.ocean_y[k]};
      const Vec2 ta = wind_stress({fs.wind_x[k], fs.wind_y[k]}, p);
      const double Dw = aux.conc[k] * p.rho_water * p.C_water * norm(vw - vi);
      const bool is_u = (L.comp[k] == 0);
      const double tauc = aux.conc[k] * (is_u ? ta.x : ta.y) + Dw * (is_u ? vw.x : vw.y);
      const double tiltc = m * p.g_grav * (is_u ? fs.tilt_x[k] : fs.tilt_y[k]);
      const double r =
          cfg.beta * out.v[k] + v_old[k] + (dt / m) * (F[k] + tauc - stab[k] - tiltc);
      const double a = cfg.beta + 1.0 + (dt / m) * Dw;
      return Vec2{r, a};  // packed (rhs, diagonal)
    };

    bool ok = true;
    if (L.stag == Staggering::C) {
      const double b = dt * p.f_c;
      for (std::size_t k = 0; k < L.n_velocity; ++k) {
        if (L.boundary[k]) continue;
        const bool is_u = (L.comp[k] == 0);
        const Vec2 vi = is_u ? Vec2{out.v[k], trans[k]} : Vec2{trans[k], out.v[k]};
        const Vec2 ra = rhs_of(k, vi);
        // transverse Coriolis lagged at the previous sub-iterate
        const double vnew = (ra.x + (is_u ? b * trans[k] : -b * trans[k])) / ra.y;
        ok = ok && std::isfinite(vnew);
        out.v[k] = vnew;
      }
    } else {
      const double b = dt * p.f_c;
      for (std::size_t pt = 0; pt < L.n_points; ++pt) {
        const std::size_t iu = L.point_iu[pt], iv = L.point_iv[pt];
        if (L.boundary[iu]) continue;
        const Vec2 vi{out.v[iu], out.v[iv]};
        const Vec2 rx = rhs_of(iu, vi);
        const Vec2 ry = rhs_of(iv, vi);
        const double a = rx.y;  // same drag diagonal for both components
        const double det = a * a + b * b;
        const double unew = (a * rx.x + b * ry.x) / det;
        const double vnew = (a * ry.x - b * rx.x) / det;
        ok = ok && std::isfinite(unew) && std::isfinite(vnew);
        out.v[iu] = unew;
        out.v[iv] = vnew;
      }
    }
    if (!ok) {
      out.finite = false;
      out.diverged_at = sub;
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Picard

struct PicardConfig {
  int max_outer = 100;
  double nonlinear_tol = 0.0;  // relative to the initial residual; 0 = run all iterations
  double linear_tol = 1e-2;
  int krylov_dim = 50;
  int max_linear_iter = 500;
};

struct PicardRecord {
  double nonlinear_residual = 0.0;  // Euclidean norm at the accepted iterate
  double linear_rel_residual = 0.0;
  int linear_iterations = 0;
};

struct PicardResult {
  std::vector<double> v;
  std::vector<PicardRecord> history;  // one entry per outer iteration
  double initial_residual = 0.0;
  double final_residual = 0.0;
  bool reached_tol = false;
  bool linear_stagnation = false;  // some inner solve missed its tolerance
};

/// Implicit VP solve by Picard fixed-point iteration. Outer iteration k
/// freezes zeta, eta, P at v^k and the water-drag magnitude at the mean of
/// the two previous iterates, then solves the linear momentum system with
/// restarted GMRES (right diagonal preconditioning by mass/dt + drag + the
/// viscous diagonal).
inline PicardResult picard_solve(const std::vector<double>& H, const std::vector<double>& A,
                                 const std::vector<double>& v_old, double dt,
                                 const ForcingSample& fs, const StructuredGrid& g,
                                 const DofLayout& L, const PhysParams& p, double gamma_s,
                                 const PicardConfig& cfg) {
  PicardResult out;
  out.v = v_old;
  zero_boundary(out.v, L);
  std::vector<double> v_prev = out.v;  // v^{k-1}; seeded with v_old

  const VelocityPointTracers aux = tracers_at_velocity_points(H, A, g, L, p);

  auto residual_norm = [&](const std::vector<double>& v) {
    return norm2(momentum_residual(H, A, v, v_old, dt, fs, g, L, p, gamma_s));
  };
  out.initial_residual = residual_norm(out.v);
  out.final_residual = out.initial_residual;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    if (out.final_residual <= cfg.nonlinear_tol * out.initial_residual + 1e-300) {
      out.reached_tol = true;
      break;
    }
    // freeze coefficients
    const StrainField eps = strain_rate_field(out.v, g, L);
    const ViscosityField vf = viscosity_field(eps, H, A, g, L, p);
    const std::vector<double> zbar =
        L.stag == Staggering::CD ? cell_mean_zeta(vf, g) : std::vector<double>();

    std::vector<double> vmean(L.n_velocity);
    for (std::size_t k = 0; k < vmean.size(); ++k) vmean[k] = 0.5 * (out.v[k] + v_prev[k]);
    const std::vector<double> tmean = transverse_velocity(vmean, g, L);
    std::vector<double> cw(L.n_velocity, 0.0);  // frozen drag coefficient x concentration
    for (std::size_t k = 0; k < cw.size(); ++k) {
      const bool is_u = (L.comp[k] == 0);
      const Vec2 vi = is_u ? Vec2{vmean[k], tmean[k]} : Vec2{tmean[k], vmean[k]};
      const Vec2 vw{fs.ocean_x[k], fs.ocean_y[k]};
      cw[k] = aux.conc[k] * p.rho_water * p.C_water * norm(vw - vi);
    }

    // right-hand side: inertia against v_old, replacement pressure, ocean
    // drag at the frozen coefficient, wind stress, tilt
    std::vector<double> b = stress_divergence(pressure_stress_field(vf, g), g, L);
    for (std::size_t k = 0; k < L.n_velocity; ++k) {
      if (L.boundary[k]) {
        b[k] = 0.0;
        continue;
      }
      const bool is_u = (L.comp[k] == 0);
      const Vec2 ta = wind_stress({fs.wind_x[k], fs.wind_y[k]}, p);
      b[k] += aux.mass[k] * v_old[k] / dt + cw[k] * (is_u ? fs.ocean_x[k] : fs.ocean_y[k]) +
              aux.conc[k] * (is_u ? ta.x : ta.y) -
              aux.mass[k] * p.g_grav * (is_u ? fs.tilt_x[k] : fs.tilt_y[k]);
    }

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
      const StrainField ex = strain_rate_field(x, g, L);
      const StressField sx = linear_stress_field(vf, ex, g);
      y = stress_divergence(sx, g, L);
      for (double& t : y) t = -t;
      if (L.stag == Staggering::CD && gamma_s != 0.0) {
        const std::vector<double> st = cr_jump_stabilization(x, g, L, zbar, gamma_s);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += st[k];
      }
      const std::vector<double> tx = transverse_velocity(x, g, L);
      for (std::size_t k = 0; k < L.n_velocity; ++k) {
        if (L.boundary[k]) {
          y[k] = x[k];
          continue;
        }
        const bool is_u = (L.comp[k] == 0);
        const double cor = aux.mass[k] * p.f_c * (is_u ? -tx[k] : tx[k]);
        y[k] += aux.mass[k] * x[k] / dt + cw[k] * x[k] + cor;
      }
    };

    std::vector<double> diag = detail::viscous_diagonal(vf, g, L);
    for (std::size_t k = 0; k < diag.size(); ++k)
      diag[k] = L.boundary[k] ? 1.0 : 1.0 / (diag[k] + aux.mass[k] / dt + cw[k]);

    std::vector<double> x = out.v;
    const KrylovStats ks =
        gmres(apply, b, x, cfg.linear_tol, cfg.krylov_dim, cfg.max_linear_iter, diag);
    if (!ks.converged) out.linear_stagnation = true;

    v_prev = out.v;
    out.v = x;
    zero_boundary(out.v, L);
    out.final_residual = residual_norm(out.v);
    out.history.push_back({out.final_residual, ks.rel_residual, ks.iterations});
  }
  if (out.final_residual <= cfg.nonlinear_tol * out.initial_residual + 1e-300)
    out.reached_tol = true;
  return out;
}

}  // namespace icedyn
