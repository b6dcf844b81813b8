#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "icedyn/benchmark.hpp"
#include "icedyn/solver.hpp"

using namespace icedyn;

namespace {

// Dense Gaussian elimination with partial pivoting; oracle for the Krylov solver.
std::vector<double> dense_solve(std::vector<std::vector<double>> M, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
    std::swap(M[col], M[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = M[r][col] / M[col][col];
      for (std::size_t c = col; c < n; ++c) M[r][c] -= f * M[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= M[r][c] * x[c];
    x[r] = s / M[r][r];
  }
  return x;
}

std::vector<std::vector<double>> random_dd_matrix(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  std::vector<std::vector<double>> M(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (c == r) continue;
      M[r][c] = off(rng);
      row_sum += std::abs(M[r][c]);
    }
    M[r][r] = row_sum + 1.0 + 0.5 * std::abs(off(rng));  // strictly diagonally dominant
  }
  return M;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

struct SmallProblem {
  StructuredGrid g;
  DofLayout L;
  std::vector<double> H, A;
  ForcingSample fs;
  std::vector<double> v_old;
  PhysParams pp;
  double dt = 120.0;
};

// Benchmark-like state on a coarse mesh: uniform thin ice, full concentration,
// cyclone over the domain center plus the steady anticyclonic ocean current.
SmallProblem make_problem(Staggering stag, int n = 8, double dx = 8000.0) {
  SmallProblem p{StructuredGrid(n, n, dx), dof_layout(StructuredGrid(n, n, dx), stag),
                 {},                       {},
                 {},                       {},
                 PhysParams{},             120.0};
  p.H.assign(p.L.n_tracer, 0.3);
  p.A.assign(p.L.n_tracer, 1.0);
  CycloneForcing cyc;
  cyc.L = n * dx;
  cyc.start = {0.5 * n * dx, 0.5 * n * dx};
  cyc.speed = {0.0, 0.0};
  p.fs = sample_forcing(cyc, Vec2{0.0, 0.0}, p.dt / 86400.0, p.g, p.L);
  p.v_old.assign(p.L.n_velocity, 0.0);
  return p;
}

}  // namespace

TEST_CASE("gmres matches a dense direct solve", "[solver]") {
  const std::size_t n = 40;
  auto M = random_dd_matrix(n, 91u);
  std::mt19937 rng(17u);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> b(n);
  for (auto& v : b) v = dist(rng);

  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += M[r][c] * x[c];
      y[r] = s;
    }
  };

  const auto exact = dense_solve(M, b);
  const std::vector<double> ones(n, 1.0);

  SECTION("identity weights") {
    std::vector<double> x(n, 0.0);
    auto st = gmres(apply, b, x, 1e-12, 50, 400, ones);
    CHECK(st.converged);
    CHECK(st.rel_residual <= 1e-12);
    CHECK(rel_diff(x, exact) < 1e-10);
  }

  SECTION("right diagonal preconditioning gives the same solution") {
    std::vector<double> dinv(n);
    for (std::size_t r = 0; r < n; ++r) dinv[r] = 1.0 / M[r][r];
    std::vector<double> x(n, 0.0);
    auto st = gmres(apply, b, x, 1e-12, 50, 400, dinv);
    CHECK(st.converged);
    CHECK(rel_diff(x, exact) < 1e-10);
  }

  SECTION("restarted cycles still converge") {
    std::vector<double> x(n, 0.0);
    auto st = gmres(apply, b, x, 1e-11, 7, 400, ones);
    CHECK(st.converged);
    CHECK(rel_diff(x, exact) < 1e-9);
    CHECK(st.iterations > 7);  // must have restarted at least once
  }
}

TEST_CASE("gmres edge cases", "[solver]") {
  auto ident = [](const std::vector<double>& x, std::vector<double>& y) { y = x; };

  SECTION("zero right-hand side returns zero immediately") {
    std::vector<double> b(12, 0.0), x(12, 5.0);
    auto st = gmres(ident, b, x, 1e-10, 10, 100, std::vector<double>(12, 1.0));
    CHECK(st.converged);
    CHECK(st.iterations == 0);
    for (double v : x) CHECK(v == 0.0);
  }

  SECTION("identity converges in one iteration") {
    std::vector<double> b{1.0, -2.0, 3.0}, x(3, 0.0);
    auto st = gmres(ident, b, x, 1e-12, 10, 100, std::vector<double>(3, 1.0));
    CHECK(st.converged);
    CHECK(st.iterations == 1);
    CHECK(x[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(x[1] == Catch::Approx(-2.0).margin(1e-12));
    CHECK(x[2] == Catch::Approx(3.0).margin(1e-12));
  }

  SECTION("iteration cap reports non-convergence honestly") {
    auto M = random_dd_matrix(30, 5u);
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
      for (std::size_t r = 0; r < 30; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 30; ++c) s += M[r][c] * x[c];
        y[r] = s;
      }
    };
    std::vector<double> b(30, 1.0), x(30, 0.0);
    auto st = gmres(apply, b, x, 1e-14, 10, 1, std::vector<double>(30, 1.0));
    CHECK_FALSE(st.converged);
    CHECK(st.rel_residual > 1e-14);
  }
}

TEST_CASE("viscous diagonal matches the assembled operator", "[solver]") {
  const double zeta_c = 3.0e11, eta_c = zeta_c / 4.0;
  for (auto stag : {Staggering::A, Staggering::B, Staggering::C, Staggering::CD}) {
    CAPTURE(to_string(stag));
    StructuredGrid g(6, 6, 8000.0);
    DofLayout L = dof_layout(g, stag);

    ViscosityField vf;
    vf.stag = stag;
    const std::size_t nq = (stag == Staggering::C) ? g.n_cells() : 4 * g.n_cells();
    vf.zeta.assign(nq, zeta_c);
    vf.eta.assign(nq, eta_c);
    vf.P.assign(nq, 0.0);
    if (stag == Staggering::C) vf.eta_vertex.assign(g.n_vertices(), eta_c);

    const auto diag = detail::viscous_diagonal(vf, g, L);
    REQUIRE(diag.size() == L.n_velocity);

    // Apply the frozen-coefficient operator to unit vectors and read its diagonal.
    std::vector<double> e(L.n_velocity, 0.0);
    for (std::size_t k = 0; k < L.n_velocity; ++k) {
      if (L.boundary[k]) {
        CHECK(diag[k] == 0.0);
        continue;
      }
      e[k] = 1.0;
      const auto eps = strain_rate_field(e, g, L);
      const auto sig = linear_stress_field(vf, eps, g);
      const auto F = stress_divergence(sig, g, L);
      CHECK_THAT(-F[k], Catch::Matchers::WithinRel(diag[k], 1e-10));
      CHECK(diag[k] > 0.0);
      e[k] = 0.0;
    }
  }
}

TEST_CASE("default mEVP parameters step with resolution", "[solver]") {
  CHECK(default_mevp_for_resolution(16000.0).alpha == 500.0);
  CHECK(default_mevp_for_resolution(8000.0).alpha == 500.0);
  CHECK(default_mevp_for_resolution(6000.0).alpha == 500.0);
  CHECK(default_mevp_for_resolution(4000.0).alpha == 800.0);
  CHECK(default_mevp_for_resolution(3000.0).alpha == 800.0);
  CHECK(default_mevp_for_resolution(2000.0).alpha == 1500.0);
  CHECK(default_mevp_for_resolution(1000.0).alpha == 1500.0);
  for (double dx : {8000.0, 4000.0, 2000.0}) {
    auto c = default_mevp_for_resolution(dx);
    CHECK(c.alpha == c.beta);
    CHECK(c.n_sub == 100);
  }
}

TEST_CASE("mEVP iterates toward the momentum balance", "[solver][mevp]") {
  for (auto stag : {Staggering::A, Staggering::B, Staggering::C, Staggering::CD}) {
    CAPTURE(to_string(stag));
    auto p = make_problem(stag);
    const double gamma_s = (stag == Staggering::CD) ? 0.01 : 0.0;

    auto res_of = [&](const std::vector<double>& v) {
      return norm2(momentum_residual(p.H, p.A, v, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s));
    };
    const double r0 = res_of(p.v_old);
    REQUIRE(r0 > 0.0);

    // The pseudo-elastic transient rings for O(alpha) sub-iterations, so only
    // deep iteration counts are meaningful residual probes.
    MevpConfig coarse{500.0, 500.0, 4000};
    auto out1 = mevp_step(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s, coarse);
    REQUIRE(out1.finite);

    MevpConfig fine{500.0, 500.0, 40000};
    auto out2 = mevp_step(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s, fine);
    REQUIRE(out2.finite);

    const double r1 = res_of(out1.v);
    const double r2 = res_of(out2.v);
    CHECK(r1 < r0);         // past the transient the residual has dropped
    CHECK(r2 < 1e-4 * r0);  // deep iteration drives the residual toward zero
    CHECK(r2 < 0.05 * r1);

    for (std::size_t k = 0; k < p.L.n_velocity; ++k)
      if (p.L.boundary[k]) CHECK(out2.v[k] == 0.0);
  }
}

TEST_CASE("mEVP rejects degenerate relaxation parameters", "[solver][mevp]") {
  auto p = make_problem(Staggering::CD, 4);
  MevpConfig bad{0.5, 500.0, 10};
  CHECK_THROWS_AS(mevp_step(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, 1.0, bad),
                  std::invalid_argument);
  bad = {500.0, 0.0, 10};
  CHECK_THROWS_AS(mevp_step(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, 1.0, bad),
                  std::invalid_argument);
}

TEST_CASE("Picard iteration reduces the nonlinear residual", "[solver][picard]") {
  for (auto stag : {Staggering::A, Staggering::B, Staggering::C, Staggering::CD}) {
    CAPTURE(to_string(stag));
    auto p = make_problem(stag);
    const double gamma_s = (stag == Staggering::CD) ? 0.01 : 0.0;

    PicardConfig cfg;
    cfg.max_outer = 12;
    cfg.linear_tol = 1e-4;
    auto out = picard_solve(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s, cfg);

    REQUIRE(out.history.size() == 12);
    CHECK(out.initial_residual > 0.0);
    CHECK(out.final_residual < 0.05 * out.initial_residual);
    CHECK(out.final_residual == out.history.back().nonlinear_residual);
    CHECK(out.history.front().linear_iterations > 0);
    for (const auto& rec : out.history) {
      CHECK(std::isfinite(rec.nonlinear_residual));
      CHECK(rec.linear_rel_residual < 1.0);
    }
    for (std::size_t k = 0; k < p.L.n_velocity; ++k)
      if (p.L.boundary[k]) CHECK(out.v[k] == 0.0);

    // An independent evaluation of the residual must agree with the report.
    auto r = momentum_residual(p.H, p.A, out.v, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s);
    CHECK_THAT(norm2(r), Catch::Matchers::WithinRel(out.final_residual, 1e-12));
  }
}

TEST_CASE("Picard stops early once the tolerance is met", "[solver][picard]") {
  auto p = make_problem(Staggering::B);

  PicardConfig probe;
  probe.max_outer = 30;
  probe.linear_tol = 1e-4;
  auto full = picard_solve(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, 0.0, probe);
  REQUIRE(full.history.size() == 30);

  // Ask for a relative drop the run above crossed somewhere in the middle.
  const double mid = full.history[5].nonlinear_residual;
  PicardConfig cfg = probe;
  cfg.nonlinear_tol = mid * 1.0000001 / full.initial_residual;
  auto out = picard_solve(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, 0.0, cfg);
  CHECK(out.reached_tol);
  CHECK(out.history.size() <= 6);
  CHECK(out.final_residual <= cfg.nonlinear_tol * out.initial_residual);
}

TEST_CASE("Picard and mEVP agree on the step they solve", "[solver][cross]") {
  auto p = make_problem(Staggering::CD, 6);
  const double gamma_s = 0.01;

  PicardConfig pc;
  pc.max_outer = 120;
  pc.linear_tol = 1e-8;
  pc.nonlinear_tol = 1e-9;
  auto pic = picard_solve(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s, pc);

  MevpConfig mc{500.0, 500.0, 30000};
  auto ev = mevp_step(p.H, p.A, p.v_old, p.dt, p.fs, p.g, p.L, p.pp, gamma_s, mc);
  REQUIRE(ev.finite);

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < p.L.n_velocity; ++k) {
    num += (ev.v[k] - pic.v[k]) * (ev.v[k] - pic.v[k]);
    den += pic.v[k] * pic.v[k];
  }
  REQUIRE(den > 0.0);
  CHECK(std::sqrt(num / den) < 1e-3);
}
