#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "icedyn/grid.hpp"

namespace icedyn {

/// Physical constants of the momentum balance and rheology. Defaults are the
/// standard benchmark values; all SI.
struct PhysParams {
  double rho_ice = 900.0;    // kg/m^3
  double rho_air = 1.3;      // kg/m^3
  double rho_water = 1026.0; // kg/m^3
  double C_air = 1.2e-3;     // air drag coefficient
  double C_water = 5.5e-3;   // water drag coefficient
  double f_c = 1.46e-4;      // Coriolis parameter, 1/s
  double P_star = 27.5e3;    // ice strength, N/m^2
  double C_conc = 20.0;      // strength concentration exponent
  double e_ellipse = 2.0;    // yield ellipse aspect ratio
  double delta_min = 2e-9;   // strain-rate regularization, 1/s
  double g_grav = 9.81;      // m/s^2, only enters through the (default zero) tilt term
};

/// Symmetric 2x2 tensor in (11, 22, 12) component order.
struct Sym2 {
  double s11 = 0.0;
  double s22 = 0.0;
  double s12 = 0.0;
};

inline Sym2 operator+(Sym2 a, Sym2 b) { return {a.s11 + b.s11, a.s22 + b.s22, a.s12 + b.s12}; }
inline Sym2 operator-(Sym2 a, Sym2 b) { return {a.s11 - b.s11, a.s22 - b.s22, a.s12 - b.s12}; }
inline Sym2 operator*(double c, Sym2 a) { return {c * a.s11, c * a.s22, c * a.s12}; }

/// Regularized deformation magnitude. With d' the trace-free part of the
/// strain rate d:
///   Delta^2 = (2/e^2) d':d' + tr(d)^2 + delta_min^2
/// expanded in components (the cross term of the trace-free split cancels):
///   Delta^2 = (1/e^2) (d11-d22)^2 + (4/e^2) d12^2 + (d11+d22)^2 + delta_min^2
inline double deformation_delta(Sym2 d, const PhysParams& p) {
  const double inv_e2 = 1.0 / (p.e_ellipse * p.e_ellipse);
  const double dm = d.s11 - d.s22;
  const double tr = d.s11 + d.s22;
  return std::sqrt(inv_e2 * dm * dm + 4.0 * inv_e2 * d.s12 * d.s12 + tr * tr +
                   p.delta_min * p.delta_min);
}

/// Ice strength P0 = P* H exp(-C (1 - A)). Units N/m (vertically integrated).
inline double ice_strength(double H, double A, const PhysParams& p) {
  return p.P_star * H * std::exp(-p.C_conc * (1.0 - A));
}

/// Viscosities and replacement pressure at one point.
struct Viscosities {
  double zeta = 0.0;  // bulk, N s / m
  double eta = 0.0;   // shear, N s / m
  double P = 0.0;     // replacement pressure, N/m
};

/// zeta = P0/(2 Delta), eta = zeta/e^2, P = P0 Delta/(Delta + delta_min).
/// Delta >= delta_min keeps all three finite and bounded.
inline Viscosities viscosities_and_pressure(double Delta, double P0, const PhysParams& p) {
  Viscosities v;
  v.zeta = 0.5 * P0 / Delta;
  v.eta = v.zeta / (p.e_ellipse * p.e_ellipse);
  v.P = P0 * Delta / (Delta + p.delta_min);
  return v;
}

inline Viscosities viscosities(Sym2 d, double H, double A, const PhysParams& p) {
  return viscosities_and_pressure(deformation_delta(d, p), ice_strength(H, A, p), p);
}

/// Stress for frozen coefficients: sigma = 2 eta d' + zeta tr(d) I - (P/2) I.
/// Equivalent componentwise form used here:
///   s11 = zeta (d11+d22) + eta (d11-d22) - P/2
///   s22 = zeta (d11+d22) - eta (d11-d22) - P/2
///   s12 = 2 eta d12
inline Sym2 stress_tensor(Sym2 d, double zeta, double eta, double P) {
  const double tr = d.s11 + d.s22;
  const double dm = d.s11 - d.s22;
  return {zeta * tr + eta * dm - 0.5 * P, zeta * tr - eta * dm - 0.5 * P, 2.0 * eta * d.s12};
}

/// Full viscous-plastic stress with coefficients evaluated from the strain itself.
inline Sym2 vp_stress(Sym2 d, double H, double A, const PhysParams& p) {
  const Viscosities v = viscosities(d, H, A, p);
  return stress_tensor(d, v.zeta, v.eta, v.P);
}

/// Shear deformation rate sqrt((d11-d22)^2 + 4 d12^2); the quantity whose
/// logarithm the feature detector band-passes.
inline double shear_rate(Sym2 d) {
  const double dm = d.s11 - d.s22;
  return std::sqrt(dm * dm + 4.0 * d.s12 * d.s12);
}

/// Quadratic surface drag  rho C |w - v| (w - v)  in N/m^2. The wind stress
/// uses v = 0 (ice speed is negligible against the wind).
inline Vec2 quadratic_drag(double rho, double C, Vec2 w, Vec2 v) {
  const Vec2 rel = w - v;
  const double s = norm(rel);
  return {rho * C * s * rel.x, rho * C * s * rel.y};
}

inline Vec2 water_stress(Vec2 v_water, Vec2 v_ice, const PhysParams& p) {
  return quadratic_drag(p.rho_water, p.C_water, v_water, v_ice);
}

inline Vec2 wind_stress(Vec2 v_air, const PhysParams& p) {
  return quadratic_drag(p.rho_air, p.C_air, v_air, {0.0, 0.0});
}

/// Benchmark forcing: a fixed rotating ocean current and a translating
/// cyclone. Lengths in meters, time in days.
struct CycloneForcing {
  double L = 512e3;          // domain extent, m
  double alpha_deg = 72.0;   // wind rotation (convergence) angle
  double v_max = 15.0;       // peak wind scale, m/s
  Vec2 start{256e3, 256e3};  // cyclone center at t = 0, m
  Vec2 speed{51.2e3, 51.2e3};  // cyclone translation, m/day

  /// Stationary anticyclonic ocean current, zero at the domain center.
  Vec2 ocean(Vec2 x) const {
    return {0.01 * (2.0 * x.y - L) / L, -0.01 * (2.0 * x.x - L) / L};
  }

  Vec2 cyclone_center(double t_days) const {
    return {start.x + speed.x * t_days, start.y + speed.y * t_days};
  }

  /// Wind field at position x (m) and time t (days). The wind spirals into
  /// the moving center m(t): with r = |x - m| the speed envelope is
  /// v_max (r/50km) exp(-r/100km), rotated inward by alpha.
  Vec2 wind(Vec2 x, double t_days) const {
    const Vec2 m = cyclone_center(t_days);
    const double rx_km = (x.x - m.x) / 1e3;
    const double ry_km = (x.y - m.y) / 1e3;
    const double r_km = std::hypot(rx_km, ry_km);
    const double s = (1.0 / 50.0) * std::exp(-0.01 * r_km);
    const double a = alpha_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), sn = std::sin(a);
    // rotate (x - m) by alpha, scale; the sign convention makes the wind
    // converge toward the center for alpha in (0, 90)
    const double wx = c * rx_km + sn * ry_km;
    const double wy = -sn * rx_km + c * ry_km;
    return {-s * v_max * wx, -s * v_max * wy};
  }
};

/// Initial thickness and concentration of the benchmark.
inline double initial_thickness(Vec2 x) {
  return 0.3 + 0.005 * (std::sin(6e-5 * x.x) + std::sin(3e-5 * x.y));
}

inline double initial_concentration(Vec2) { return 1.0; }

}  // namespace icedyn
