#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

#include "icedyn/grid.hpp"

// Linear-feature detection on a regular shear-rate field: log scaling, a
// difference-of-Gaussians band-pass, thresholding, morphological thinning,
// and branch tracing with collinear merging across junctions.

namespace icedyn {

struct DetectionParams {
  double pixel_size = 2000.0;    // output grid spacing (m)
  double k_max_px = 6.0;         // large kernel size in pixels (sigma = k/3)
  double k_min_px = 1.2;         // small kernel size in pixels
  double threshold = 0.1;        // band-pass response threshold, log10 units
  double min_length = 9600.0;    // minimum reported feature length (m)
  double shear_floor = 1e-12;    // 1/s, applied before the log
  int boundary_band_px = 2;      // rim pixels excluded from detection
  double merge_angle_deg = 25.0; // collinearity tolerance at junctions
  bool use_histogram_equalization = false;  // kept off; log + band-pass only
};

/// Kernel sizes and the length cutoff scale with the model resolution so a
/// feature spanning a fixed number of model cells is treated alike at every
/// resolution: k = (base in pixels) x (model dx / 2 km), min length 4.8 dx.
inline DetectionParams detection_for_model_dx(double model_dx) {
  DetectionParams p;
  const double scale = model_dx / p.pixel_size;
  p.k_max_px = 6.0 * scale;
  p.k_min_px = 1.2 * scale;
  p.min_length = 4.8 * model_dx;
  return p;
}

struct LkfSegment {
  std::vector<Vec2> points;  // pixel centers (m)
  double length = 0.0;       // polyline length (m)
};

struct LkfReport {
  std::vector<LkfSegment> segments;
  int count = 0;
  DetectionParams params;
};

namespace lkfdetail {

/// Separable Gaussian blur, truncated at 3 sigma, replicate padding.
inline RegularField gaussian_blur(const RegularField& f, double sigma) {
  if (sigma <= 0.0) return f;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;

  auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
  RegularField tmp = f, out = f;
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += k[d + radius] * f.at(clampi(i + d, f.nx - 1), j);
      tmp.at(i, j) = s;
    }
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d)
        s += k[d + radius] * tmp.at(i, clampi(j + d, f.ny - 1));
      out.at(i, j) = s;
    }
  return out;
}

}  // namespace lkfdetail

/// Band-pass response of the log-scaled shear field:
///   G(sigma_min) - G(sigma_max) applied to log10(max(shear, floor)).
/// Constant fields (and multiplicative rescalings, which only shift the log)
/// map to exactly zero.
inline RegularField dog_filter(const RegularField& shear, const DetectionParams& p) {
  require(shear.nx > 2 * p.boundary_band_px && shear.ny > 2 * p.boundary_band_px,
          "dog_filter: field smaller than the exclusion band");
  RegularField logf = shear;
  for (double& v : logf.values) v = std::log10(std::max(v, p.shear_floor));
  const RegularField lo = lkfdetail::gaussian_blur(logf, p.k_min_px / 3.0);
  const RegularField hi = lkfdetail::gaussian_blur(logf, p.k_max_px / 3.0);
  RegularField out = shear;
  for (std::size_t k = 0; k < out.values.size(); ++k)
    out.values[k] = lo.values[k] - hi.values[k];
  return out;
}

/// Binary mask of above-threshold pixels (rim band removed), thinned to a
/// 1-pixel-wide 8-connected skeleton by the standard two-subpass algorithm.
inline std::vector<std::uint8_t> binarize_and_skeletonize(const RegularField& filtered,
                                                          const DetectionParams& p) {
  const int nx = filtered.nx, ny = filtered.ny;
  std::vector<std::uint8_t> m(std::size_t(nx) * ny, 0);
  for (int j = p.boundary_band_px; j < ny - p.boundary_band_px; ++j)
    for (int i = p.boundary_band_px; i < nx - p.boundary_band_px; ++i)
      m[std::size_t(j) * nx + i] = filtered.at(i, j) > p.threshold ? 1 : 0;

  auto at = [&](const std::vector<std::uint8_t>& img, int i, int j) -> int {
    if (i < 0 || i >= nx || j < 0 || j >= ny) return 0;
    return img[std::size_t(j) * nx + i];
  };
  // neighbors clockwise from north
  const int di[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  const int dj[8] = {1, 1, 0, -1, -1, -1, 0, 1};

  bool changed = true;
  std::vector<std::size_t> kill;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          if (!at(m, i, j)) continue;
          int nb[8];
          int B = 0;
          for (int n = 0; n < 8; ++n) {
            nb[n] = at(m, i + di[n], j + dj[n]);
            B += nb[n];
          }
          if (B < 2 || B > 6) continue;
          int A = 0;
          for (int n = 0; n < 8; ++n)
            if (nb[n] == 0 && nb[(n + 1) % 8] == 1) ++A;
          if (A != 1) continue;
          // nb indices: 0=N 1=NE 2=E 3=SE 4=S 5=SW 6=W 7=NW
          const bool c1 = pass == 0 ? (nb[0] * nb[2] * nb[4] == 0) : (nb[0] * nb[2] * nb[6] == 0);
          const bool c2 = pass == 0 ? (nb[2] * nb[4] * nb[6] == 0) : (nb[0] * nb[4] * nb[6] == 0);
          if (c1 && c2) kill.push_back(std::size_t(j) * nx + i);
        }
      for (std::size_t k : kill) m[k] = 0;
      changed = changed || !kill.empty();
    }
  }
  return m;
}

namespace lkfdetail {

struct Branch {
  std::vector<int> px;  // flat pixel indices along the branch
};

inline double angle_between(Vec2 a, Vec2 b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = std::clamp((a.x * b.x + a.y * b.y) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace lkfdetail

/// Splits the skeleton at junction pixels (3 or more skeleton neighbors),
/// traces every branch into a pixel polyline, merges collinear branch pairs
/// across their shared junction, and drops polylines shorter than the length
/// cutoff. Lengths are measured along the polyline in meters.
inline std::vector<LkfSegment> extract_lkf_segments(const std::vector<std::uint8_t>& skel, int nx,
                                                    int ny, const DetectionParams& p) {
  using lkfdetail::Branch;
  const int di[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  const int dj[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  auto on = [&](int i, int j) {
    return i >= 0 && i < nx && j >= 0 && j < ny && skel[std::size_t(j) * nx + i];
  };
  auto deg = [&](int idx) {
    const int i = idx % nx, j = idx / nx;
    int d = 0;
    for (int n = 0; n < 8; ++n) d += on(i + di[n], j + dj[n]) ? 1 : 0;
    return d;
  };

  std::vector<int> pixels;
  for (int idx = 0; idx < nx * ny; ++idx)
    if (skel[idx]) pixels.push_back(idx);

  std::set<std::pair<int, int>> used;  // traversed pixel adjacencies
  auto edge_key = [](int a, int b) { return std::pair(std::min(a, b), std::max(a, b)); };

  auto neighbors = [&](int idx) {
    std::vector<int> out;
    const int i = idx % nx, j = idx / nx;
    for (int n = 0; n < 8; ++n)
      if (on(i + di[n], j + dj[n])) out.push_back((j + dj[n]) * nx + (i + di[n]));
    return out;
  };

  std::vector<Branch> branches;
  auto trace = [&](int start, int next) {
    Branch b;
    b.px = {start, next};
    used.insert(edge_key(start, next));
    int prev = start, cur = next;
    while (deg(cur) == 2) {
      const auto nb = neighbors(cur);
      const int nxt = nb[0] == prev ? nb[1] : nb[0];
      if (used.count(edge_key(cur, nxt))) break;  // closed loop
      used.insert(edge_key(cur, nxt));
      b.px.push_back(nxt);
      prev = cur;
      cur = nxt;
    }
    branches.push_back(std::move(b));
  };

  for (int idx : pixels) {
    const int d = deg(idx);
    if (d == 2) continue;  // interior of a branch (or of a pure cycle)
    for (int nb : neighbors(idx))
      if (!used.count(edge_key(idx, nb))) trace(idx, nb);
  }
  for (int idx : pixels) {  // leftover pure cycles
    if (deg(idx) != 2) continue;
    for (int nb : neighbors(idx))
      if (!used.count(edge_key(idx, nb))) trace(idx, nb);
  }

  // Collinear merge: at each junction, pair up branch ends whose departure
  // directions are opposite within the tolerance; greedily best-first.
  auto pix_vec = [&](int idx) { return Vec2{double(idx % nx), double(idx / nx)}; };
  auto end_dir = [&](const Branch& b, bool head) {
    const int steps = std::min<std::size_t>(5, b.px.size() - 1);
    const Vec2 a = pix_vec(head ? b.px[0] : b.px.back());
    const Vec2 c = pix_vec(head ? b.px[steps] : b.px[b.px.size() - 1 - steps]);
    return c - a;
  };

  std::map<int, std::vector<std::pair<int, bool>>> at_junction;  // pixel -> (branch, head?)
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const Branch& b = branches[bi];
    if (deg(b.px.front()) >= 3) at_junction[b.px.front()].push_back({int(bi), true});
    if (deg(b.px.back()) >= 3) at_junction[b.px.back()].push_back({int(bi), false});
  }

  // link[branch][end 0=head,1=tail] = (other branch, other end) or (-1,-1)
  std::vector<std::array<std::pair<int, int>, 2>> link(branches.size(),
                                                       {std::pair(-1, -1), std::pair(-1, -1)});
  for (auto& [jpx, ends] : at_junction) {
    struct Cand {
      double ang;
      int a, ae, b, be;
    };
    std::vector<Cand> cands;
    for (std::size_t x = 0; x < ends.size(); ++x)
      for (std::size_t y = x + 1; y < ends.size(); ++y) {
        if (ends[x].first == ends[y].first) continue;
        const Vec2 dx = end_dir(branches[ends[x].first], ends[x].second);
        const Vec2 dy = end_dir(branches[ends[y].first], ends[y].second);
        const double ang = lkfdetail::angle_between(dx, -1.0 * dy);
        if (ang <= p.merge_angle_deg)
          cands.push_back({ang, ends[x].first, ends[x].second ? 0 : 1, ends[y].first,
                           ends[y].second ? 0 : 1});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return a.ang != b.ang ? a.ang < b.ang : std::tie(a.a, a.ae, a.b, a.be) <
                                                  std::tie(b.a, b.ae, b.b, b.be);
    });
    for (const Cand& c : cands) {
      if (link[c.a][c.ae].first != -1 || link[c.b][c.be].first != -1) continue;
      link[c.a][c.ae] = {c.b, c.be};
      link[c.b][c.be] = {c.a, c.ae};
    }
  }

  // Walk merged chains into final polylines.
  std::vector<bool> consumed(branches.size(), false);
  std::vector<LkfSegment> segments;
  auto emit_chain = [&](int start_branch, int start_end) {
    std::vector<int> poly;
    int b = start_branch, enter = start_end;
    while (true) {
      consumed[b] = true;
      std::vector<int> px = branches[b].px;
      if (enter == 1) std::reverse(px.begin(), px.end());  // enter at tail -> reverse
      if (!poly.empty() && poly.back() == px.front()) px.erase(px.begin());
      poly.insert(poly.end(), px.begin(), px.end());
      const int exit_end = enter == 0 ? 1 : 0;
      const auto [nb, ne] = link[b][exit_end];
      if (nb == -1 || consumed[nb]) break;
      b = nb;
      enter = ne;
    }
    LkfSegment seg;
    double len = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const int i = poly[k] % nx, j = poly[k] / nx;
      seg.points.push_back({(i + 0.5) * p.pixel_size, (j + 0.5) * p.pixel_size});
      if (k > 0) len += norm(seg.points[k] - seg.points[k - 1]);
    }
    seg.length = len;
    if (len >= p.min_length) segments.push_back(std::move(seg));
  };

  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    if (consumed[bi]) continue;
    // find a free end to start from (chains); fall back to head (cycles)
    int start_end = 0;
    if (link[bi][0].first != -1 && link[bi][1].first == -1) start_end = 1;
    emit_chain(int(bi), start_end);
  }
  return segments;
}

/// Full pipeline from a tracer-point shear field to a feature report:
/// resample to the detection grid, band-pass, skeletonize, trace.
inline LkfReport detect_lkfs(const std::vector<double>& shear, const StructuredGrid& g,
                             TracerLoc loc, double model_dx) {
  const DetectionParams p = detection_for_model_dx(model_dx);
  const RegularField rf = interpolate_to_regular(shear, g, loc, p.pixel_size);
  const RegularField response = dog_filter(rf, p);
  const std::vector<std::uint8_t> skel = binarize_and_skeletonize(response, p);
  LkfReport rep;
  rep.params = p;
  rep.segments = extract_lkf_segments(skel, response.nx, response.ny, p);
  rep.count = int(rep.segments.size());
  return rep;
}

}  // namespace icedyn
