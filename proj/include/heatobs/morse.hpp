#pragma once

// Positive interior weight functions with nondegenerate critical points,
// their flow-based critical-point relocation, the weight pairs built from
// them, the ball/remainder region decomposition, and the grid verification
// of the six inequality constants plus the exterior gap mu.

#include <heatobs/interp.hpp>
#include <heatobs/mesh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatobs {

inline constexpr double kHessianEps = 1e-3 * M_PI * M_PI;

struct MorseFunction {
  Field field;
  std::vector<Vec2> critical_points;     // sorted by (x, y)
  std::vector<double> critical_values;
  std::vector<double> hessian_dets;      // 1D: the second derivative itself
  std::vector<int> hessian_signatures;   // negative-eigenvalue count
  double max_value = 0.0;

  int count() const { return static_cast<int>(critical_points.size()); }
  int argmax() const {
    for (int k = 0; k < count(); ++k)
      if (critical_values[k] == max_value) return k;
    return -1;
  }
};

// ---------------------------------------------------------------------------
// critical point detection

namespace detail {

inline double interp_d2(const Field& f, double x, double y, int axis, double delta) {
  const double dx = (axis == 0) ? delta : 0.0;
  const double dy = (axis == 1) ? delta : 0.0;
  return (interp_value(f, x + dx, y + dy) - 2.0 * interp_value(f, x, y) +
          interp_value(f, x - dx, y - dy)) /
         (delta * delta);
}

inline double interp_dxy(const Field& f, double x, double y, double delta) {
  return (interp_value(f, x + delta, y + delta) - interp_value(f, x + delta, y - delta) -
          interp_value(f, x - delta, y + delta) + interp_value(f, x - delta, y - delta)) /
         (4.0 * delta * delta);
}

// Bisection on the x-derivative of the interpolant over [a,b].
inline bool bisect_gradient_root(const Field& f, double a, double b, double& root) {
  auto g = [&](double x) { return interp_gradient(f, x).x; };
  double fa = g(a), fb = g(b);
  if (fa == 0.0) { root = a; return true; }
  if (fb == 0.0) { root = b; return true; }
  if (fa * fb > 0.0) return false;
  for (int it = 0; it < 80 && (b - a) > 1e-13; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = g(m);
    if (fm == 0.0) { a = b = m; break; }
    if (fa * fm < 0.0) { b = m; fb = fm; } else { a = m; fa = fm; }
  }
  root = 0.5 * (a + b);
  return true;
}

inline std::vector<Vec2> find_criticals_1d(const Field& f) {
  const Mesh& m = *f.mesh;
  const auto g = gradient(f);
  std::vector<Vec2> out;
  for (int i = 1; i + 2 < m.nx; ++i) {
    const double ga = g[0][i], gb = g[0][i + 1];
    if (ga * gb > 0.0) continue;
    if (ga == 0.0 && gb == 0.0) continue;
    // the interpolant's root can sit slightly outside the nodal segment,
    // so bracket one cell wider
    const double lo = std::max(m.coords[i].x - m.dx, m.dx);
    const double hi = std::min(m.coords[i + 1].x + m.dx, 1.0 - m.dx);
    double root;
    if (!bisect_gradient_root(f, lo, hi, root)) continue;
    bool dup = false;
    for (const Vec2& p : out) dup = dup || std::abs(p.x - root) < 3.0 * m.dx;
    if (!dup) out.push_back({root, 0.0});
  }
  return out;
}

inline std::vector<Vec2> find_criticals_2d(const Field& f) {
  const Mesh& m = *f.mesh;
  const auto g = gradient(f);
  double gscale = 1.0;
  for (double v : g[0].v) gscale = std::max(gscale, std::abs(v));
  for (double v : g[1].v) gscale = std::max(gscale, std::abs(v));

  std::vector<Vec2> out;
  auto try_newton = [&](double x0, double y0) {
    double x = x0, y = y0;
    for (int it = 0; it < 60; ++it) {
      if (x < m.dx || x > 1.0 - m.dx || y < m.dy || y > 1.0 - m.dy) return;
      const Vec2 F = interp_gradient(f, x, y);
      if (std::hypot(F.x, F.y) < 1e-10 * gscale) {
        bool dup = false;
        for (const Vec2& p : out)
          dup = dup || (std::hypot(p.x - x, p.y - y) < 3.0 * m.dx);
        if (!dup) out.push_back({x, y});
        return;
      }
      const double h = m.dx;
      const Vec2 Fxp = interp_gradient(f, std::min(x + h, 1.0), y);
      const Vec2 Fxm = interp_gradient(f, std::max(x - h, 0.0), y);
      const Vec2 Fyp = interp_gradient(f, x, std::min(y + h, 1.0));
      const Vec2 Fym = interp_gradient(f, x, std::max(y - h, 0.0));
      const double j11 = (Fxp.x - Fxm.x) / (2.0 * h), j12 = (Fyp.x - Fym.x) / (2.0 * h);
      const double j21 = (Fxp.y - Fxm.y) / (2.0 * h), j22 = (Fyp.y - Fym.y) / (2.0 * h);
      const double det = j11 * j22 - j12 * j21;
      if (std::abs(det) < 1e-12) return;
      double sx = (j22 * F.x - j12 * F.y) / det;
      double sy = (-j21 * F.x + j11 * F.y) / det;
      const double sn = std::hypot(sx, sy);
      const double cap = 3.0 * m.dx;
      if (sn > cap) { sx *= cap / sn; sy *= cap / sn; }
      x -= sx;
      y -= sy;
    }
  };

  for (int j = 1; j + 2 < m.ny; ++j) {
    for (int i = 1; i + 2 < m.nx; ++i) {
      double gxmin = 1e300, gxmax = -1e300, gymin = 1e300, gymax = -1e300;
      for (int dj = 0; dj <= 1; ++dj)
        for (int di = 0; di <= 1; ++di) {
          const int id = m.id(i + di, j + dj);
          gxmin = std::min(gxmin, g[0][id]);
          gxmax = std::max(gxmax, g[0][id]);
          gymin = std::min(gymin, g[1][id]);
          gymax = std::max(gymax, g[1][id]);
        }
      if (gxmin <= 0.0 && gxmax >= 0.0 && gymin <= 0.0 && gymax >= 0.0)
        try_newton((i + 0.5) * m.dx, (j + 0.5) * m.dy);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Vec2& a, const Vec2& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  return out;
}

} // namespace detail

// Detect and classify all interior critical points, then enforce the
// shape invariants: positive inside, zero on the boundary, nonsingular
// Hessians, a unique maximizer.
inline MorseFunction analyze_morse(const Field& f, double eps_hess = kHessianEps) {
  const Mesh& m = *f.mesh;
  MorseFunction out;
  out.field = f;

  for (int n : m.interior_nodes)
    if (f[n] <= 0.0)
      throw std::runtime_error("analyze_morse: nonpositive interior value at x=" +
                               std::to_string(m.coords[n].x) + " y=" + std::to_string(m.coords[n].y));
  for (int n : m.boundary_nodes)
    if (std::abs(f[n]) > 1e-10)
      throw std::runtime_error("analyze_morse: nonzero boundary value " + std::to_string(f[n]));

  out.critical_points =
      (m.dimension == 1) ? detail::find_criticals_1d(f) : detail::find_criticals_2d(f);
  if (out.critical_points.empty())
    throw std::runtime_error("analyze_morse: no interior critical points found");

  const double delta = 2.0 * m.dx;
  for (const Vec2& p : out.critical_points) {
    out.critical_values.push_back(interp_value(f, p.x, p.y));
    if (m.dimension == 1) {
      const double d2 = detail::interp_d2(f, p.x, 0.0, 0, delta);
      out.hessian_dets.push_back(d2);
      out.hessian_signatures.push_back(d2 < 0.0 ? 1 : 0);
      if (std::abs(d2) <= eps_hess)
        throw std::runtime_error("analyze_morse: degenerate critical point at x=" + std::to_string(p.x));
    } else {
      const double fxx = detail::interp_d2(f, p.x, p.y, 0, delta);
      const double fyy = detail::interp_d2(f, p.x, p.y, 1, delta);
      const double fxy = detail::interp_dxy(f, p.x, p.y, delta);
      const double det = fxx * fyy - fxy * fxy;
      out.hessian_dets.push_back(det);
      const double tr = fxx + fyy;
      const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
      const double l1 = 0.5 * (tr + disc), l2 = 0.5 * (tr - disc);
      out.hessian_signatures.push_back((l1 < 0.0 ? 1 : 0) + (l2 < 0.0 ? 1 : 0));
      if (std::abs(det) <= eps_hess)
        throw std::runtime_error("analyze_morse: degenerate critical point at x=" +
                                 std::to_string(p.x) + " y=" + std::to_string(p.y));
    }
  }

  out.max_value = *std::max_element(out.critical_values.begin(), out.critical_values.end());
  int at_max = 0;
  for (double v : out.critical_values)
    if (v > out.max_value - 1e-9) ++at_max;
  if (at_max != 1)
    throw std::runtime_error("analyze_morse: maximizer is not unique");
  return out;
}

// ---------------------------------------------------------------------------
// base constructions

// Product of sines: one interior maximum at the center.
inline MorseFunction base_morse(const Mesh& m) {
  Field f = sample(m, [&](double x, double y) {
    return (m.dimension == 1) ? std::sin(M_PI * x) : std::sin(M_PI * x) * std::sin(M_PI * y);
  });
  for (int n : m.boundary_nodes) f[n] = 0.0; // exact zero instead of sin(pi) roundoff
  return analyze_morse(f);
}

namespace detail {

// C^2 quintic Hermite segment: values, first and second derivatives
// prescribed at both ends; s in [0,1], scaled by the knot spacing.
inline double quintic_hermite(double s, double v0, double m0, double k0, double v1, double m1,
                              double k1, double len) {
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  const double H0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
  const double H1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
  const double H2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
  const double H3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
  const double H4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
  const double H5 = 0.5 * (s3 - 2.0 * s4 + s5);
  return v0 * H0 + m0 * len * H1 + k0 * len * len * H2 + v1 * H3 + m1 * len * H4 +
         k1 * len * len * H5;
}

struct BumpSpline {
  std::vector<double> knots, vals, slopes, curvs;

  double operator()(double x) const {
    const int nseg = static_cast<int>(knots.size()) - 1;
    int j = static_cast<int>(std::floor(x * nseg));
    j = std::clamp(j, 0, nseg - 1);
    const double len = knots[j + 1] - knots[j];
    const double s = (x - knots[j]) / len;
    return quintic_hermite(s, vals[j], slopes[j], curvs[j], vals[j + 1], slopes[j + 1],
                           curvs[j + 1], len);
  }
};

} // namespace detail

// Spline-built weight with k interior maxima and k-1 interior minima, all
// critical values distinct. tallest selects which maximum carries the
// global max (height 1); the rest descend from 0.92.
inline MorseFunction base_morse_multibump(const Mesh& m, int k, int tallest = 1,
                                          double min_base = 0.30) {
  if (m.dimension != 1)
    throw std::invalid_argument("base_morse_multibump: 1D meshes only");
  if (k < 1) throw std::invalid_argument("base_morse_multibump: k must be >= 1");
  if (k == 1) return base_morse(m);
  if (tallest < 1 || tallest > k)
    throw std::invalid_argument("base_morse_multibump: tallest out of range");
  const double len = 1.0 / (2.0 * k);
  if (len < 6.0 * m.dx)
    throw std::invalid_argument("base_morse_multibump: k too large for resolution "
                                "(critical spacing below 6*dx)");

  detail::BumpSpline sp;
  const int nk = 2 * k + 1;
  sp.knots.resize(nk);
  sp.vals.assign(nk, 0.0);
  sp.slopes.assign(nk, 0.0);
  sp.curvs.assign(nk, 0.0);
  for (int j = 0; j < nk; ++j) sp.knots[j] = j * len;
  int rank = 0;
  for (int q = 1; q <= k; ++q)
    sp.vals[2 * q - 1] = (q == tallest) ? 1.0 : 0.92 - 0.05 * rank++;
  for (int q = 1; q < k; ++q) sp.vals[2 * q] = min_base + 0.04 * (q - 1);
  sp.slopes[0] = 0.8 * sp.vals[1] / len;
  sp.slopes[nk - 1] = -0.8 * sp.vals[nk - 2] / len;
  for (int j = 1; j + 1 < nk; ++j) {
    const double drop = std::max(std::abs(sp.vals[j] - sp.vals[j - 1]),
                                 std::abs(sp.vals[j] - sp.vals[j + 1]));
    sp.curvs[j] = ((j % 2 == 1) ? -1.5 : 1.5) * drop / (len * len);
  }

  // audit: strictly monotone between consecutive knots, so the knots are
  // the only critical points
  for (int j = 0; j + 1 < nk; ++j) {
    const double sgn = (sp.vals[j + 1] > sp.vals[j]) ? 1.0 : -1.0;
    for (int q = 1; q < 64; ++q) {
      const double h = len / 64.0;
      const double a = sp.knots[j] + (q - 0.5) * h, b = sp.knots[j] + (q + 0.5) * h;
      if (sgn * (sp(b) - sp(a)) <= 0.0)
        throw std::logic_error("base_morse_multibump: spline segment not monotone");
    }
  }

  Field f = sample(m, [&](double x, double) { return sp(x); });
  f[0] = 0.0;
  f[m.nx - 1] = 0.0;
  return analyze_morse(f);
}

// ---------------------------------------------------------------------------
// relocation flow

namespace detail {

// descending quintic step: 1 at u<=0, 0 at u>=1
inline double smooth_down(double u) {
  if (u <= 0.0) return 1.0;
  if (u >= 1.0) return 0.0;
  return 1.0 - (10.0 * u * u * u - 15.0 * u * u * u * u + 6.0 * u * u * u * u * u);
}

} // namespace detail

// Carry each critical point along a straight path to its target by the
// time-one map of a compactly supported velocity field, then pull the
// function back through the inverse map (cubic interpolation at the
// preimages). The field vanishes near the boundary, so boundary values
// are untouched. Paths are followed at each instant, which keeps the
// construction valid whenever the moving points never collide.
inline MorseFunction relocate_criticals(const MorseFunction& psi, const std::vector<Vec2>& targets,
                                        double boundary_margin = 0.08, double tol_crit = 2e-3) {
  const Mesh& m = *psi.field.mesh;
  const int d = psi.count();
  if (static_cast<int>(targets.size()) != d)
    throw std::invalid_argument("relocate_criticals: need one target per critical point");
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      if (std::hypot(targets[a].x - targets[b].x, targets[a].y - targets[b].y) < 1e-6)
        throw std::invalid_argument("relocate_criticals: targets must be pairwise distinct");

  double move = 0.0;
  for (int j = 0; j < d; ++j)
    move = std::max(move, std::hypot(targets[j].x - psi.critical_points[j].x,
                                     targets[j].y - psi.critical_points[j].y));
  if (move < 1e-12) return psi; // zero-length paths: identity map

  const double lo = 2.0 * boundary_margin, hi = 1.0 - 2.0 * boundary_margin;
  const int steps = 64;

  std::function<Vec2(double, const Vec2&)> velocity;
  std::vector<std::array<double, 2>> span_x; // support envelope per path

  if (m.dimension == 1) {
    // sources come sorted; targets must preserve that order or the moving
    // points would collide
    std::vector<double> a(d), b(d), delta(d);
    for (int j = 0; j < d; ++j) {
      a[j] = psi.critical_points[j].x;
      b[j] = targets[j].x;
      delta[j] = b[j] - a[j];
    }
    for (int j = 0; j + 1 < d; ++j)
      if (b[j + 1] <= b[j])
        throw std::runtime_error("relocate_criticals: target order differs from source order "
                                 "(paths would intersect)");
    std::vector<double> flat(d), rampL(d), rampR(d);
    for (int j = 0; j < d; ++j) {
      auto pos = [&](int q, double t) { return a[q] + t * delta[q]; };
      const double gl = (j == 0) ? std::min(pos(0, 0.0), pos(0, 1.0)) - lo
                                 : std::min(pos(j, 0.0) - pos(j - 1, 0.0),
                                            pos(j, 1.0) - pos(j - 1, 1.0));
      const double gr = (j == d - 1) ? hi - std::max(pos(j, 0.0), pos(j, 1.0))
                                     : std::min(pos(j + 1, 0.0) - pos(j, 0.0),
                                                pos(j + 1, 1.0) - pos(j, 1.0));
      if (gl <= 0.0 || gr <= 0.0)
        throw std::runtime_error("relocate_criticals: path support reaches a neighbor path "
                                 "or the boundary collar");
      flat[j] = 0.12 * std::min(gl, gr);
      rampL[j] = 0.30 * gl;
      rampR[j] = 0.30 * gr;
      if (flat[j] < 1.5 * m.dx)
        throw std::runtime_error("relocate_criticals: resolution too coarse for the path layout");
      span_x.push_back({std::min(a[j], b[j]) - flat[j] - rampL[j],
                        std::max(a[j], b[j]) + flat[j] + rampR[j]});
    }
    velocity = [=](double t, const Vec2& p) -> Vec2 {
      double v = 0.0;
      for (int j = 0; j < d; ++j) {
        const double xi = p.x - (a[j] + t * delta[j]);
        double w;
        if (xi >= 0.0)
          w = detail::smooth_down((xi - flat[j]) / rampR[j]);
        else
          w = detail::smooth_down((-xi - flat[j]) / rampL[j]);
        v += delta[j] * w;
      }
      return {v, 0.0};
    };
  } else {
    if (d != 1)
      throw std::invalid_argument("relocate_criticals: 2D relocation supports a single "
                                  "critical point");
    const Vec2 a = psi.critical_points[0], b = targets[0];
    const Vec2 delta{b.x - a.x, b.y - a.y};
    auto room = [&](const Vec2& p) {
      return std::min(std::min(p.x, 1.0 - p.x), std::min(p.y, 1.0 - p.y)) - lo;
    };
    const double R = std::min(0.9 * std::min(room(a), room(b)), 0.25);
    if (R <= 0.0)
      throw std::runtime_error("relocate_criticals: path too close to the boundary collar");
    const double flat = R / 3.0, ramp = R - flat;
    if (flat < 2.5 * m.dx)
      throw std::runtime_error("relocate_criticals: resolution too coarse for the path layout");
    span_x.push_back({std::min(a.x, b.x) - R, std::max(a.x, b.x) + R});
    velocity = [=](double t, const Vec2& p) -> Vec2 {
      const double cx = a.x + t * delta.x, cy = a.y + t * delta.y;
      const double w = detail::smooth_down((std::hypot(p.x - cx, p.y - cy) - flat) / ramp);
      return {delta.x * w, delta.y * w};
    };
  }

  auto rk4 = [&](Vec2 p, bool forward) {
    const double dt = 1.0 / steps;
    for (int q = 0; q < steps; ++q) {
      const double t = q * dt;
      auto f = [&](double tau, const Vec2& z) -> Vec2 {
        const Vec2 v = velocity(forward ? tau : 1.0 - tau, z);
        return forward ? v : Vec2{-v.x, -v.y};
      };
      const Vec2 k1 = f(t, p);
      const Vec2 k2 = f(t + 0.5 * dt, {p.x + 0.5 * dt * k1.x, p.y + 0.5 * dt * k1.y});
      const Vec2 k3 = f(t + 0.5 * dt, {p.x + 0.5 * dt * k2.x, p.y + 0.5 * dt * k2.y});
      const Vec2 k4 = f(t + dt, {p.x + dt * k3.x, p.y + dt * k3.y});
      p.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      p.y += dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    }
    return p;
  };

  for (int j = 0; j < d; ++j) {
    const Vec2 end = rk4(psi.critical_points[j], true);
    if (std::hypot(end.x - targets[j].x, end.y - targets[j].y) > 1e-6)
      throw std::runtime_error("relocate_criticals: forward flow missed its target");
  }

  Field out(m);
  for (int n = 0; n < m.node_count(); ++n) {
    const Vec2 p = m.coords[n];
    bool moved = false;
    for (const auto& sp : span_x) moved = moved || (p.x > sp[0] && p.x < sp[1]);
    if (!moved) {
      out[n] = psi.field[n];
      continue;
    }
    Vec2 y = rk4(p, false);
    y.x = std::clamp(y.x, 0.0, 1.0);
    y.y = std::clamp(y.y, 0.0, 1.0);
    out[n] = interp_value(psi.field, y.x, y.y);
  }
  for (int n : m.boundary_nodes) out[n] = psi.field[n];

  MorseFunction res = analyze_morse(out);
  if (res.count() != d)
    throw std::runtime_error("relocate_criticals: critical point count changed (" +
                             std::to_string(res.count()) + " vs " + std::to_string(d) + ")");
  for (int j = 0; j < d; ++j) {
    const double err = std::hypot(res.critical_points[j].x - targets[j].x,
                                  res.critical_points[j].y - targets[j].y);
    if (err > tol_crit)
      throw std::runtime_error("relocate_criticals: critical point missed target by " +
                               std::to_string(err));
  }
  if (std::abs(res.max_value - psi.max_value) > 1e-3)
    throw std::runtime_error("relocate_criticals: max value not preserved");
  return res;
}

// ---------------------------------------------------------------------------
// observation region, weight family, constants

struct ObservationRegion {
  int dimension = 1;
  std::vector<std::pair<Vec2, double>> balls; // (center, radius); intervals in 1D
  std::vector<int> nodes;

  bool contains(const Vec2& p) const {
    for (const auto& [c, rad] : balls) {
      const double dist = (dimension == 1) ? std::abs(p.x - c.x) : std::hypot(p.x - c.x, p.y - c.y);
      if (dist < rad) return true;
    }
    return false;
  }
};

inline ObservationRegion make_observation_region(const Mesh& m,
                                                 std::vector<std::pair<Vec2, double>> balls) {
  ObservationRegion w;
  w.dimension = m.dimension;
  w.balls = std::move(balls);
  for (const auto& [c, rad] : w.balls) {
    if (rad <= 0.0) throw std::invalid_argument("observation region: radius must be positive");
    const double margin = (m.dimension == 1)
                              ? std::min(c.x, 1.0 - c.x)
                              : std::min(std::min(c.x, 1.0 - c.x), std::min(c.y, 1.0 - c.y));
    if (margin <= rad)
      throw std::invalid_argument("observation region: must lie strictly inside the domain");
  }
  for (int n : m.interior_nodes)
    if (w.contains(m.coords[n])) w.nodes.push_back(n);
  if (w.nodes.empty())
    throw std::invalid_argument("observation region: contains no interior nodes");
  return w;
}

struct WeightConstants {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0, c6 = 0.0;
  double mu = 0.0;
  double r = 0.0;
  bool c3_applicable = false;
  std::vector<std::vector<int>> c3_pairs;   // per member, per non-max critical point
  bool ok = false;
  std::vector<std::string> failures;
};

struct WeightFamily {
  const Mesh* mesh = nullptr;
  int d = 0;
  std::vector<MorseFunction> psi;
  std::vector<Field> phi1; // psi_i - max psi_i
  std::vector<Field> phi2; // -psi_i - max psi_i
  std::vector<Vec2> maximizers;
  std::vector<std::vector<int>> region_B, region_C, region_D; // per member
  std::vector<int> collar;
  std::vector<char> in_collar; // node mask
  ObservationRegion omega;
  double r = 0.0;
  double collar_width = 0.0;
  WeightConstants constants;
};

inline double default_ball_radius(const ObservationRegion& omega, const std::vector<Vec2>& pts) {
  double worst = 1e300;
  for (const Vec2& p : pts) {
    double best = -1e300;
    for (const auto& [c, rad] : omega.balls) {
      const double dist =
          (omega.dimension == 1) ? std::abs(p.x - c.x) : std::hypot(p.x - c.x, p.y - c.y);
      best = std::max(best, rad - dist);
    }
    worst = std::min(worst, best);
  }
  return 0.5 * worst;
}

inline WeightConstants verify_weight_bounds(const WeightFamily& fam);

inline WeightFamily make_weight_family(std::vector<MorseFunction> psi_list,
                                       ObservationRegion omega, double r,
                                       double collar_width = 0.1) {
  if (psi_list.empty()) throw std::invalid_argument("make_weight_family: empty family");
  const Mesh& m = *psi_list.front().field.mesh;
  if (r <= 0.0 || collar_width <= 0.0 || collar_width >= 0.5)
    throw std::invalid_argument("make_weight_family: bad r or collar_width");

  double vmax = -1e300, vmin = 1e300;
  for (const auto& psi : psi_list) {
    vmax = std::max(vmax, psi.max_value);
    vmin = std::min(vmin, psi.max_value);
  }
  if (vmax - vmin > 1e-6)
    throw std::invalid_argument("make_weight_family: members do not share the max value "
                                "(spread " + std::to_string(vmax - vmin) + ")");

  WeightFamily fam;
  fam.mesh = &m;
  fam.d = static_cast<int>(psi_list.size());
  fam.omega = std::move(omega);
  fam.r = r;
  fam.collar_width = collar_width;

  auto dist = [&](const Vec2& a, const Vec2& b) {
    return (m.dimension == 1) ? std::abs(a.x - b.x) : std::hypot(a.x - b.x, a.y - b.y);
  };

  for (const auto& psi : psi_list) {
    for (int k = 0; k < psi.count(); ++k)
      if (!fam.omega.contains(psi.critical_points[k]))
        throw std::invalid_argument("make_weight_family: critical point outside the "
                                    "observation region");
    const Vec2 p = psi.critical_points[psi.argmax()];
    bool ball_inside = false;
    for (const auto& [c, rad] : fam.omega.balls)
      ball_inside = ball_inside || (dist(p, c) + r <= rad);
    if (!ball_inside)
      throw std::invalid_argument("make_weight_family: r-ball around a maximizer leaves "
                                  "the observation region");
    fam.maximizers.push_back(p);
  }

  for (auto& psi : psi_list) {
    Field p1(m), p2(m);
    for (int n = 0; n < m.node_count(); ++n) {
      p1[n] = psi.field[n] - psi.max_value;
      p2[n] = -psi.field[n] - psi.max_value;
    }
    fam.phi1.push_back(std::move(p1));
    fam.phi2.push_back(std::move(p2));
  }

  fam.in_collar.assign(m.node_count(), 0);
  for (int n = 0; n < m.node_count(); ++n) {
    const Vec2 p = m.coords[n];
    const double bd = (m.dimension == 1)
                          ? std::min(p.x, 1.0 - p.x)
                          : std::min(std::min(p.x, 1.0 - p.x), std::min(p.y, 1.0 - p.y));
    if (bd < collar_width) {
      fam.in_collar[n] = 1;
      fam.collar.push_back(n);
    }
  }

  for (int i = 0; i < fam.d; ++i) {
    const auto& psi = psi_list[i];
    const int imax = psi.argmax();
    std::vector<int> B, C, D;
    for (int n = 0; n < m.node_count(); ++n) {
      const Vec2 p = m.coords[n];
      if (dist(p, fam.maximizers[i]) < r) {
        B.push_back(n);
        continue;
      }
      bool in_c = false;
      for (int k = 0; k < psi.count(); ++k)
        if (k != imax && dist(p, psi.critical_points[k]) < r) in_c = true;
      (in_c ? C : D).push_back(n);
    }
    fam.region_B.push_back(std::move(B));
    fam.region_C.push_back(std::move(C));
    fam.region_D.push_back(std::move(D));
  }

  fam.psi = std::move(psi_list);
  fam.constants = verify_weight_bounds(fam);
  return fam;
}

// Grid extrema of the ratios behind the six weight inequalities and the
// exterior gap mu. A missing or nonpositive constant is reported, not
// thrown: the family is data, its verification status travels with it.
inline WeightConstants verify_weight_bounds(const WeightFamily& fam) {
  const Mesh& m = *fam.mesh;
  WeightConstants rep;
  rep.r = fam.r;
  constexpr double eps_g = 1e-10; // |grad|^2 below this is "zero slope"
  constexpr double eps_v = 1e-8;

  auto node_str = [&](int n) {
    std::ostringstream os;
    os << "(" << m.coords[n].x;
    if (m.dimension == 2) os << ", " << m.coords[n].y;
    os << ")";
    return os.str();
  };

  double c1 = 1e300, c2 = -1e300, c4 = 1e300, c5 = -1e300, c6 = 1e300, mu = 1e300;
  double c3 = 1e300;
  rep.c3_applicable = false;

  for (int i = 0; i < fam.d; ++i) {
    const auto g = gradient(fam.phi1[i]);
    std::vector<double> g2(m.node_count());
    for (int n = 0; n < m.node_count(); ++n)
      g2[n] = g[0][n] * g[0][n] + g[1][n] * g[1][n]; // same for phi2 up to sign

    for (int n = 0; n < m.node_count(); ++n) {
      const double a1 = std::abs(fam.phi1[i][n]);
      if (g2[n] >= eps_g)
        c1 = std::min(c1, a1 / g2[n]);
      const double a2 = std::abs(fam.phi2[i][n]);
      if (g2[n] >= eps_g) c4 = std::min(c4, a2 / g2[n]);
      if (fam.in_collar[n]) {
        if (g2[n] < eps_g)
          rep.failures.push_back("flat slope in the boundary collar at node " + node_str(n));
        else
          c5 = std::max(c5, a2 / g2[n]);
      } else {
        c6 = std::min(c6, 2.0 * fam.psi[i].field[n]);
      }
    }
    for (const auto& nodes : {fam.region_B[i], fam.region_D[i]}) {
      for (int n : nodes) {
        const double a1 = std::abs(fam.phi1[i][n]);
        if (g2[n] < eps_g) {
          if (a1 >= eps_v)
            rep.failures.push_back("phi/|grad phi|^2 unbounded at node " + node_str(n) +
                                   " (member " + std::to_string(i) + ")");
          continue;
        }
        c2 = std::max(c2, a1 / g2[n]);
      }
    }

    auto dist = [&](const Vec2& a, const Vec2& b) {
      return (m.dimension == 1) ? std::abs(a.x - b.x) : std::hypot(a.x - b.x, a.y - b.y);
    };
    double worst_out = -1e300;
    for (int n = 0; n < m.node_count(); ++n)
      if (dist(m.coords[n], fam.maximizers[i]) >= fam.r)
        worst_out = std::max(worst_out, fam.phi1[i][n]);
    mu = std::min(mu, -worst_out);

    // pairing: every non-max critical ball of member i must sit strictly
    // below some other member there
    const auto& psi = fam.psi[i];
    const int imax = psi.argmax();
    std::vector<int> pairs;
    for (int k = 0; k < psi.count(); ++k) {
      if (k == imax) continue;
      std::vector<int> ball;
      for (int n : fam.region_C[i])
        if (dist(m.coords[n], psi.critical_points[k]) < fam.r) ball.push_back(n);
      if (ball.empty()) {
        rep.failures.push_back("empty critical ball for member " + std::to_string(i));
        pairs.push_back(-1);
        continue;
      }
      double best = -1e300;
      int best_j = -1;
      for (int j = 0; j < fam.d; ++j) {
        if (j == i) continue;
        double worst = 1e300;
        for (int n : ball) worst = std::min(worst, fam.phi1[j][n] - fam.phi1[i][n]);
        if (worst > best) {
          best = worst;
          best_j = j;
        }
      }
      pairs.push_back(best_j);
      rep.c3_applicable = true;
      c3 = std::min(c3, best);
    }
    rep.c3_pairs.push_back(std::move(pairs));
  }

  rep.c1 = c1;
  rep.c2 = c2;
  rep.c3 = rep.c3_applicable ? c3 : 0.0;
  rep.c4 = c4;
  rep.c5 = c5;
  rep.c6 = c6;
  rep.mu = mu;

  if (!(c1 > 0.0)) rep.failures.push_back("no positive lower ratio constant c1");
  if (!(c2 > 0.0) || !std::isfinite(c2))
    rep.failures.push_back("no finite upper ratio constant c2");
  if (rep.c3_applicable && !(c3 > 0.0))
    rep.failures.push_back("critical-ball separation c3 is not positive");
  if (!(c4 > 0.0)) rep.failures.push_back("no positive lower ratio constant c4");
  if (!(c5 > 0.0) || !std::isfinite(c5))
    rep.failures.push_back("no finite collar constant c5");
  if (!(c6 > 0.0)) rep.failures.push_back("interior gap c6 is not positive");
  if (!(mu > 0.0)) rep.failures.push_back("exterior weight gap mu is not positive");
  rep.ok = rep.failures.empty();
  return rep;
}

// Three-member 1D family over sorted interior points p0 < p1 < p2: member i
// has its global max at p_i. A single shared critical set cannot give this
// in 1D (the middle of three alternating critical points is always a local
// min), so each member carries its own set, built from a two-bump base with
// the tall bump in the slot that lands on p_i.
//
// Layout notes. The flow piles material up ahead of a moving bump, so each
// relocated member falls off a cliff on the side its tall bump came from
// and stays smooth on the other side. The offsets below place every
// member's secondary max on the smooth flank of another member's global
// max, and every member's min where another member's smooth rising flank
// stays well above it; the ball separation constant then comes out
// positive, which verify_weight_bounds confirms on the grid.
inline std::vector<MorseFunction> cyclic_family_1d(const Mesh& m, const std::array<double, 3>& p,
                                                   double boundary_margin = 0.08,
                                                   double tol_crit = 2e-3) {
  if (!(p[0] < p[1] && p[1] < p[2]))
    throw std::invalid_argument("cyclic_family_1d: points must be strictly increasing");
  auto build = [&](int tallest, double min_base, std::array<double, 3> t) {
    MorseFunction base = base_morse_multibump(m, 2, tallest, min_base);
    std::vector<Vec2> targets{{t[0], 0.0}, {t[1], 0.0}, {t[2], 0.0}};
    return relocate_criticals(base, targets, boundary_margin, tol_crit);
  };
  // Members 0 and 2 keep the base layout {p0, mid, p2} with the tall bump on
  // their own maximizer and distinct valley heights, so each covers the other's
  // non-max critical points with a smooth margin.  Only member 1 is moved, and
  // the transport flow piles the field up at the leading edge of its tall
  // bump, leaving a steep drop to the right of p1 + flat.  Keeping the other
  // members' valley (mid) inside that flat, and parking member 1's own
  // non-max criticals on the right where members 0 and 2 are on their smooth
  // rising flank, keeps all pairwise gaps positive.
  const double mid = 0.5 * (p[0] + p[2]), g12 = p[2] - p[1];
  std::vector<MorseFunction> fam;
  fam.push_back(build(1, 0.30, {p[0], mid, p[2]}));
  fam.push_back(build(1, 0.32, {p[1], p[1] + 0.6 * g12, p[2] + 0.15 * g12}));
  fam.push_back(build(2, 0.34, {p[0], mid, p[2]}));
  return fam;
}

} // namespace heatobs
