#pragma once

// Cubic (four-point Lagrange) interpolation of nodal fields on the uniform
// grid, tensorized in 2D. Exact at the nodes; used for flow pullbacks and
// critical-point refinement.

#include <heatobs/mesh.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace heatobs {

namespace detail {

// Lagrange cubic through values at offsets {-1,0,1,2} evaluated at
// local coordinate u in [0,1] (between offsets 0 and 1).
inline double lagrange4(const std::array<double, 4>& f, double u) {
  const double um1 = u + 1.0, u1 = u - 1.0, u2 = u - 2.0;
  return f[0] * (u * u1 * u2) / (-6.0) + f[1] * (um1 * u1 * u2) / 2.0 +
         f[2] * (um1 * u * u2) / (-2.0) + f[3] * (um1 * u * u1) / 6.0;
}

inline void cubic_cell(double x, double dx, int n, int& i0, double& u) {
  double s = x / dx;
  int i = static_cast<int>(std::floor(s));
  i = std::clamp(i, 1, n - 3);
  i0 = i - 1;
  u = s - i;
}

} // namespace detail

inline double interp_value(const Field& f, double x, double y = 0.0) {
  const Mesh& m = *f.mesh;
  int ix;
  double ux;
  detail::cubic_cell(x, m.dx, m.nx, ix, ux);
  if (m.dimension == 1) {
    std::array<double, 4> vals{};
    for (int k = 0; k < 4; ++k) vals[k] = f[ix + k];
    return detail::lagrange4(vals, ux);
  }
  int iy;
  double uy;
  detail::cubic_cell(y, m.dy, m.ny, iy, uy);
  std::array<double, 4> rows{};
  for (int ky = 0; ky < 4; ++ky) {
    std::array<double, 4> vals{};
    for (int kx = 0; kx < 4; ++kx) vals[kx] = f[m.id(ix + kx, iy + ky)];
    rows[ky] = detail::lagrange4(vals, ux);
  }
  return detail::lagrange4(rows, uy);
}

// Interpolated first derivatives, by differencing the interpolant.
inline Vec2 interp_gradient(const Field& f, double x, double y = 0.0, double delta_frac = 0.5) {
  const Mesh& m = *f.mesh;
  const double d = delta_frac * m.dx;
  auto clamped = [&](double t) { return std::clamp(t, 0.0, 1.0); };
  Vec2 g;
  g.x = (interp_value(f, clamped(x + d), y) - interp_value(f, clamped(x - d), y)) /
        (clamped(x + d) - clamped(x - d));
  if (m.dimension == 2)
    g.y = (interp_value(f, x, clamped(y + d)) - interp_value(f, x, clamped(y - d))) /
          (clamped(y + d) - clamped(y - d));
  return g;
}

} // namespace heatobs
