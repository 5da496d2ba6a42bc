#pragma once

// Discrete geometry, trapezoidal quadrature and second-order difference
// operators with Neumann (ghost-reflection) boundary handling on the
// interval (0,1) and the unit square (0,1)^2. Uniform grids only.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatobs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

struct Mesh {
  int dimension = 1;          // 1 or 2
  int nx = 0;                 // nodes per axis (ny == nx in 2D)
  int ny = 1;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<Vec2> coords;   // node -> coordinates
  std::vector<int> interior_nodes;
  std::vector<int> boundary_nodes;
  std::vector<Vec2> normals;            // parallel to boundary_nodes, |n| = 1
  std::vector<double> volume_weights;   // per node, sums to |Omega|
  std::vector<double> boundary_weights; // parallel to boundary_nodes, sums to |dOmega|
  std::vector<int> boundary_slot;       // node -> index into boundary_nodes, -1 if interior

  int node_count() const { return static_cast<int>(coords.size()); }
  int id(int i, int j) const { return i + nx * j; }
  bool is_boundary(int n) const { return boundary_slot[n] >= 0; }
};

// Uniform grid with trapezoidal volume and boundary quadrature.
// Rectangle corners belong to the boundary set with averaged (diagonal,
// unit) normals and weight dx/2 + dy/2, so boundary integrals are
// reproducible bit-for-bit given the same grid.
inline Mesh build_mesh(int dimension, int resolution) {
  if (dimension != 1 && dimension != 2)
    throw std::invalid_argument("build_mesh: dimension must be 1 or 2");
  if (resolution < 8)
    throw std::invalid_argument("build_mesh: resolution must be >= 8");

  Mesh m;
  m.dimension = dimension;
  m.nx = resolution;
  m.dx = 1.0 / (resolution - 1);
  if (dimension == 1) {
    m.ny = 1;
    m.dy = 0.0;
    m.coords.resize(resolution);
    m.boundary_slot.assign(resolution, -1);
    m.volume_weights.assign(resolution, m.dx);
    for (int i = 0; i < resolution; ++i) m.coords[i] = {i * m.dx, 0.0};
    m.volume_weights.front() = 0.5 * m.dx;
    m.volume_weights.back() = 0.5 * m.dx;
    m.boundary_nodes = {0, resolution - 1};
    m.boundary_slot[0] = 0;
    m.boundary_slot[resolution - 1] = 1;
    m.normals = {{-1.0, 0.0}, {1.0, 0.0}};
    m.boundary_weights = {1.0, 1.0}; // counting measure on the two endpoints
    for (int i = 1; i + 1 < resolution; ++i) m.interior_nodes.push_back(i);
    return m;
  }

  m.ny = resolution;
  m.dy = m.dx;
  const int n = resolution;
  m.coords.resize(static_cast<size_t>(n) * n);
  m.boundary_slot.assign(static_cast<size_t>(n) * n, -1);
  m.volume_weights.assign(static_cast<size_t>(n) * n, 0.0);
  auto w1d = [&](int i) { return (i == 0 || i == n - 1) ? 0.5 * m.dx : m.dx; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int id = m.id(i, j);
      m.coords[id] = {i * m.dx, j * m.dy};
      m.volume_weights[id] = w1d(i) * w1d(j);
    }
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const bool bx = (i == 0 || i == n - 1);
      const bool by = (j == 0 || j == n - 1);
      const int id = m.id(i, j);
      if (!bx && !by) {
        m.interior_nodes.push_back(id);
        continue;
      }
      m.boundary_slot[id] = static_cast<int>(m.boundary_nodes.size());
      m.boundary_nodes.push_back(id);
      Vec2 nrm{0.0, 0.0};
      if (bx) nrm.x = (i == 0) ? -1.0 : 1.0;
      if (by) nrm.y = (j == 0) ? -1.0 : 1.0;
      double w = 0.0;
      if (bx && by) { // corner: averaged normal, half+half weight
        nrm.x *= inv_sqrt2;
        nrm.y *= inv_sqrt2;
        w = 0.5 * m.dx + 0.5 * m.dy;
      } else if (bx) {
        w = w1d(j);
      } else {
        w = w1d(i);
      }
      m.normals.push_back(nrm);
      m.boundary_weights.push_back(w);
    }
  return m;
}

struct Field {
  const Mesh* mesh = nullptr;
  std::vector<double> v;

  Field() = default;
  explicit Field(const Mesh& m, double fill = 0.0)
      : mesh(&m), v(m.node_count(), fill) {}

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  int size() const { return static_cast<int>(v.size()); }
};

// One value per boundary node (indexed like Mesh::boundary_nodes).
struct BoundaryField {
  const Mesh* mesh = nullptr;
  std::vector<double> v;

  BoundaryField() = default;
  explicit BoundaryField(const Mesh& m, double fill = 0.0)
      : mesh(&m), v(m.boundary_nodes.size(), fill) {}

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  int size() const { return static_cast<int>(v.size()); }
};

template <typename F>
inline Field sample(const Mesh& m, F&& fn) {
  Field f(m);
  for (int n = 0; n < m.node_count(); ++n) f.v[n] = fn(m.coords[n].x, m.coords[n].y);
  return f;
}

inline void check_same_mesh(const Field& f, const Field& g) {
  if (f.mesh == nullptr || f.mesh != g.mesh)
    throw std::invalid_argument("fields live on different meshes");
}

// Quadrature approximation of the L2(Omega) pairing.
inline double inner_product(const Field& f, const Field& g) {
  check_same_mesh(f, g);
  const Mesh& m = *f.mesh;
  double acc = 0.0;
  for (int n = 0; n < m.node_count(); ++n) acc += m.volume_weights[n] * f.v[n] * g.v[n];
  return acc;
}

inline double l2_norm(const Field& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

inline double boundary_integral(const BoundaryField& b) {
  const Mesh& m = *b.mesh;
  double acc = 0.0;
  for (int s = 0; s < b.size(); ++s) acc += m.boundary_weights[s] * b.v[s];
  return acc;
}

namespace detail {

// Second-order one-sided first derivative toward increasing index.
inline double d1_forward(double f0, double f1, double f2, double h) {
  return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
}

} // namespace detail

// Central differences at interior nodes, one-sided second-order at the
// boundary. Returns the two components; the y component is zero in 1D.
inline std::array<Field, 2> gradient(const Field& f) {
  const Mesh& m = *f.mesh;
  std::array<Field, 2> g{Field(m), Field(m)};
  const int nx = m.nx, ny = m.ny;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int id = m.id(i, j);
      double dfx;
      if (i == 0)
        dfx = detail::d1_forward(f[m.id(0, j)], f[m.id(1, j)], f[m.id(2, j)], m.dx);
      else if (i == nx - 1)
        dfx = -detail::d1_forward(f[m.id(nx - 1, j)], f[m.id(nx - 2, j)], f[m.id(nx - 3, j)], m.dx);
      else
        dfx = (f[m.id(i + 1, j)] - f[m.id(i - 1, j)]) / (2.0 * m.dx);
      g[0][id] = dfx;
      if (m.dimension == 2) {
        double dfy;
        if (j == 0)
          dfy = detail::d1_forward(f[m.id(i, 0)], f[m.id(i, 1)], f[m.id(i, 2)], m.dy);
        else if (j == ny - 1)
          dfy = -detail::d1_forward(f[m.id(i, ny - 1)], f[m.id(i, ny - 2)], f[m.id(i, ny - 3)], m.dy);
        else
          dfy = (f[m.id(i, j + 1)] - f[m.id(i, j - 1)]) / (2.0 * m.dy);
        g[1][id] = dfy;
      }
    }
  }
  return g;
}

// Standard second-order stencil with ghost-node reflection (zero normal
// derivative). As a matrix it is symmetric for the volume-quadrature inner
// product and negative semidefinite with kernel = constants.
inline Field laplacian_neumann(const Field& f) {
  const Mesh& m = *f.mesh;
  Field out(m);
  const int nx = m.nx, ny = m.ny;
  const double ihx2 = 1.0 / (m.dx * m.dx);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int id = m.id(i, j);
      double acc;
      if (i == 0)
        acc = 2.0 * (f[m.id(1, j)] - f[id]) * ihx2;
      else if (i == nx - 1)
        acc = 2.0 * (f[m.id(nx - 2, j)] - f[id]) * ihx2;
      else
        acc = (f[m.id(i - 1, j)] - 2.0 * f[id] + f[m.id(i + 1, j)]) * ihx2;
      if (m.dimension == 2) {
        const double ihy2 = 1.0 / (m.dy * m.dy);
        if (j == 0)
          acc += 2.0 * (f[m.id(i, 1)] - f[id]) * ihy2;
        else if (j == ny - 1)
          acc += 2.0 * (f[m.id(i, ny - 2)] - f[id]) * ihy2;
        else
          acc += (f[m.id(i, j - 1)] - 2.0 * f[id] + f[m.id(i, j + 1)]) * ihy2;
      }
      out[id] = acc;
    }
  }
  return out;
}

// Plain discrete Laplacian, consistent up to second order also at boundary
// nodes (one-sided four-point second derivative). Not symmetric; used for
// integration-by-parts audits where the boundary flux must survive.
inline Field laplacian_onesided(const Field& f) {
  const Mesh& m = *f.mesh;
  Field out(m);
  const int nx = m.nx, ny = m.ny;
  const double ihx2 = 1.0 / (m.dx * m.dx);
  auto d2_left = [](double f0, double f1, double f2, double f3) {
    return 2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int id = m.id(i, j);
      double acc;
      if (i == 0)
        acc = d2_left(f[m.id(0, j)], f[m.id(1, j)], f[m.id(2, j)], f[m.id(3, j)]) * ihx2;
      else if (i == nx - 1)
        acc = d2_left(f[m.id(nx - 1, j)], f[m.id(nx - 2, j)], f[m.id(nx - 3, j)], f[m.id(nx - 4, j)]) * ihx2;
      else
        acc = (f[m.id(i - 1, j)] - 2.0 * f[id] + f[m.id(i + 1, j)]) * ihx2;
      if (m.dimension == 2) {
        const double ihy2 = 1.0 / (m.dy * m.dy);
        if (j == 0)
          acc += d2_left(f[m.id(i, 0)], f[m.id(i, 1)], f[m.id(i, 2)], f[m.id(i, 3)]) * ihy2;
        else if (j == ny - 1)
          acc += d2_left(f[m.id(i, ny - 1)], f[m.id(i, ny - 2)], f[m.id(i, ny - 3)], f[m.id(i, ny - 4)]) * ihy2;
        else
          acc += (f[m.id(i, j - 1)] - 2.0 * f[id] + f[m.id(i, j + 1)]) * ihy2;
      }
      out[id] = acc;
    }
  }
  return out;
}

// Second-order one-sided difference along the outward normal at each
// boundary node. Corner normals are the averaged diagonals.
inline BoundaryField normal_derivative(const Field& f) {
  const Mesh& m = *f.mesh;
  BoundaryField out(m);
  const int nx = m.nx, ny = m.ny;
  for (int s = 0; s < out.size(); ++s) {
    const int id = m.boundary_nodes[s];
    const int i = id % nx;
    const int j = id / nx;
    const Vec2 n = m.normals[s];
    double dfx = 0.0, dfy = 0.0;
    if (n.x < 0.0)
      dfx = detail::d1_forward(f[m.id(0, j)], f[m.id(1, j)], f[m.id(2, j)], m.dx);
    else if (n.x > 0.0)
      dfx = -detail::d1_forward(f[m.id(nx - 1, j)], f[m.id(nx - 2, j)], f[m.id(nx - 3, j)], m.dx);
    if (m.dimension == 2) {
      if (n.y < 0.0)
        dfy = detail::d1_forward(f[m.id(i, 0)], f[m.id(i, 1)], f[m.id(i, 2)], m.dy);
      else if (n.y > 0.0)
        dfy = -detail::d1_forward(f[m.id(i, ny - 1)], f[m.id(i, ny - 2)], f[m.id(i, ny - 3)], m.dy);
    }
    out[s] = n.x * dfx + n.y * dfy;
  }
  return out;
}

// Trace of a nodal field on the boundary node list.
inline BoundaryField boundary_trace(const Field& f) {
  const Mesh& m = *f.mesh;
  BoundaryField out(m);
  for (int s = 0; s < out.size(); ++s) out[s] = f[m.boundary_nodes[s]];
  return out;
}

} // namespace heatobs
