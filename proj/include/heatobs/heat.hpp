#pragma once

// Neumann heat flow d_t u - Lap u + a u = 0 on the unit interval / square.
// Crank-Nicolson (default) or implicit Euler stepping on the ghost-reflection
// discretization from mesh.hpp; 1D steps use the Thomas algorithm, 2D steps a
// sparse LU factorization. Also provides the exponential growth check
// ||u(t2)|| <= e^{(t2-t1)||a||} ||u(t1)|| and a dense solution operator used
// as an oracle by the optimization routines.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "heatobs/mesh.hpp"

namespace heatobs {

struct Potential {
  std::function<double(const Vec2&, double)> evaluator; // a(x, t)
  double sup_norm = 0.0;                                // >= |a| everywhere
  bool time_dependent = false;
};

inline Potential zero_potential() {
  return {[](const Vec2&, double) { return 0.0; }, 0.0, false};
}

inline Potential constant_potential(double c) {
  return {[c](const Vec2&, double) { return c; }, std::abs(c), false};
}

inline Potential make_potential(std::function<double(const Vec2&, double)> a, double sup_norm,
                                bool time_dependent) {
  if (sup_norm < 0.0) throw std::invalid_argument("make_potential: sup_norm must be >= 0");
  return {std::move(a), sup_norm, time_dependent};
}

enum class TimeScheme { crank_nicolson, implicit_euler };

struct HeatSolution {
  const Mesh* mesh = nullptr;
  std::vector<double> times;  // increasing, times[0] = 0
  std::vector<Field> fields;  // one per time
  Potential potential;
  double dt = 0.0;
  TimeScheme scheme = TimeScheme::crank_nicolson;

  int snapshot_count() const { return static_cast<int>(times.size()); }

  // index of the stored time nearest t; t must land within dt/2 of a snapshot
  int snapshot_at(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    int k = static_cast<int>(it - times.begin());
    if (k > 0 && (k == snapshot_count() || times[k] - t > t - times[k - 1])) --k;
    if (std::abs(times[k] - t) > 0.5 * dt + 1e-12)
      throw std::invalid_argument("HeatSolution: no snapshot near requested time");
    return k;
  }
};

namespace detail {

// in-place Thomas solve of a tridiagonal system; diag/upper/lower are
// clobbered. Throws on a vanishing pivot.
inline void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                         std::vector<double>& upper, std::vector<double>& rhs) {
  const int n = static_cast<int>(diag.size());
  for (int i = 1; i < n; ++i) {
    if (std::abs(diag[i - 1]) < 1e-14)
      throw std::runtime_error("heat solve: singular step matrix (pivot ~ 0)");
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (std::abs(diag[n - 1]) < 1e-14)
    throw std::runtime_error("heat solve: singular step matrix (pivot ~ 0)");
  rhs[n - 1] /= diag[n - 1];
  for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

// sparse matrix of the ghost-reflection laplacian combined with the nodal
// potential: rows of (Lap - a(.,t_eval)) scaled by `scale`, shifted by
// `shift` on the diagonal, i.e. shift*I + scale*(Lap - a).
inline Eigen::SparseMatrix<double> step_matrix_2d(const Mesh& m, const Potential& a, double t_eval,
                                                  double shift, double scale) {
  const int nx = m.nx, ny = m.ny, N = m.node_count();
  const double ihx2 = 1.0 / (m.dx * m.dx), ihy2 = 1.0 / (m.dy * m.dy);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(N) * 5);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int id = m.id(i, j);
      double diag = shift + scale * (-2.0 * ihx2 - 2.0 * ihy2 - a.evaluator(m.coords[id], t_eval));
      if (i == 0)
        trip.emplace_back(id, m.id(1, j), scale * 2.0 * ihx2);
      else if (i == nx - 1)
        trip.emplace_back(id, m.id(nx - 2, j), scale * 2.0 * ihx2);
      else {
        trip.emplace_back(id, m.id(i - 1, j), scale * ihx2);
        trip.emplace_back(id, m.id(i + 1, j), scale * ihx2);
      }
      if (j == 0)
        trip.emplace_back(id, m.id(i, 1), scale * 2.0 * ihy2);
      else if (j == ny - 1)
        trip.emplace_back(id, m.id(i, ny - 2), scale * 2.0 * ihy2);
      else {
        trip.emplace_back(id, m.id(i, j - 1), scale * ihy2);
        trip.emplace_back(id, m.id(i, j + 1), scale * ihy2);
      }
      trip.emplace_back(id, id, diag);
    }
  Eigen::SparseMatrix<double> M(N, N);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// one application of shift*I + scale*(Lap - a) without assembling a matrix
inline Field apply_shifted(const Field& u, const Potential& a, double t_eval, double shift,
                           double scale) {
  const Mesh& m = *u.mesh;
  Field out = laplacian_neumann(u);
  for (int n = 0; n < m.node_count(); ++n)
    out[n] = shift * u[n] + scale * (out[n] - a.evaluator(m.coords[n], t_eval) * u[n]);
  return out;
}

} // namespace detail

inline HeatSolution solve(const Mesh& m, const Potential& a, const Field& u0, double T, double dt,
                          TimeScheme scheme = TimeScheme::crank_nicolson) {
  if (u0.mesh != &m) throw std::invalid_argument("solve: u0 does not live on the given mesh");
  if (!(dt > 0.0) || !(T >= dt)) throw std::invalid_argument("solve: need dt > 0 and T >= dt");

  const int nsteps = static_cast<int>(std::llround(T / dt));
  if (nsteps < 1 || std::abs(nsteps * dt - T) > 1e-9 * std::max(1.0, T))
    throw std::invalid_argument("solve: T must be an integer multiple of dt");

  // CN: (I + dt/2 (-Lap + a)) u' = (I - dt/2 (-Lap + a)) u, a at the half step
  // IE: (I + dt   (-Lap + a)) u' = u,                       a at the new time
  const bool cn = (scheme == TimeScheme::crank_nicolson);
  const double w_impl = cn ? 0.5 * dt : dt;

  HeatSolution sol;
  sol.mesh = &m;
  sol.potential = a;
  sol.dt = dt;
  sol.scheme = scheme;
  sol.times.reserve(nsteps + 1);
  sol.fields.reserve(nsteps + 1);
  sol.times.push_back(0.0);
  sol.fields.push_back(u0);

  const int N = m.node_count();
  if (m.dimension == 1) {
    const double ihx2 = 1.0 / (m.dx * m.dx);
    std::vector<double> lower(N), diag(N), upper(N), rhs(N);
    Field u = u0;
    for (int step = 0; step < nsteps; ++step) {
      const double t0 = step * dt;
      const double te = cn ? t0 + 0.5 * dt : t0 + dt;
      Field r = cn ? detail::apply_shifted(u, a, te, 1.0, 0.5 * dt) : u;
      for (int i = 0; i < N; ++i) {
        const double ai = a.evaluator(m.coords[i], te);
        diag[i] = 1.0 + w_impl * (2.0 * ihx2 + ai);
        lower[i] = (i == N - 1) ? -w_impl * 2.0 * ihx2 : -w_impl * ihx2;
        upper[i] = (i == 0) ? -w_impl * 2.0 * ihx2 : -w_impl * ihx2;
        rhs[i] = r[i];
      }
      detail::thomas_solve(lower, diag, upper, rhs);
      for (int i = 0; i < N; ++i) u[i] = rhs[i];
      sol.times.push_back((step + 1) * dt);
      sol.fields.push_back(u);
    }
  } else {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool factored = false;
    Field u = u0;
    Eigen::VectorXd rhs(N), x(N);
    for (int step = 0; step < nsteps; ++step) {
      const double t0 = step * dt;
      const double te = cn ? t0 + 0.5 * dt : t0 + dt;
      if (!factored || a.time_dependent) {
        lu.compute(detail::step_matrix_2d(m, a, te, 1.0, -w_impl));
        if (lu.info() != Eigen::Success)
          throw std::runtime_error("heat solve: singular step matrix");
        factored = true;
      }
      Field r = cn ? detail::apply_shifted(u, a, te, 1.0, 0.5 * dt) : u;
      for (int n = 0; n < N; ++n) rhs[n] = r[n];
      x = lu.solve(rhs);
      for (int n = 0; n < N; ++n) u[n] = x[n];
      sol.times.push_back((step + 1) * dt);
      sol.fields.push_back(u);
    }
  }
  return sol;
}

// ||u(t2)|| - e^{(t2-t1)||a||} ||u(t1)||, which the continuum flow keeps <= 0
inline double growth_check(const HeatSolution& sol, double t1, double t2) {
  if (!(0.0 <= t1 && t1 <= t2))
    throw std::invalid_argument("growth_check: need 0 <= t1 <= t2");
  const Field& u1 = sol.fields[sol.snapshot_at(t1)];
  const Field& u2 = sol.fields[sol.snapshot_at(t2)];
  return l2_norm(u2) - std::exp((t2 - t1) * sol.potential.sup_norm) * l2_norm(u1);
}

struct SolutionOperator {
  const Mesh* mesh = nullptr;
  std::vector<std::vector<double>> columns; // columns[j] = E(t) e_j
  double t = 0.0;
  Potential potential;

  Field apply(const Field& u0) const {
    if (u0.mesh != mesh) throw std::invalid_argument("SolutionOperator: mesh mismatch");
    const int N = static_cast<int>(columns.size());
    Field out(*mesh);
    for (int j = 0; j < N; ++j) {
      const double c = u0[j];
      if (c == 0.0) continue;
      for (int i = 0; i < N; ++i) out[i] += c * columns[j][i];
    }
    return out;
  }
};

// dense u(.,0) -> u(.,t) map, built column by column from basis solves.
// Deterministic regardless of the number of worker threads.
inline SolutionOperator build_solution_operator(const Mesh& m, const Potential& a, double t,
                                                double dt,
                                                TimeScheme scheme = TimeScheme::crank_nicolson) {
  const int N = m.node_count();
  if (N > 1024)
    throw std::invalid_argument("build_solution_operator: node count exceeds dense oracle scale");
  SolutionOperator op;
  op.mesh = &m;
  op.t = t;
  op.potential = a;
  op.columns.assign(N, std::vector<double>(N, 0.0));
  if (t <= 0.0) {
    for (int j = 0; j < N; ++j) op.columns[j][j] = 1.0;
    return op;
  }
  const unsigned workers =
      std::min(4u, std::max(1u, std::thread::hardware_concurrency()));
  auto run = [&](int lo, int hi) {
    for (int j = lo; j < hi; ++j) {
      Field e(m);
      e[j] = 1.0;
      HeatSolution s = solve(m, a, e, t, dt, scheme);
      op.columns[j] = s.fields.back().v;
    }
  };
  std::vector<std::thread> pool;
  const int chunk = (N + static_cast<int>(workers) - 1) / static_cast<int>(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(w) * chunk, hi = std::min(N, lo + chunk);
    if (lo < hi) pool.emplace_back(run, lo, hi);
  }
  for (auto& th : pool) th.join();
  return op;
}

} // namespace heatobs
