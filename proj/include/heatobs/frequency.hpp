#pragma once

// Frequency function N(t) = <Sf,f> / ||f||^2 along a stacked heat trajectory
// and the two differential inequalities it satisfies:
//   |y'/2 + N y| <= ||a|| y          (energy identity)
//   N' <= (1+C0)/Gamma N + ||a||^2 + C/h^2
// Time derivatives are centered differences on the stored trace; endpoints
// are excluded from every check. Each inequality carries an explicit budget
// tau = C_tol (dx^1.5 + dt^2) * scale so violations are distinguishable from
// discretization noise.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "heatobs/carleman.hpp"
#include "heatobs/heat.hpp"

namespace heatobs {

struct FrequencyTrace {
  std::vector<double> times;
  std::vector<double> y;  // ||f(t)||^2
  std::vector<double> N;  // <Sf,f> / y
  std::vector<double> X;  // <S'f,f> + 2<Sf,Af>, for the N' bound
  std::vector<double> energy_residuals; // interior entries; 0 at endpoints
  std::vector<double> Nprime_slacks;    // X/y + ||a||^2 - N', interior; 0 at endpoints
  double a_sup = 0.0;
  const CarlemanConfig* config = nullptr;
  double dx = 0.0;
  double dt = 0.0;

  int size() const { return static_cast<int>(times.size()); }
};

inline FrequencyTrace build_trace(const HeatSolution& sol, const CarlemanConfig& cfg) {
  check_config(cfg);
  const Mesh& m = *sol.mesh;
  const int K = sol.snapshot_count();
  if (K < 3) throw std::invalid_argument("build_trace: need at least 3 snapshots");

  FrequencyTrace tr;
  tr.times = sol.times;
  tr.a_sup = sol.potential.sup_norm;
  tr.config = &cfg;
  tr.dx = m.dx;
  tr.dt = sol.dt;
  tr.y.resize(K);
  tr.N.resize(K);
  tr.X.resize(K);
  tr.energy_residuals.assign(K, 0.0);
  tr.Nprime_slacks.assign(K, 0.0);

  std::vector<double> Sff(K), Ff(K);
  for (int k = 0; k < K; ++k) {
    const double t = sol.times[k];
    StackedField f = stack(sol.fields[k], t, cfg);
    double y = 0.0, sff = 0.0, x = 0.0, ff = 0.0;
    for (int i = 0; i < f.members(); ++i) {
      const Field& fi = f.f[i];
      y += inner_product(fi, fi);
      Field Sf = apply_S(fi, i, t, cfg);
      Field Af = apply_A(fi, i, t, cfg);
      Field Spf = apply_Sprime(fi, i, t, cfg);
      sff += inner_product(Sf, fi);
      x += inner_product(Spf, fi) + 2.0 * inner_product(Sf, Af);
      for (int n = 0; n < m.node_count(); ++n)
        ff -= m.volume_weights[n] * sol.potential.evaluator(m.coords[n], t) * fi[n] * fi[n];
    }
    if (y < 1e-300) throw std::runtime_error("build_trace: solution is numerically zero");
    tr.y[k] = y;
    tr.N[k] = sff / y;
    tr.X[k] = x;
    Sff[k] = sff;
    Ff[k] = ff;
  }

  for (int k = 1; k + 1 < K; ++k) {
    const double dt2 = tr.times[k + 1] - tr.times[k - 1];
    const double yp = (tr.y[k + 1] - tr.y[k - 1]) / dt2;
    tr.energy_residuals[k] = 0.5 * yp + Sff[k] - Ff[k];
    const double Np = (tr.N[k + 1] - tr.N[k - 1]) / dt2;
    tr.Nprime_slacks[k] = tr.X[k] / tr.y[k] + tr.a_sup * tr.a_sup - Np;
  }
  return tr;
}

struct OdeCheckReport {
  double F1 = 0.0; // ||a||
  double F2 = 0.0; // ||a||^2 + C/h^2
  bool energy_ok = true;
  bool frequency_ok = true;
  double energy_worst = 0.0;    // max over interior times of |lhs| - rhs - tau
  double frequency_worst = 0.0; // max over interior times of lhs - rhs - tau
  double energy_worst_time = 0.0;
  double frequency_worst_time = 0.0;
  double c_tol = 10.0;
};

inline OdeCheckReport check_ode_system(const FrequencyTrace& tr, double C0, double C) {
  if (tr.config == nullptr) throw std::invalid_argument("check_ode_system: trace has no config");
  const CarlemanConfig& cfg = *tr.config;
  OdeCheckReport rep;
  rep.F1 = tr.a_sup;
  rep.F2 = tr.a_sup * tr.a_sup + C / (cfg.h * cfg.h);
  const double eps = std::pow(tr.dx, 1.5) + tr.dt * tr.dt;
  rep.energy_worst = -1e300;
  rep.frequency_worst = -1e300;

  for (int k = 1; k + 1 < tr.size(); ++k) {
    const double dt2 = tr.times[k + 1] - tr.times[k - 1];
    const double t = tr.times[k];
    const double G = gamma(t, cfg);

    const double yp = (tr.y[k + 1] - tr.y[k - 1]) / dt2;
    const double e_lhs = std::abs(0.5 * yp + tr.N[k] * tr.y[k]);
    const double e_rhs = rep.F1 * tr.y[k];
    const double e_tau = rep.c_tol * eps * (e_lhs + std::abs(tr.N[k]) * tr.y[k] + tr.y[k]);
    const double e_excess = e_lhs - e_rhs - e_tau;
    if (e_excess > rep.energy_worst) {
      rep.energy_worst = e_excess;
      rep.energy_worst_time = t;
    }

    const double Np = (tr.N[k + 1] - tr.N[k - 1]) / dt2;
    const double f_rhs = (1.0 + C0) / G * tr.N[k] + rep.F2;
    const double f_tau =
        rep.c_tol * eps * (std::abs(Np) + std::abs(f_rhs) + std::abs(tr.X[k]) / tr.y[k]);
    const double f_excess = Np - f_rhs - f_tau;
    if (f_excess > rep.frequency_worst) {
      rep.frequency_worst = f_excess;
      rep.frequency_worst_time = t;
    }
  }
  rep.energy_ok = rep.energy_worst <= 0.0;
  rep.frequency_ok = rep.frequency_worst <= 0.0;
  return rep;
}

} // namespace heatobs
