#pragma once

// Conjugation machinery around the weight Phi_i(x,t) = s * phi_i(x) / Gamma(t)
// with Gamma(t) = T - t + h. A field u is stacked into 2d copies
// f_i = u * exp(Phi_i / 2) (first the phi1 weights, then the phi2 weights of
// the family), on which the skew part A, the symmetric part S, the potential
// eta and the commutator identity are evaluated nodally. All time derivatives
// of the weight are closed forms in Gamma, never finite differences.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "heatobs/mesh.hpp"
#include "heatobs/morse.hpp"

namespace heatobs {

struct CarlemanConfig {
  double s = 0.1;
  double h = 0.1;
  double T = 1.0;
  const WeightFamily* family = nullptr;
};

inline void check_config(const CarlemanConfig& cfg) {
  if (!(cfg.s > 0.0 && cfg.s <= 1.0)) throw std::invalid_argument("carleman: need 0 < s <= 1");
  if (!(cfg.h > 0.0 && cfg.h <= 1.0)) throw std::invalid_argument("carleman: need 0 < h <= 1");
  if (!(cfg.T > 0.0)) throw std::invalid_argument("carleman: need T > 0");
  if (cfg.family == nullptr) throw std::invalid_argument("carleman: missing weight family");
}

inline double gamma(double t, const CarlemanConfig& cfg) {
  if (t < 0.0 || t > cfg.T + 1e-12)
    throw std::invalid_argument("gamma: t outside [0, T]");
  return cfg.T - t + cfg.h;
}

// spatial weight phi_i: first d entries are phi1, the next d entries phi2
inline const Field& weight_phi(const CarlemanConfig& cfg, int i) {
  const WeightFamily& fam = *cfg.family;
  if (i < 0 || i >= 2 * fam.d) throw std::out_of_range("weight_phi: index");
  return (i < fam.d) ? fam.phi1[i] : fam.phi2[i - fam.d];
}

inline Field phi_field(const CarlemanConfig& cfg, int i, double t) {
  const Field& phi = weight_phi(cfg, i);
  const double scl = cfg.s / gamma(t, cfg);
  Field out(*phi.mesh);
  for (int n = 0; n < out.size(); ++n) out[n] = scl * phi[n];
  return out;
}

struct StackedField {
  std::vector<Field> f; // 2d members
  double t = 0.0;
  const CarlemanConfig* config = nullptr;

  int members() const { return static_cast<int>(f.size()); }
  double norm_sq() const {
    double acc = 0.0;
    for (const Field& fi : f) acc += inner_product(fi, fi);
    return acc;
  }
};

inline StackedField stack(const Field& u, double t, const CarlemanConfig& cfg) {
  check_config(cfg);
  const WeightFamily& fam = *cfg.family;
  if (u.mesh != fam.mesh) throw std::invalid_argument("stack: mesh mismatch");
  StackedField out;
  out.t = t;
  out.config = &cfg;
  out.f.reserve(2 * fam.d);
  const double scl = cfg.s / gamma(t, cfg);
  for (int i = 0; i < 2 * fam.d; ++i) {
    const Field& phi = weight_phi(cfg, i);
    Field fi(*u.mesh);
    for (int n = 0; n < u.size(); ++n) fi[n] = u[n] * std::exp(0.5 * scl * phi[n]);
    out.f.push_back(std::move(fi));
  }
  return out;
}

inline Field unstack(const StackedField& f, int i) {
  const CarlemanConfig& cfg = *f.config;
  const Field& phi = weight_phi(cfg, i);
  const double scl = cfg.s / gamma(f.t, cfg);
  Field u(*phi.mesh);
  for (int n = 0; n < u.size(); ++n) u[n] = f.f[i][n] * std::exp(-0.5 * scl * phi[n]);
  return u;
}

// eta_i = (1/2) d_t Phi + (1/4)|grad Phi|^2 = (s / (4 Gamma^2)) (2 phi + s |grad phi|^2)
inline Field eta(int i, double t, const CarlemanConfig& cfg) {
  const Field& phi = weight_phi(cfg, i);
  auto g = gradient(phi);
  const double G = gamma(t, cfg);
  const double c = cfg.s / (4.0 * G * G);
  Field out(*phi.mesh);
  for (int n = 0; n < out.size(); ++n) {
    const double g2 = g[0][n] * g[0][n] + g[1][n] * g[1][n];
    out[n] = c * (2.0 * phi[n] + cfg.s * g2);
  }
  return out;
}

// A f = -grad Phi . grad f - (1/2) (Lap Phi) f
inline Field apply_A(const Field& fi, int i, double t, const CarlemanConfig& cfg) {
  const Field& phi = weight_phi(cfg, i);
  const double scl = cfg.s / gamma(t, cfg);
  auto gphi = gradient(phi);
  Field lphi = laplacian_onesided(phi);
  auto gf = gradient(fi);
  Field out(*fi.mesh);
  for (int n = 0; n < out.size(); ++n) {
    const double adv = gphi[0][n] * gf[0][n] + gphi[1][n] * gf[1][n];
    out[n] = -scl * adv - 0.5 * scl * lphi[n] * fi[n];
  }
  return out;
}

// S f = -Lap f - eta f (one-sided laplacian: f satisfies a Robin condition,
// not the Neumann condition baked into the ghost-reflection stencil)
inline Field apply_S(const Field& fi, int i, double t, const CarlemanConfig& cfg) {
  Field out = laplacian_onesided(fi);
  Field e = eta(i, t, cfg);
  for (int n = 0; n < out.size(); ++n) out[n] = -out[n] - e[n] * fi[n];
  return out;
}

// S' f = -(d_t eta) f with d_t eta = 2 eta / Gamma
inline Field apply_Sprime(const Field& fi, int i, double t, const CarlemanConfig& cfg) {
  Field e = eta(i, t, cfg);
  const double c = -2.0 / gamma(t, cfg);
  Field out(*fi.mesh);
  for (int n = 0; n < out.size(); ++n) out[n] = c * e[n] * fi[n];
  return out;
}

// d_n f_i - (1/2) d_n Phi_i f_i per member; vanishes to discretization order
// when f is stacked from a Neumann solution
inline std::vector<BoundaryField> robin_residual(const StackedField& f, double t,
                                                 const CarlemanConfig& cfg) {
  std::vector<BoundaryField> out;
  out.reserve(f.members());
  for (int i = 0; i < f.members(); ++i) {
    BoundaryField dnf = normal_derivative(f.f[i]);
    BoundaryField dnphi = normal_derivative(phi_field(cfg, i, t));
    BoundaryField tr = boundary_trace(f.f[i]);
    BoundaryField r(*f.f[i].mesh);
    for (int q = 0; q < r.size(); ++q) r[q] = dnf[q] - 0.5 * dnphi[q] * tr[q];
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

// Hessian by repeated first differences: {xx, xy, yy}
inline std::array<Field, 3> hessian(const Field& f) {
  auto g = gradient(f);
  auto gx = gradient(g[0]);
  std::array<Field, 3> H{gx[0], Field(*f.mesh), Field(*f.mesh)};
  if (f.mesh->dimension == 2) {
    auto gy = gradient(g[1]);
    for (int n = 0; n < f.size(); ++n) {
      H[1][n] = 0.5 * (gx[1][n] + gy[0][n]);
      H[2][n] = gy[1][n];
    }
  }
  return H;
}

} // namespace detail

struct Step5Report {
  double X = 0.0;          // <S'f,f> + 2<Sf,Af>
  double Y = 0.0;          // <Sf,f>
  double norm_sq = 0.0;    // ||f||^2
  double C0_used = 0.5;
  double C0_min = 0.0;     // smallest C0 in [0,1] absorbing X with C = 0 (1 if none)
  double C_measured = 0.0; // smallest C >= 0 with X <= (1+C0)/Gamma Y + C/h^2 ||f||^2
  double slack = 0.0;      // rhs - lhs at the reported constants
  bool degenerate = false; // f == 0
  double eta_max_bd = 0.0;     // max eta_i over the B u D regions (phi1 members)
  double ci_smallness = 0.0;   // exp(-c3 s / Gamma), the C_i damping factor
  double eta_max_collar = 0.0; // max eta over the boundary collar (phi2 members)
};

struct CommutatorReport {
  double lhs = 0.0;          // <S'f,f> + 2<Sf,Af>
  double vol_hessian = 0.0;  // -2 int grad f . Hess Phi . grad f
  double vol_third = 0.0;    // -int (Lap grad Phi . grad f) f
  double vol_zeroth = 0.0;   // -(2/Gamma) int (eta + |grad Phi|^2/4 + (s/4) gPhi.Hess phi.gPhi)|f|^2
  double bdry_cross = 0.0;   // 2 oint d_n f (grad Phi . grad f)
  double bdry_gradsq = 0.0;  // -oint d_n Phi |grad f|^2
  double bdry_lap = 0.0;     // oint d_n f (Lap Phi) f
  double bdry_eta = 0.0;     // oint eta d_n Phi |f|^2
  double rhs = 0.0;
  double identity_residual = 0.0;
  double scale = 0.0; // sum of absolute values of the constituent integrals
  double dx = 0.0;
  double t = 0.0;
  // step-5 absorption at the same snapshot
  double C0_measured = 0.0;
  double C_measured = 0.0;
  double step5_slack = 0.0;
};

inline Step5Report step5_bound(const StackedField& f, double t, const CarlemanConfig& cfg,
                               double C0 = 0.5) {
  check_config(cfg);
  const WeightFamily& fam = *cfg.family;
  const double G = gamma(t, cfg);
  Step5Report rep;
  rep.C0_used = C0;
  rep.norm_sq = f.norm_sq();

  for (int i = 0; i < f.members(); ++i) {
    const Field& fi = f.f[i];
    Field Sf = apply_S(fi, i, t, cfg);
    Field Af = apply_A(fi, i, t, cfg);
    Field Spf = apply_Sprime(fi, i, t, cfg);
    rep.X += inner_product(Spf, fi) + 2.0 * inner_product(Sf, Af);
    rep.Y += inner_product(Sf, fi);
  }

  // region-wise ingredients of the absorption argument
  rep.ci_smallness = fam.constants.c3_applicable
                         ? std::exp(-fam.constants.c3 * cfg.s / G)
                         : 1.0;
  double bd_max = -1e300, collar_max = -1e300;
  for (int i = 0; i < fam.d; ++i) {
    Field e1 = eta(i, t, cfg);
    for (const auto& nodes : {fam.region_B[i], fam.region_D[i]})
      for (int n : nodes) bd_max = std::max(bd_max, e1[n]);
    Field e2 = eta(fam.d + i, t, cfg);
    for (int n : fam.collar) collar_max = std::max(collar_max, e2[n]);
  }
  rep.eta_max_bd = (bd_max > -1e300) ? bd_max : 0.0;
  rep.eta_max_collar = (collar_max > -1e300) ? collar_max : 0.0;

  if (rep.norm_sq <= 0.0) {
    rep.degenerate = true;
    return rep;
  }
  const double tol = 1e-8 * (std::abs(rep.X) + std::abs(rep.Y) + rep.norm_sq);
  if (rep.Y < -tol)
    throw std::runtime_error("step5_bound: <Sf,f> < 0, s appears miscalibrated");

  const double hh = cfg.h * cfg.h;
  rep.C_measured =
      std::max(0.0, (rep.X - (1.0 + C0) / G * rep.Y) * hh / rep.norm_sq);
  rep.slack = (1.0 + C0) / G * rep.Y + rep.C_measured / hh * rep.norm_sq - rep.X;
  if (rep.Y > 0.0 && rep.X <= 2.0 / G * rep.Y) {
    // monotone in C0, bisect for the smallest admissible value with C = 0
    double lo = 0.0, hi = 1.0;
    if (rep.X > (1.0 + lo) / G * rep.Y) {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((rep.X <= (1.0 + mid) / G * rep.Y) ? hi : lo) = mid;
      }
    }
    rep.C0_min = hi;
  } else {
    rep.C0_min = 1.0;
  }
  return rep;
}

inline CommutatorReport commutator_identity(const StackedField& f, double t,
                                            const CarlemanConfig& cfg) {
  check_config(cfg);
  const Mesh& m = *cfg.family->mesh;
  const double G = gamma(t, cfg);
  CommutatorReport rep;
  rep.dx = m.dx;
  rep.t = t;

  for (int i = 0; i < f.members(); ++i) {
    const Field& fi = f.f[i];
    const Field& phi = weight_phi(cfg, i);
    const double scl = cfg.s / G;

    Field Sf = apply_S(fi, i, t, cfg);
    Field Af = apply_A(fi, i, t, cfg);
    Field Spf = apply_Sprime(fi, i, t, cfg);
    rep.lhs += inner_product(Spf, fi) + 2.0 * inner_product(Sf, Af);

    auto gphi = gradient(phi);
    auto Hphi = detail::hessian(phi);
    Field lphi = laplacian_onesided(phi);
    // Lap grad phi computed as grad Lap phi: differencing in the other order
    // turns the one-sided/central error jump of the gradient at the boundary
    // into an O(1) stencil error
    auto lap_gphi = gradient(lphi);
    Field e = eta(i, t, cfg);
    auto gf = gradient(fi);

    Field v1(m), v2(m), v3(m);
    for (int n = 0; n < m.node_count(); ++n) {
      const double hxx = Hphi[0][n], hxy = Hphi[1][n], hyy = Hphi[2][n];
      const double quad_f = gf[0][n] * (hxx * gf[0][n] + hxy * gf[1][n]) +
                            gf[1][n] * (hxy * gf[0][n] + hyy * gf[1][n]);
      v1[n] = -2.0 * scl * quad_f;
      v2[n] = -scl * (lap_gphi[0][n] * gf[0][n] + lap_gphi[1][n] * gf[1][n]) * fi[n];
      const double gp2 = gphi[0][n] * gphi[0][n] + gphi[1][n] * gphi[1][n];
      const double quad_p = gphi[0][n] * (hxx * gphi[0][n] + hxy * gphi[1][n]) +
                            gphi[1][n] * (hxy * gphi[0][n] + hyy * gphi[1][n]);
      const double zeroth =
          e[n] + 0.25 * scl * scl * gp2 + 0.25 * cfg.s * scl * scl * quad_p;
      v3[n] = -(2.0 / G) * zeroth * fi[n] * fi[n];
    }
    for (int n = 0; n < m.node_count(); ++n) {
      rep.vol_hessian += m.volume_weights[n] * v1[n];
      rep.vol_third += m.volume_weights[n] * v2[n];
      rep.vol_zeroth += m.volume_weights[n] * v3[n];
    }

    BoundaryField dnf = normal_derivative(fi);
    BoundaryField dnphi = normal_derivative(phi);
    for (int q = 0; q < dnf.size(); ++q) {
      const int n = m.boundary_nodes[q];
      const double w = m.boundary_weights[q];
      const double gdot = scl * (gphi[0][n] * gf[0][n] + gphi[1][n] * gf[1][n]);
      const double gf2 = gf[0][n] * gf[0][n] + gf[1][n] * gf[1][n];
      rep.bdry_cross += w * 2.0 * dnf[q] * gdot;
      rep.bdry_gradsq -= w * scl * dnphi[q] * gf2;
      rep.bdry_lap += w * dnf[q] * scl * lphi[n] * fi[n];
      rep.bdry_eta += w * e[n] * scl * dnphi[q] * fi[n] * fi[n];
    }
  }

  rep.rhs = rep.vol_hessian + rep.vol_third + rep.vol_zeroth + rep.bdry_cross +
            rep.bdry_gradsq + rep.bdry_lap + rep.bdry_eta;
  rep.identity_residual = rep.lhs - rep.rhs;
  rep.scale = std::abs(rep.lhs) + std::abs(rep.vol_hessian) + std::abs(rep.vol_third) +
              std::abs(rep.vol_zeroth) + std::abs(rep.bdry_cross) + std::abs(rep.bdry_gradsq) +
              std::abs(rep.bdry_lap) + std::abs(rep.bdry_eta);

  if (f.norm_sq() > 0.0) {
    Step5Report s5 = step5_bound(f, t, cfg);
    rep.C0_measured = s5.C0_min;
    rep.C_measured = s5.C_measured;
    rep.step5_slack = s5.slack;
  }
  return rep;
}

// largest admissible s keeps eta_i <= 0 node-wise: s |grad phi|^2 <= 2 |phi|.
// Returns safety * min over members and nodes of 2|phi| / |grad phi|^2
// (near-critical nodes with tiny gradient are skipped; they impose no bound),
// capped at 1.
inline double calibrate_s(const WeightFamily& fam, double safety) {
  if (!(safety > 0.0 && safety <= 1.0))
    throw std::invalid_argument("calibrate_s: safety must lie in (0, 1]");
  if (!fam.constants.ok)
    throw std::invalid_argument("calibrate_s: weight family failed verification");
  double best = 1e300;
  for (int i = 0; i < 2 * fam.d; ++i) {
    const Field& phi = (i < fam.d) ? fam.phi1[i] : fam.phi2[i - fam.d];
    auto g = gradient(phi);
    for (int n = 0; n < phi.size(); ++n) {
      const double g2 = g[0][n] * g[0][n] + g[1][n] * g[1][n];
      if (g2 <= 1e-8) continue;
      best = std::min(best, 2.0 * std::abs(phi[n]) / g2);
    }
  }
  if (!(best > 0.0) || best >= 1e300)
    throw std::runtime_error("calibrate_s: no admissible s > 0 found");
  return std::min(1.0, safety * best);
}

} // namespace heatobs
