#pragma once

// Three-point logarithmic-convexity engine: closed-form weight integrals,
// the interpolation exponent M and drift D, the geometric-sequence values
// M_ell / K_ell with their upper bounds, and hypothesis checking for
// sampled (y, N) traces. Solver-independent; everything works on plain
// arrays of time samples.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatobs {

// int_ta^tb (T - t + h)^{-(1+C0)} dt, closed form.
inline double weight_integral(double ta, double tb, double T, double h, double C0) {
  if (!(ta < tb) || tb > T + 1e-15)
    throw std::invalid_argument("weight_integral: need ta < tb <= T");
  if (C0 < 0.0) throw std::invalid_argument("weight_integral: C0 must be >= 0");
  const double ga = T - ta + h;
  const double gb = T - tb + h;
  if (C0 == 0.0) return std::log(ga / gb);
  return (std::pow(gb, -C0) - std::pow(ga, -C0)) / C0;
}

inline double compute_M(double t1, double t2, double t3, double T, double h, double C0) {
  return weight_integral(t2, t3, T, h, C0) / weight_integral(t1, t2, T, h, C0);
}

inline double compute_D(double M, double F1, double F2, double t1, double t3) {
  const double dt = t3 - t1;
  return 2.0 * M * (F2 * dt * dt + F1 * dt);
}

struct MEll {
  double value;
  double upper_bound; // (l+1)^{C0} / (1 - (2/3)^{C0})
};

// M_ell for the geometry t3 = T, t2 = T - l h, t1 = T - 2 l h; h-free.
inline MEll m_ell(double ell, double C0) {
  if (C0 <= 0.0) throw std::invalid_argument("m_ell: C0 must be > 0");
  if (ell < 1.0) throw std::invalid_argument("m_ell: ell must be >= 1");
  const double p = std::pow(ell + 1.0, C0);
  const double value = (p - 1.0) / (1.0 - std::pow((ell + 1.0) / (2.0 * ell + 1.0), C0));
  const double bound = p / (1.0 - std::pow(2.0 / 3.0, C0));
  return {value, bound};
}

struct KEll {
  double log_K;     // D_ell; K_ell = exp(D_ell), kept in log space
  double log_bound; // C_ell (1 + a_norm^{2/3})
};

// K_ell = exp(D_ell) with D_ell = 2 M_ell ((a^2 + C/h^2)(2 l h)^2 + a (2 l h)),
// and the h-free bound exp(C_ell (1 + a^{2/3})) with C_ell = 2 M_ell (1 + 4 C l^2 + 8 l^2),
// valid when a^{2/3} h < 1.
inline KEll k_ell_bound(double ell, double h, double a_norm, double M_ell_value, double C) {
  if (std::pow(a_norm, 2.0 / 3.0) * h >= 1.0 && a_norm > 0.0)
    throw std::invalid_argument("k_ell_bound: bound branch needs a_norm^{2/3} h < 1");
  const double span = 2.0 * ell * h;
  const double F2 = a_norm * a_norm + C / (h * h);
  const double D = 2.0 * M_ell_value * (F2 * span * span + a_norm * span);
  const double C_ell = 2.0 * M_ell_value * (1.0 + 4.0 * C * ell * ell + 8.0 * ell * ell);
  const double bound = C_ell * (1.0 + std::pow(a_norm, 2.0 / 3.0));
  return {D, bound};
}

struct InterpInputs {
  double T = 1.0;
  double h = 0.1;
  double C0 = 0.5;
  double F1 = 0.0;
  double F2 = 0.0;
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  double y1 = 0.0, y2 = 0.0, y3 = 0.0;

  void validate() const {
    if (h <= 0.0) throw std::invalid_argument("InterpInputs: h must be > 0");
    if (C0 < 0.0 || F1 < 0.0 || F2 < 0.0)
      throw std::invalid_argument("InterpInputs: C0, F1, F2 must be >= 0");
    if (!(0.0 <= t1 && t1 < t2 && t2 < t3 && t3 <= T))
      throw std::invalid_argument("InterpInputs: need 0 <= t1 < t2 < t3 <= T");
    if (y1 < 1e-300 || y2 < 1e-300 || y3 < 1e-300)
      throw std::invalid_argument("InterpInputs: y values must exceed 1e-300");
  }
};

struct ThreePointResult {
  double M = 0.0;
  double D = 0.0;
  double log_lhs = 0.0;  // (1+M) log y(t2)
  double log_rhs = 0.0;  // log y(t3) + M log y(t1) + D
  double margin = 0.0;   // log_rhs - log_lhs, >= 0 when the lemma holds
  bool holds = false;
  bool M_at_least_one = false; // the proof's final absorption needs M >= 1
};

// y(t2)^{1+M} <= y(t3) y(t1)^M e^D, evaluated in log space.
inline ThreePointResult three_point_check(const InterpInputs& in) {
  in.validate();
  ThreePointResult r;
  r.M = compute_M(in.t1, in.t2, in.t3, in.T, in.h, in.C0);
  r.D = compute_D(r.M, in.F1, in.F2, in.t1, in.t3);
  r.log_lhs = (1.0 + r.M) * std::log(in.y2);
  r.log_rhs = std::log(in.y3) + r.M * std::log(in.y1) + r.D;
  r.margin = r.log_rhs - r.log_lhs;
  r.holds = r.margin >= 0.0;
  r.M_at_least_one = r.M >= 1.0;
  return r;
}

struct HypothesisReport {
  bool pass = true;
  double worst_energy_slack = -std::numeric_limits<double>::infinity();
  double worst_n_slack = -std::numeric_limits<double>::infinity();
  double worst_energy_time = 0.0;
  double worst_n_time = 0.0;
  double tolerance = 0.0;
};

// Per-time slack of the Proposition-3 hypotheses on a sampled trace:
//   |y'/2 + N y| <= F1 y          (energy)
//   N' <= (1+C0)/(T-t+h) N + F2   (frequency growth)
// Derivatives by centered differences, endpoints excluded. A violation is
// a positive slack beyond the additive tolerance budget.
inline HypothesisReport check_hypotheses(const std::vector<double>& times,
                                         const std::vector<double>& y,
                                         const std::vector<double>& N,
                                         double F1, double F2, double C0,
                                         double h, double T,
                                         double tolerance = 0.0) {
  if (times.size() != y.size() || times.size() != N.size() || times.size() < 3)
    throw std::invalid_argument("check_hypotheses: need >= 3 aligned samples");
  HypothesisReport rep;
  rep.tolerance = tolerance;
  for (size_t k = 1; k + 1 < times.size(); ++k) {
    const double dtw = times[k + 1] - times[k - 1];
    const double yp = (y[k + 1] - y[k - 1]) / dtw;
    const double np = (N[k + 1] - N[k - 1]) / dtw;
    const double e_slack = std::abs(0.5 * yp + N[k] * y[k]) - F1 * y[k];
    const double n_slack = np - ((1.0 + C0) / (T - times[k] + h) * N[k] + F2);
    if (e_slack > rep.worst_energy_slack) {
      rep.worst_energy_slack = e_slack;
      rep.worst_energy_time = times[k];
    }
    if (n_slack > rep.worst_n_slack) {
      rep.worst_n_slack = n_slack;
      rep.worst_n_time = times[k];
    }
  }
  rep.pass = rep.worst_energy_slack <= tolerance && rep.worst_n_slack <= tolerance;
  return rep;
}

} // namespace heatobs
