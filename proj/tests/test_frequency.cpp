#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "heatobs/frequency.hpp"

using namespace heatobs;

namespace {

struct Lab {
  Mesh mesh;
  WeightFamily family;
  CarlemanConfig cfg;

  explicit Lab(int n, double T = 0.4, double h = 0.1) : mesh(build_mesh(1, n)) {
    MorseFunction psi = base_morse(mesh);
    ObservationRegion w = make_observation_region(mesh, {{{0.5, 0.0}, 0.2}});
    family = make_weight_family({psi}, w, 0.1);
    cfg.T = T;
    cfg.h = h;
    cfg.family = &family;
    cfg.s = calibrate_s(family, 0.5);
  }

  FrequencyTrace run(const Potential& a, double dt,
                     double (*u0)(double, double) = nullptr) {
    Field init = u0 ? sample(mesh, u0)
                    : sample(mesh, [](double x, double) { return std::cos(M_PI * x) + 1.2; });
    sol = solve(mesh, a, init, cfg.T, dt);
    return build_trace(sol, cfg);
  }

  HeatSolution sol;
};

} // namespace

TEST_CASE("trace construction: definitions are consistent") {
  Lab lab(201);
  FrequencyTrace tr = lab.run(zero_potential(), 2e-3);
  REQUIRE(tr.size() == lab.sol.snapshot_count());
  for (int k = 0; k < tr.size(); ++k) {
    CHECK(tr.y[k] > 0.0);
    if (k > 0) CHECK(tr.times[k] > tr.times[k - 1]);
  }
  // N y = <Sf,f> by construction: recompute at a few snapshots
  for (int k : {1, tr.size() / 2, tr.size() - 2}) {
    StackedField f = stack(lab.sol.fields[k], tr.times[k], lab.cfg);
    double sff = 0.0;
    for (int i = 0; i < f.members(); ++i)
      sff += inner_product(apply_S(f.f[i], i, tr.times[k], lab.cfg), f.f[i]);
    CHECK(tr.N[k] * tr.y[k] == doctest::Approx(sff).epsilon(1e-12));
  }
}

TEST_CASE("zero solution is rejected") {
  Lab lab(101);
  HeatSolution sol = solve(lab.mesh, zero_potential(), Field(lab.mesh), 0.4, 4e-3);
  CHECK_THROWS_AS(build_trace(sol, lab.cfg), std::runtime_error);
}

TEST_CASE("energy identity residual vanishes under refinement") {
  double prev = 0.0;
  int level = 0;
  for (auto [n, dt] : {std::pair{101, 8e-3}, {201, 2e-3}, {401, 5e-4}}) {
    Lab lab(n);
    FrequencyTrace tr = lab.run(zero_potential(), dt);
    double worst = 0.0;
    for (int k = 1; k + 1 < tr.size(); ++k)
      worst = std::max(worst, std::abs(tr.energy_residuals[k]));
    if (level > 0) CHECK(prev / worst >= 8.0); // order >= 1.5 per dx-halving level
    prev = worst;
    ++level;
  }
}

TEST_CASE("frequency stays nonnegative for calibrated s across potentials") {
  Lab lab(201);
  auto sweep = [&](const Potential& a) {
    FrequencyTrace tr = lab.run(a, 2e-3);
    double mn = 1e300;
    for (int k = 0; k < tr.size(); ++k) mn = std::min(mn, tr.N[k]);
    return mn;
  };
  CHECK(sweep(zero_potential()) >= -1e-8);
  CHECK(sweep(constant_potential(1.0)) >= -1e-8);
  Potential rough = make_potential(
      [](const Vec2& p, double) { return 4.0 * std::cos(2.0 * M_PI * p.x); }, 4.0, false);
  CHECK(sweep(rough) >= -1e-8);
}

TEST_CASE("N-prime inequality slack is nonnegative up to budget") {
  Lab lab(201);
  for (const Potential& a : {zero_potential(), constant_potential(1.0)}) {
    FrequencyTrace tr = lab.run(a, 2e-3);
    const double eps = std::pow(tr.dx, 1.5) + tr.dt * tr.dt;
    for (int k = 1; k + 1 < tr.size(); ++k) {
      const double scale = std::abs(tr.X[k]) / tr.y[k] + tr.a_sup * tr.a_sup + 1.0;
      CHECK(tr.Nprime_slacks[k] >= -10.0 * eps * scale);
    }
  }
}

TEST_CASE("full ODE system check") {
  SUBCASE("pure heat eigenfunction run satisfies both inequalities") {
    Lab lab(201);
    FrequencyTrace tr = lab.run(zero_potential(), 2e-3);
    OdeCheckReport rep = check_ode_system(tr, 0.5, 0.1);
    CHECK(rep.energy_ok);
    CHECK(rep.frequency_ok);
    CHECK(rep.F1 == 0.0);
    CHECK(rep.F2 == doctest::Approx(0.1 / 0.01)); // C / h^2
  }
  SUBCASE("constant initial data: N stays small, system holds") {
    Lab lab(201);
    FrequencyTrace tr = lab.run(zero_potential(), 2e-3,
                                [](double, double) { return 1.0; });
    OdeCheckReport rep = check_ode_system(tr, 0.5, 0.1);
    CHECK(rep.energy_ok);
    CHECK(rep.frequency_ok);
    // the stacked field keeps the weight gradient, so N ~ s/Gamma^2: order
    // one near t = T, but well below the C/h^2 = 10 scale of the second
    // inequality, and the trace is smooth
    for (int k = 1; k + 1 < tr.size(); ++k) {
      CHECK(std::abs(tr.N[k]) < 0.25 * rep.F2);
      CHECK(std::abs(tr.N[k] - tr.N[k - 1]) < 0.1);
    }
  }
  SUBCASE("injected violation is flagged at the right time") {
    Lab lab(201);
    FrequencyTrace tr = lab.run(zero_potential(), 2e-3);
    const int kbad = tr.size() / 2;
    tr.N[kbad + 1] += 1e4 * tr.dt; // forces N' to spike at kbad and dip at kbad+2
    OdeCheckReport rep = check_ode_system(tr, 0.5, 0.1);
    CHECK_FALSE(rep.frequency_ok);
    CHECK(std::abs(rep.frequency_worst_time - tr.times[kbad]) < 1.5 * tr.dt);
  }
}
