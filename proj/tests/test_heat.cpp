#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "heatobs/heat.hpp"
#include "heatobs/mesh.hpp"

using namespace heatobs;

namespace {

// cos(k pi x) is an exact eigenvector of the ghost-reflection laplacian, so
// the semi-discrete decay rate is known in closed form.
double discrete_rate(double dx, int k) {
  return -2.0 * (1.0 - std::cos(k * M_PI * dx)) / (dx * dx);
}

} // namespace

TEST_CASE("Neumann equilibrium: constants are stationary") {
  Mesh m = build_mesh(1, 101);
  HeatSolution sol = solve(m, zero_potential(), sample(m, [](double, double) { return 1.0; }),
                           0.05, 1e-3);
  for (const Field& u : sol.fields)
    for (int n = 0; n < m.node_count(); ++n) CHECK(std::abs(u[n] - 1.0) < 1e-10);
}

TEST_CASE("eigenfunction decay matches the closed form") {
  Mesh m = build_mesh(1, 201);
  Field u0 = sample(m, [](double x, double) { return std::cos(M_PI * x); });
  HeatSolution sol = solve(m, zero_potential(), u0, 0.1, 1e-4);
  const double amp = std::exp(-M_PI * M_PI * 0.1); // ~0.37271
  const Field& uT = sol.fields.back();
  for (int n = 0; n < m.node_count(); n += 10)
    CHECK(std::abs(uT[n] - amp * u0[n]) < 5e-4 * amp);
}

TEST_CASE("constant potential rescales the heat solution") {
  Mesh m = build_mesh(1, 201);
  Field u0 = sample(m, [](double x, double) { return std::cos(M_PI * x); });
  HeatSolution free_sol = solve(m, zero_potential(), u0, 0.1, 1e-4);
  HeatSolution grow_sol = solve(m, constant_potential(-1.0), u0, 0.1, 1e-4);
  const double factor = std::exp(0.1);
  const Field& uf = free_sol.fields.back();
  const Field& ug = grow_sol.fields.back();
  for (int n = 0; n < m.node_count(); n += 10)
    CHECK(ug[n] == doctest::Approx(factor * uf[n]).epsilon(5e-4));
}

TEST_CASE("growth check holds on the corpus") {
  Mesh m = build_mesh(1, 201);
  Field u0 = sample(m, [](double x, double) { return std::cos(M_PI * x) + 0.5; });

  SUBCASE("free flow contracts") {
    HeatSolution sol = solve(m, zero_potential(), u0, 0.1, 1e-3);
    CHECK(growth_check(sol, 0.0, 0.1) <= 0.0);
    CHECK(growth_check(sol, 0.02, 0.07) <= 0.0);
  }
  SUBCASE("constant negative potential saturates the bound") {
    Field c = sample(m, [](double, double) { return 1.0; });
    HeatSolution sol = solve(m, constant_potential(-1.0), c, 0.1, 1e-4);
    CHECK(std::abs(growth_check(sol, 0.0, 0.1)) < 1e-6);
    CHECK(std::abs(growth_check(sol, 0.03, 0.08)) < 1e-6);
  }
  SUBCASE("oscillating potential stays below the sup-norm bound") {
    Potential a = make_potential(
        [](const Vec2& p, double) { return 2.0 * std::sin(3.0 * M_PI * p.x); }, 2.0, false);
    HeatSolution sol = solve(m, a, u0, 0.1, 1e-3);
    for (auto [t1, t2] : {std::pair{0.0, 0.1}, {0.0, 0.05}, {0.04, 0.09}})
      CHECK(growth_check(sol, t1, t2) <= 1e-6);
  }
}

TEST_CASE("free energy is nonincreasing along the whole trajectory") {
  Mesh m = build_mesh(1, 101);
  Field u0 = sample(m, [](double x, double) { return std::exp(-40.0 * (x - 0.3) * (x - 0.3)); });
  HeatSolution sol = solve(m, zero_potential(), u0, 0.2, 1e-3);
  for (int k = 1; k < sol.snapshot_count(); ++k)
    CHECK(l2_norm(sol.fields[k]) <= l2_norm(sol.fields[k - 1]) + 1e-12);
}

TEST_CASE("time-stepping order against the semi-discrete solution") {
  Mesh m = build_mesh(1, 201);
  Field u0 = sample(m, [](double x, double) { return std::cos(M_PI * x); });
  const double T = 0.1;
  const double exact_amp = std::exp(discrete_rate(m.dx, 1) * T);

  auto amp_error = [&](double dt, TimeScheme sc) {
    HeatSolution sol = solve(m, zero_potential(), u0, T, dt, sc);
    return std::abs(sol.fields.back()[0] - exact_amp);
  };

  SUBCASE("Crank-Nicolson is at least order 1.8") {
    const double dts[] = {4e-3, 2e-3, 1e-3, 5e-4};
    double prev = amp_error(dts[0], TimeScheme::crank_nicolson);
    for (int k = 1; k < 4; ++k) {
      const double cur = amp_error(dts[k], TimeScheme::crank_nicolson);
      CHECK(std::log2(prev / cur) >= 1.8);
      prev = cur;
    }
  }
  SUBCASE("implicit Euler converges at first order") {
    const double e1 = amp_error(4e-3, TimeScheme::implicit_euler);
    const double e2 = amp_error(1e-3, TimeScheme::implicit_euler);
    CHECK(e2 < e1);
    CHECK(std::log(e1 / e2) / std::log(4.0) > 0.8);
  }
}

TEST_CASE("2D eigenfunction decay and mass conservation") {
  Mesh m = build_mesh(2, 33);
  Field u0 = sample(m, [](double x, double y) { return std::cos(M_PI * x) * std::cos(M_PI * y); });
  HeatSolution sol = solve(m, zero_potential(), u0, 0.05, 5e-4);
  const double amp = std::exp(2.0 * discrete_rate(m.dx, 1) * 0.05);
  const Field& uT = sol.fields.back();
  for (int n = 0; n < m.node_count(); n += 37)
    CHECK(std::abs(uT[n] - amp * u0[n]) < 1e-3 * amp);

  Field ones = sample(m, [](double, double) { return 1.0; });
  HeatSolution flat = solve(m, zero_potential(), ones, 0.02, 1e-3);
  for (int n = 0; n < m.node_count(); ++n)
    CHECK(std::abs(flat.fields.back()[n] - 1.0) < 1e-10);
}

TEST_CASE("solution operator basics") {
  Mesh m = build_mesh(1, 65);

  SUBCASE("t = 0 is the identity") {
    SolutionOperator op = build_solution_operator(m, zero_potential(), 0.0, 1e-3);
    for (int j = 0; j < m.node_count(); ++j)
      for (int i = 0; i < m.node_count(); ++i)
        CHECK(op.columns[j][i] == (i == j ? 1.0 : 0.0));
  }
  SUBCASE("constants are reproduced (mass conservation)") {
    SolutionOperator op = build_solution_operator(m, zero_potential(), 0.05, 1e-3);
    Field out = op.apply(sample(m, [](double, double) { return 1.0; }));
    for (int n = 0; n < m.node_count(); ++n) CHECK(std::abs(out[n] - 1.0) < 1e-8);
  }
  SUBCASE("long-time limit is the mean") {
    SolutionOperator op = build_solution_operator(m, zero_potential(), 2.0, 5e-3);
    Field u0 = sample(m, [](double x, double) { return x * x + 0.25 * std::sin(5.0 * x); });
    double mean = 0.0, vol = 0.0;
    for (int n = 0; n < m.node_count(); ++n) {
      mean += m.volume_weights[n] * u0[n];
      vol += m.volume_weights[n];
    }
    mean /= vol;
    Field out = op.apply(u0);
    Field diff(m);
    for (int n = 0; n < m.node_count(); ++n) diff[n] = out[n] - mean;
    CHECK(l2_norm(diff) <= 1e-3);
  }
  SUBCASE("semigroup composition") {
    Potential a = constant_potential(-0.5);
    SolutionOperator e1 = build_solution_operator(m, a, 0.02, 1e-3);
    SolutionOperator e2 = build_solution_operator(m, a, 0.04, 1e-3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Field u0(m);
    for (int n = 0; n < m.node_count(); ++n) u0[n] = U(rng);
    Field once = e2.apply(u0);
    Field twice = e1.apply(e1.apply(u0));
    for (int n = 0; n < m.node_count(); ++n)
      CHECK(std::abs(once[n] - twice[n]) < 1e-6);
  }
  SUBCASE("dense scale guard") {
    Mesh big = build_mesh(2, 65); // 4225 nodes
    CHECK_THROWS_AS(build_solution_operator(big, zero_potential(), 0.01, 1e-3),
                    std::invalid_argument);
  }
}

TEST_CASE("input validation") {
  Mesh m = build_mesh(1, 65);
  Field u0 = sample(m, [](double x, double) { return x; });
  CHECK_THROWS_AS(solve(m, zero_potential(), u0, 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve(m, zero_potential(), u0, 1e-4, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(solve(m, zero_potential(), u0, 0.1, 3e-4), std::invalid_argument);
  HeatSolution sol = solve(m, zero_potential(), u0, 0.1, 1e-3);
  CHECK_THROWS_AS(sol.snapshot_at(0.10251), std::invalid_argument);
  CHECK(sol.snapshot_at(0.0) == 0);
  CHECK(sol.snapshot_at(0.1) == sol.snapshot_count() - 1);
  CHECK_THROWS_AS(growth_check(sol, 0.05, 0.02), std::invalid_argument);
}
