#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <heatobs/morse.hpp>

#include <cmath>

using namespace heatobs;

namespace {
const double PI = M_PI;
}

TEST_CASE("interval base weight: single nondegenerate max at the center") {
  Mesh m = build_mesh(1, 101);
  MorseFunction psi = base_morse(m);
  REQUIRE(psi.count() == 1);
  CHECK(psi.critical_points[0].x == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(psi.max_value == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(psi.hessian_signatures[0] == 1);
  // second difference of sin(pi x) at the top
  CHECK(psi.hessian_dets[0] == doctest::Approx(-PI * PI).epsilon(0.02));
  for (int n : m.boundary_nodes) CHECK(psi.field[n] == 0.0);
}

TEST_CASE("square base weight: single max at the center") {
  Mesh m = build_mesh(2, 33);
  MorseFunction psi = base_morse(m);
  REQUIRE(psi.count() == 1);
  CHECK(psi.critical_points[0].x == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(psi.critical_points[0].y == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(psi.max_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(psi.hessian_signatures[0] == 2);
  CHECK(psi.hessian_dets[0] == doctest::Approx(PI * PI * PI * PI).epsilon(0.05));
}

TEST_CASE("shape invariants are enforced") {
  Mesh m = build_mesh(1, 101);
  SUBCASE("nonzero boundary value") {
    Field f = sample(m, [](double x, double) { return std::sin(PI * x) + 0.5; });
    CHECK_THROWS_AS(analyze_morse(f), std::runtime_error);
  }
  SUBCASE("negative interior value") {
    Field f = sample(m, [](double x, double) { return std::sin(2.0 * PI * x); });
    for (int n : m.boundary_nodes) f[n] = 0.0;
    CHECK_THROWS_AS(analyze_morse(f), std::runtime_error);
  }
  SUBCASE("degenerate (sextic-flat) top") {
    Field f = sample(m, [](double x, double) {
      double t = 2.0 * x - 1.0;
      return 1.0 - t * t * t * t * t * t;
    });
    for (int n : m.boundary_nodes) f[n] = 0.0;
    CHECK_THROWS_AS(analyze_morse(f), std::runtime_error);
  }
}

TEST_CASE("multibump: two maxima, one minimum, distinct values") {
  Mesh m = build_mesh(1, 401);
  MorseFunction psi = base_morse_multibump(m, 2);
  REQUIRE(psi.count() == 3);
  CHECK(psi.critical_points[0].x == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(psi.critical_points[1].x == doctest::Approx(0.50).epsilon(1e-4));
  CHECK(psi.critical_points[2].x == doctest::Approx(0.75).epsilon(1e-4));
  CHECK(psi.hessian_signatures[0] == 1);
  CHECK(psi.hessian_signatures[1] == 0);
  CHECK(psi.hessian_signatures[2] == 1);
  CHECK(psi.critical_values[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(psi.critical_values[1] == doctest::Approx(0.30).epsilon(1e-7));
  CHECK(psi.critical_values[2] == doctest::Approx(0.92).epsilon(1e-7));
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      CHECK(std::abs(psi.critical_values[a] - psi.critical_values[b]) > 0.01);
  CHECK(psi.max_value == doctest::Approx(1.0).epsilon(1e-7));

  SUBCASE("tall bump can sit in the second slot") {
    MorseFunction q = base_morse_multibump(m, 2, 2);
    CHECK(q.critical_values[0] == doctest::Approx(0.92).epsilon(1e-7));
    CHECK(q.critical_values[2] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(q.argmax() == 2);
  }
}

TEST_CASE("multibump degenerate and error cases") {
  Mesh m = build_mesh(1, 401);
  SUBCASE("k=1 matches the base construction") {
    MorseFunction a = base_morse(m);
    MorseFunction b = base_morse_multibump(m, 1);
    for (int n = 0; n < m.node_count(); ++n)
      CHECK(std::abs(a.field[n] - b.field[n]) < 1e-6);
  }
  SUBCASE("too many bumps for the grid") {
    Mesh coarse = build_mesh(1, 50);
    CHECK_THROWS_AS(base_morse_multibump(coarse, 8), std::invalid_argument);
  }
  SUBCASE("k >= 1 required") {
    CHECK_THROWS_AS(base_morse_multibump(m, 0), std::invalid_argument);
  }
}

TEST_CASE("relocation on the interval moves the max where asked") {
  Mesh m = build_mesh(1, 201);
  MorseFunction psi = base_morse(m);
  MorseFunction moved = relocate_criticals(psi, {{0.3, 0.0}});
  REQUIRE(moved.count() == 1);
  CHECK(std::abs(moved.critical_points[0].x - 0.3) < 1e-3);
  CHECK(std::abs(moved.max_value - 1.0) < 1e-3);
  for (int n : m.boundary_nodes) CHECK(moved.field[n] == 0.0);
  // untouched far from the path support
  CHECK(moved.field[10] == psi.field[10]);
}

TEST_CASE("relocation to the existing critical point is the identity") {
  Mesh m = build_mesh(1, 201);
  MorseFunction psi = base_morse(m);
  MorseFunction same = relocate_criticals(psi, psi.critical_points);
  for (int n = 0; n < m.node_count(); ++n)
    CHECK(std::abs(same.field[n] - psi.field[n]) < 1e-9);
}

TEST_CASE("relocation on the square") {
  Mesh m = build_mesh(2, 65);
  MorseFunction psi = base_morse(m);
  MorseFunction moved = relocate_criticals(psi, {{0.3, 0.7}});
  REQUIRE(moved.count() == 1);
  CHECK(std::hypot(moved.critical_points[0].x - 0.3, moved.critical_points[0].y - 0.7) < 2e-3);
  CHECK(std::abs(moved.max_value - 1.0) < 1e-3);
  for (int n : m.boundary_nodes) CHECK(moved.field[n] == 0.0);
}

TEST_CASE("relocation rejects order-breaking or colliding layouts") {
  Mesh m = build_mesh(1, 401);
  MorseFunction psi = base_morse_multibump(m, 2);
  SUBCASE("order swap") {
    CHECK_THROWS_AS(relocate_criticals(psi, {{0.6, 0.0}, {0.5, 0.0}, {0.4, 0.0}}),
                    std::runtime_error);
  }
  SUBCASE("target in the boundary collar") {
    CHECK_THROWS_AS(relocate_criticals(psi, {{0.05, 0.0}, {0.5, 0.0}, {0.75, 0.0}}),
                    std::runtime_error);
  }
  SUBCASE("duplicate targets") {
    CHECK_THROWS_AS(relocate_criticals(psi, {{0.4, 0.0}, {0.4, 0.0}, {0.6, 0.0}}),
                    std::invalid_argument);
  }
}

TEST_CASE("observation region construction") {
  Mesh m = build_mesh(1, 101);
  ObservationRegion w = make_observation_region(m, {{{0.5, 0.0}, 0.2}});
  CHECK(w.contains({0.45, 0.0}));
  CHECK(!w.contains({0.1, 0.0}));
  CHECK(!w.nodes.empty());
  for (int n : w.nodes) CHECK(!m.is_boundary(n));
  CHECK_THROWS_AS(make_observation_region(m, {{{0.1, 0.0}, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(make_observation_region(m, {{{0.5005, 0.0}, 1e-4}}), std::invalid_argument);
}

TEST_CASE("single-member family: definitions and closed-form constants") {
  Mesh m = build_mesh(1, 401);
  MorseFunction psi = base_morse(m);
  ObservationRegion w = make_observation_region(m, {{{0.5, 0.0}, 0.2}});
  const double r = default_ball_radius(w, {psi.critical_points[0]});
  CHECK(r == doctest::Approx(0.1).epsilon(1e-12));
  WeightFamily fam = make_weight_family({psi}, w, r);

  // phi pairs at the center and the boundary
  const int mid = 200;
  CHECK(fam.phi1[0][mid] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fam.phi1[0][0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(fam.phi2[0][0] == doctest::Approx(-1.0).epsilon(1e-9));
  // phi1 + phi2 is constant, so normal derivatives cancel exactly
  Field s(m);
  for (int n = 0; n < m.node_count(); ++n) s[n] = fam.phi1[0][n] + fam.phi2[0][n];
  BoundaryField dn = normal_derivative(s);
  for (int q = 0; q < dn.size(); ++q) CHECK(std::abs(dn[q]) < 1e-10);

  // regions partition the node set; no second critical point, so C is empty
  CHECK(fam.region_C[0].empty());
  CHECK(fam.region_B[0].size() + fam.region_D[0].size() ==
        static_cast<size_t>(m.node_count()));

  const WeightConstants& c = fam.constants;
  CHECK(c.ok);
  CHECK(!c.c3_applicable);
  // closed forms for sin(pi x): the two ratio extrema and the collar/gap values
  CHECK(c.c1 == doctest::Approx(1.0 / (2.0 * PI * PI)).epsilon(0.01));
  CHECK(c.c2 == doctest::Approx(1.0 / (PI * PI)).epsilon(0.01));
  CHECK(c.c4 == doctest::Approx(1.0 / (PI * PI)).epsilon(0.01));
  CHECK(c.c6 == doctest::Approx(2.0 * std::sin(0.1 * PI)).epsilon(0.01));
  CHECK(c.mu == doctest::Approx(1.0 - std::sin(PI * (0.5 - r))).epsilon(0.01));
  // collar ratio (1+sin)/(pi^2 cos^2) peaks at the inner collar edge
  const double x5 = 0.1;
  const double c5_expected =
      (1.0 + std::sin(PI * x5)) / (PI * PI * std::cos(PI * x5) * std::cos(PI * x5));
  CHECK(c.c5 == doctest::Approx(c5_expected).epsilon(0.02));
}

TEST_CASE("family preconditions") {
  Mesh m = build_mesh(1, 201);
  MorseFunction psi = base_morse(m);
  ObservationRegion w = make_observation_region(m, {{{0.5, 0.0}, 0.2}});
  SUBCASE("critical point outside omega") {
    ObservationRegion off = make_observation_region(m, {{{0.25, 0.0}, 0.1}});
    CHECK_THROWS_AS(make_weight_family({psi}, off, 0.05), std::invalid_argument);
  }
  SUBCASE("ball leaves omega") {
    CHECK_THROWS_AS(make_weight_family({psi}, w, 0.3), std::invalid_argument);
  }
  SUBCASE("mismatched max values") {
    Field f = sample(m, [](double x, double) { return 0.9 * std::sin(PI * x); });
    for (int n : m.boundary_nodes) f[n] = 0.0;
    MorseFunction small = analyze_morse(f);
    CHECK_THROWS_AS(make_weight_family({psi, small}, w, 0.05), std::invalid_argument);
  }
}

TEST_CASE("three-member interval family: all constants positive node-wise") {
  Mesh m = build_mesh(1, 801);
  auto members = cyclic_family_1d(m, {0.25, 0.50, 0.75});
  REQUIRE(members.size() == 3);

  // each member's global max sits on its assigned point, shared height
  const double p[3] = {0.25, 0.50, 0.75};
  for (int i = 0; i < 3; ++i) {
    const int k = members[i].argmax();
    CHECK(std::abs(members[i].critical_points[k].x - p[i]) < 1e-3);
    CHECK(std::abs(members[i].max_value - 1.0) < 1e-3);
  }
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(members[i].max_value - members[0].max_value) < 1e-6);

  ObservationRegion w = make_observation_region(m, {{{0.5, 0.0}, 0.35}});
  WeightFamily fam = make_weight_family(members, w, 0.008);
  const WeightConstants& c = fam.constants;
  for (const auto& msg : c.failures) MESSAGE(msg);
  CHECK(c.ok);
  CHECK(c.c1 > 0.0);
  CHECK(c.c2 > 0.0);
  CHECK(c.c3_applicable);
  CHECK(c.c3 > 0.0);
  CHECK(c.c4 > 0.0);
  CHECK(c.c5 > 0.0);
  CHECK(c.c6 > 0.0);
  CHECK(c.mu > 0.0);

  // node-wise re-check of every inequality with the reported constants
  for (int i = 0; i < fam.d; ++i) {
    auto g = gradient(fam.phi1[i]);
    for (int n = 0; n < m.node_count(); ++n) {
      const double g2 = g[0][n] * g[0][n] + g[1][n] * g[1][n];
      CHECK(c.c1 * g2 <= std::abs(fam.phi1[i][n]) + 1e-12);
      CHECK(c.c4 * g2 <= std::abs(fam.phi2[i][n]) + 1e-12);
      if (fam.in_collar[n])
        CHECK(std::abs(fam.phi2[i][n]) <= c.c5 * g2 + 1e-12);
      else
        CHECK(fam.phi2[i][n] - fam.phi1[i][n] <= -c.c6 + 1e-12);
    }
    for (const auto& nodes : {fam.region_B[i], fam.region_D[i]})
      for (int n : nodes) {
        const double g2 = g[0][n] * g[0][n] + g[1][n] * g[1][n];
        if (g2 < 1e-10) continue;
        CHECK(std::abs(fam.phi1[i][n]) <= c.c2 * g2 + 1e-12);
      }
    // pairing inequality on each critical ball
    const auto& pairs = c.c3_pairs[i];
    const int imax = fam.psi[i].argmax();
    int slot = 0;
    for (int k = 0; k < fam.psi[i].count(); ++k) {
      if (k == imax) continue;
      const int j = pairs[slot++];
      REQUIRE(j >= 0);
      for (int n : fam.region_C[i]) {
        const double dist = std::abs(m.coords[n].x - fam.psi[i].critical_points[k].x);
        if (dist < fam.r)
          CHECK(fam.phi1[i][n] - fam.phi1[j][n] <= -c.c3 + 1e-12);
      }
    }
  }
}
