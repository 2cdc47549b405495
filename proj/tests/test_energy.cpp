#include <doctest.h>

#include <cmath>

#include "fblab/elliptic.hpp"
#include "fblab/energy.hpp"
#include "fblab/fixtures.hpp"
#include "fblab/lattice.hpp"
#include "oracles.hpp"

using namespace fblab;

namespace {

Grid square_grid(double h) { return make_grid({{-1.0, 1.0}, {-1.0, 1.0}}, h); }

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("bernoulli energy on reference fields") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  Ball b = unit_ball();

  GridFunction half = sample(g, FieldRole::Nonnegative,
                             [](const Vec& x) { return std::max(x[1], 0.0); });
  EnergyReport r = bernoulli_energy(half, b);
  CHECK(std::abs(r.total - oracle::kEnergyHalfPlaneB1) < 20 * h);
  CHECK(r.total == r.dirichlet + r.positivity);
  CHECK(std::abs(r.dirichlet - oracle::kHalfDiscArea) < 10 * h);
  CHECK(std::abs(r.positivity - oracle::kHalfDiscArea) < 10 * h);

  GridFunction zero = make_constant(g, FieldRole::Nonnegative, 0.0);
  EnergyReport rz = bernoulli_energy(zero, b);
  CHECK(rz.total == 0.0);

  GridFunction steep = sample(g, FieldRole::Signed, [](const Vec& x) { return 2.0 * x[0]; });
  EnergyReport rs = bernoulli_energy(steep, b);
  CHECK(std::abs(rs.total - oracle::energy_linear_b1(2.0)) < 20 * h);
}

TEST_CASE("zero set measure on reference fields") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  Ball b = unit_ball();

  GridFunction half = sample(g, FieldRole::Nonnegative,
                             [](const Vec& x) { return std::max(x[1], 0.0); });
  CHECK(std::abs(zero_set_measure(half, b) - oracle::kHalfDiscArea) < 10 * h);

  GridFunction pos = sample(g, FieldRole::Nonnegative,
                            [](const Vec& x) { return 1.0 + x[0] * x[0]; });
  CHECK(zero_set_measure(pos, b) == 0.0);

  GridFunction zero = make_constant(g, FieldRole::Nonnegative, 0.0);
  CHECK(std::abs(zero_set_measure(zero, b) - oracle::kPi) < 10 * h);

  FixtureSpec wedge_spec = wedge(0.5, vec2(0.0, 1.0));
  GridFunction w = make_fixture(wedge_spec, g);
  // The wedge is a scaled half plane; its zero set is still the lower half disc.
  CHECK(std::abs(zero_set_measure(w, b) - oracle::kHalfDiscArea) < 10 * h);
}

TEST_CASE("rescale preserves shared lattice nodes bit-exactly") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction half = sample(g, FieldRole::Nonnegative,
                             [](const Vec& x) { return std::max(x[1], 0.0); });
  GridFunction small = rescale(half, 0.5, vec2(0.0, 0.0));
  CHECK(small.grid.h == h);
  // Target nodes with even index map onto source nodes; those values must
  // come back bit-exact (odd indices read interpolated midpoints).
  bool all_match = true;
  for_nodes_in_ball(small.grid, unit_ball(), [&](int i, int j, int k) {
    Vec y = small.grid.node(i, j, k);
    Vec src{0.5 * y[0], 0.5 * y[1], 0.0};
    auto nn = g.nearest_node(src);
    Vec snapped = g.node(nn[0], nn[1]);
    if (std::abs(snapped[0] - src[0]) > 1e-13 || std::abs(snapped[1] - src[1]) > 1e-13) {
      return;
    }
    double expect = half.at(nn[0], nn[1]) / 0.5;
    if (small.at(i, j, k) != expect) all_match = false;
    (void)k;
  });
  CHECK(all_match);

  GridFunction same = rescale(half, 1.0, vec2(0.0, 0.0));
  CHECK(same.values == half.values);

  GridFunction quad = sample(g, FieldRole::Nonnegative,
                             [](const Vec& x) { return x[0] * x[0] + x[1] * x[1]; });
  GridFunction qs = rescale(quad, 0.5, vec2(0.0, 0.0));
  auto c = qs.grid.nearest_node(vec2(0.5, 0.0));
  // (|0.5 x|^2)/0.5 = 0.5 |x|^2.
  CHECK(std::abs(qs.at(c[0], c[1]) - 0.5 * 0.25) < 1e-12);
}

TEST_CASE("rescale energy bookkeeping round trip") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction half = sample(g, FieldRole::Nonnegative,
                             [](const Vec& x) { return std::max(x[1], 0.0); });
  double rho = 0.5;
  GridFunction small = rescale(half, rho, vec2(0.0, 0.0));
  EnergyReport inner = bernoulli_energy(half, Ball{{0.0, 0.0, 0.0}, rho});
  EnergyReport outer = bernoulli_energy(small, unit_ball());
  // J(u_rho, B_1) = rho^-n J(u, B_rho) for the exact functional; the grids
  // disagree only through which cells the two balls admit.
  double discrepancy = std::abs(outer.total - inner.total / (rho * rho));
  MESSAGE("rescale round-trip discrepancy = ", discrepancy);
  CHECK(discrepancy < 30 * h);
}

TEST_CASE("rescale validation") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_constant(g, FieldRole::Nonnegative, 1.0);
  CHECK_THROWS_AS(rescale(u, 0.5, vec2(0.9, 0.0)), ValidationError);
  CHECK_THROWS_AS(rescale(u, 0.05, vec2(0.0, 0.0)), ValidationError);
  CHECK_THROWS_AS(rescale(u, -1.0, vec2(0.0, 0.0)), ValidationError);
}

TEST_CASE("almost minimality parameter validation and rescaling") {
  AlmostMinParams mult = AlmostMinParams::multiplicative(0.4, 0.5);
  AlmostMinParams small = mult.rescaled(0.25, 2);
  CHECK(small.kappa == doctest::Approx(0.4 * 0.5).epsilon(1e-12));
  CHECK(small.beta == 0.5);

  AlmostMinParams add = AlmostMinParams::additive(0.001);
  AlmostMinParams add_half = add.rescaled(0.5, 2);
  CHECK(add_half.sigma == doctest::Approx(0.004).epsilon(1e-12));

  CHECK_THROWS_AS(AlmostMinParams::multiplicative(-0.1, 0.5), ValidationError);
  CHECK_THROWS_AS(AlmostMinParams::multiplicative(0.1, 1.5), ValidationError);
  CHECK_THROWS_AS(AlmostMinParams::multiplicative(0.1, 0.0), ValidationError);
  CHECK_THROWS_AS(AlmostMinParams::additive(-1.0), ValidationError);
}

TEST_CASE("audit accepts the harmonic replacement of itself") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  Ball b{{0.0, 0.0, 0.0}, 0.8};
  GridFunction u = sample(g, FieldRole::Nonnegative,
                          [](const Vec& x) { return 2.0 + 0.3 * x[0]; });
  EllipticResult rep = harmonic_replacement(u, b);
  std::vector<Competitor> suite;
  suite.push_back({"replacement", rep.v});
  AuditReport r = audit_almost_minimality(u, b, AlmostMinParams::additive(0.0), suite);
  CHECK_FALSE(r.falsified);
  CHECK(r.verdict == "not falsified by suite");
  CHECK(r.worst_gap <= r.slack);
  CHECK(r.energies.size() == 1);
}

TEST_CASE("audit does not falsify the half plane solution") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  Ball b{{0.0, 0.0, 0.0}, 0.8};
  GridFunction u = sample(g, FieldRole::Nonnegative,
                          [](const Vec& x) { return std::max(x[1], 0.0); });
  std::vector<Competitor> suite;
  EllipticResult rep = harmonic_replacement(u, b);
  suite.push_back({"replacement", rep.v});
  GridFunction trunc = u;
  for (std::size_t id : free_nodes_in_ball(g, b)) {
    trunc.values[id] = std::max(u.values[id] - 2 * h, 0.0);
  }
  // Truncation must agree on the ring: subtract only where the cutoff vanishes.
  // Simpler: blend back to u near the ring via the free-node mask above, which
  // already leaves ring nodes untouched.
  suite.push_back({"truncate", trunc});
  AuditReport r = audit_almost_minimality(u, b, AlmostMinParams::multiplicative(0.0, 0.5), suite);
  CHECK_FALSE(r.falsified);
  CHECK(r.worst_ratio <= r.threshold + r.slack);
}

TEST_CASE("audit flags a ring disagreement") {
  Grid g = square_grid(1.0 / 32);
  Ball b{{0.0, 0.0, 0.0}, 0.8};
  GridFunction u = make_constant(g, FieldRole::Nonnegative, 1.0);
  GridFunction bad = make_constant(g, FieldRole::Nonnegative, 2.0);
  std::vector<Competitor> suite{{"shifted", bad}};
  CHECK_THROWS_AS(audit_almost_minimality(u, b, AlmostMinParams::additive(0.0), suite),
                  ValidationError);
}

TEST_CASE("audit falsifies an inflated field against its replacement") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  Ball b{{0.0, 0.0, 0.0}, 0.8};
  // Large interior oscillation with harmonic competitor available.
  GridFunction u = sample(g, FieldRole::Nonnegative, [](const Vec& x) {
    return 2.0 + std::sin(8.0 * x[0]) * std::sin(8.0 * x[1]);
  });
  EllipticResult rep = harmonic_replacement(u, b);
  std::vector<Competitor> suite{{"replacement", rep.v}};
  AuditReport r = audit_almost_minimality(u, b, AlmostMinParams::additive(0.0), suite);
  CHECK(r.falsified);
  CHECK(r.verdict == "falsified");
  CHECK(r.violating_competitor == "replacement");
  CHECK(r.worst_gap > r.slack);
}

TEST_CASE("fixture point values are exact") {
  Grid g = square_grid(1.0 / 32);
  FixtureSpec ext = exterior_radial(vec2(0.0, 0.0), 0.25);
  GridFunction u = make_fixture(ext, g);
  auto n1 = g.nearest_node(vec2(0.5, 0.0));
  CHECK(u.at(n1[0], n1[1]) == doctest::Approx(0.25 * std::log(0.5 / 0.25)).epsilon(1e-14));
  auto n0 = g.nearest_node(vec2(0.125, 0.0));
  CHECK(u.at(n0[0], n0[1]) == 0.0);

  FixtureSpec hp = half_plane(vec2(0.0, 1.0));
  GridFunction uh = make_fixture(hp, g);
  auto np = g.nearest_node(vec2(0.25, 0.5));
  CHECK(uh.at(np[0], np[1]) == 0.5);
  auto nm = g.nearest_node(vec2(0.25, -0.5));
  CHECK(uh.at(nm[0], nm[1]) == 0.0);

  Vec nu{-std::sin(0.1), std::cos(0.1), 0.0};
  FixtureSpec tp = tilted_plane(nu, 1.0);
  GridFunction ut = make_fixture(tp, g);
  auto nt = g.nearest_node(vec2(0.5, 0.5));
  Vec pt = g.node(nt[0], nt[1]);
  double expect = std::max(nu[0] * pt[0] + nu[1] * pt[1], 0.0);
  CHECK(ut.at(nt[0], nt[1]) == doctest::Approx(expect).epsilon(1e-14));
}

}  // TEST_SUITE
