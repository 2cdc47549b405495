#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fblab/competitors.hpp"
#include "fblab/elliptic.hpp"
#include "fblab/energy.hpp"
#include "fblab/fixtures.hpp"
#include "fblab/lattice.hpp"
#include "fblab/solver.hpp"
#include "oracles.hpp"

using namespace fblab;

namespace {

Grid square_grid(double h) { return make_grid({{-1.0, 1.0}, {-1.0, 1.0}}, h); }

std::vector<std::string> names_of(const std::vector<Competitor>& suite) {
  std::vector<std::string> out;
  for (const auto& c : suite) out.push_back(c.name);
  return out;
}

const Competitor& member(const std::vector<Competitor>& suite, const std::string& name) {
  for (const auto& c : suite) {
    if (c.name == name) return c;
  }
  REQUIRE(false);
  return suite.front();
}

// Largest |v - u| over nodes outside the free set. Zero means the suite only
// ever edits interior degrees of freedom.
double non_free_deviation(const GridFunction& u, const GridFunction& v, const Ball& ball) {
  std::vector<char> is_free(u.grid.node_count(), 0);
  for (std::size_t p : free_nodes_in_ball(u.grid, ball)) is_free[p] = 1;
  double worst = 0.0;
  for (std::size_t p = 0; p < u.grid.node_count(); ++p) {
    if (is_free[p]) continue;
    worst = std::max(worst, std::abs(u.values[p] - v.values[p]));
  }
  return worst;
}

}  // namespace

TEST_SUITE("competitors") {

TEST_CASE("suite has the advertised members in a fixed order") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  std::vector<Competitor> suite = built_in_suite(u, unit_ball());
  std::vector<std::string> expect = {"harmonic", "trunc_0", "trunc_1", "trunc_2",
                                     "trunc_3",  "trunc_4", "trunc_5", "trunc_6",
                                     "trunc_7",  "cutoff",  "min_splice",
                                     "max_splice", "solver"};
  CHECK(names_of(suite) == expect);
}

TEST_CASE("every member agrees with u away from the free nodes") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(exterior_radial(vec2(0.2, 0.1), 0.3), g);
  Ball b = unit_ball();
  for (const auto& c : built_in_suite(u, b)) {
    CAPTURE(c.name);
    CHECK(non_free_deviation(u, c.v, b) == 0.0);
  }
}

TEST_CASE("the audit consumes the suite and reports one row per member") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  std::vector<Competitor> suite = built_in_suite(u, unit_ball());
  AuditReport rep =
      audit_almost_minimality(u, unit_ball(), AlmostMinParams::multiplicative(0.0, 1.0), suite);
  CHECK(rep.energies.size() == suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    CHECK(rep.energies[i].name == suite[i].name);
  }
}

TEST_CASE("two runs produce byte-identical reports") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  AlmostMinParams p = AlmostMinParams::multiplicative(0.0, 1.0);
  AuditReport a = audit_almost_minimality(u, unit_ball(), p, built_in_suite(u, unit_ball()));
  AuditReport b = audit_almost_minimality(u, unit_ball(), p, built_in_suite(u, unit_ball()));
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("the exact half plane is not falsified") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  AuditReport rep = audit_almost_minimality(
      u, unit_ball(), AlmostMinParams::multiplicative(0.0, 1.0), built_in_suite(u, unit_ball()));
  CHECK_FALSE(rep.falsified);
  CHECK(rep.verdict == "not falsified by suite");
  CHECK(rep.worst_gap <= rep.slack);
}

TEST_CASE("a discretely harmonic positive field ties its replacement exactly") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = sample(g, FieldRole::Nonnegative,
                          [](const Vec& x) { return 2.0 + 0.5 * x[1]; });
  std::vector<Competitor> suite = built_in_suite(u, unit_ball());
  AuditReport rep = audit_almost_minimality(
      u, unit_ball(), AlmostMinParams::multiplicative(0.0, 1.0), suite);
  CHECK_FALSE(rep.falsified);
  // The linear field is discretely harmonic, so replacement returns it
  // bit-exactly and the corresponding gap vanishes.
  double dev = 0.0;
  const GridFunction& harm = member(suite, "harmonic").v;
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    dev = std::max(dev, std::abs(harm.values[p] - u.values[p]));
  }
  CHECK(dev == 0.0);
  for (const auto& row : rep.energies) {
    if (row.name == "harmonic") CHECK(std::abs(row.gap) <= 1e-12);
  }
}

TEST_CASE("steep planes are falsified at fine resolution") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(wedge(1.5, vec2(0.0, 1.0)), g);
  AuditReport rep = audit_almost_minimality(
      u, unit_ball(), AlmostMinParams::multiplicative(0.0, 1.0), built_in_suite(u, unit_ball()));
  CHECK(rep.falsified);
  CHECK(rep.worst_gap > 0.05);
  CHECK_FALSE(rep.violating_competitor.empty());
}

TEST_CASE("shallow wedges are falsified at fine resolution") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(wedge(0.5, vec2(0.0, 1.0)), g);
  AuditReport rep = audit_almost_minimality(
      u, unit_ball(), AlmostMinParams::multiplicative(0.0, 1.0), built_in_suite(u, unit_ball()));
  CHECK(rep.falsified);
  CHECK(rep.worst_gap > 0.05);
}

TEST_CASE("generated almost minimizers survive the audit at relaxed parameters") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction bd = sample(g, FieldRole::Nonnegative,
                           [](const Vec& x) { return std::max(x[1], 0.0); });
  CoefficientField coef;
  coef.a = [](const Vec& x) { return 1.0 + 0.025 * (1.0 + x[0]); };
  coef.q = [](const Vec& x) { return 1.0 + 0.025 * (1.0 + x[1]); };
  coef.kappa = 0.4;
  coef.beta = 1.0;
  SolveResult r = generate_almost_minimizer(coef, bd, unit_ball(), SolverConfig{});
  AuditReport rep = audit_almost_minimality(
      r.u, unit_ball(), AlmostMinParams::multiplicative(4.0 * coef.kappa, coef.beta),
      built_in_suite(r.u, unit_ball()));
  CHECK_FALSE(rep.falsified);
}

TEST_CASE("signed fields drop the solver member") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = sample(g, FieldRole::Signed, [](const Vec& x) { return x[0]; });
  std::vector<std::string> names = names_of(built_in_suite(u, unit_ball()));
  CHECK(std::find(names.begin(), names.end(), "solver") == names.end());
  CHECK(std::find(names.begin(), names.end(), "harmonic") != names.end());
}

TEST_CASE("options shape the suite") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  SuiteOptions opt;
  opt.truncation_levels = 3;
  opt.include_solver = false;
  std::vector<std::string> names = names_of(built_in_suite(u, unit_ball(), opt));
  std::vector<std::string> expect = {"harmonic", "trunc_0", "trunc_1", "trunc_2",
                                     "cutoff", "min_splice", "max_splice"};
  CHECK(names == expect);
}

TEST_CASE("degenerate data produces no truncations") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_constant(g, FieldRole::Nonnegative, 0.0);
  for (const std::string& name : names_of(built_in_suite(u, unit_ball()))) {
    CHECK(name.rfind("trunc_", 0) != 0);
  }
}

TEST_CASE("cutoff digs the quarter ball dry and leaves the outer half alone") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_constant(g, FieldRole::Nonnegative, 2.0);
  Ball b = unit_ball();
  const GridFunction& v = member(built_in_suite(u, b), "cutoff").v;
  double inner_max = 0.0;
  double outer_dev = 0.0;
  for_nodes_in_ball(g, b, [&](int i, int j, int k) {
    double d = dist(g.node(i, j, k), b.center, g.dim);
    if (d <= 0.25 * b.radius) inner_max = std::max(inner_max, v.at(i, j, k));
    if (d >= 0.5 * b.radius) outer_dev = std::max(outer_dev, std::abs(v.at(i, j, k) - 2.0));
  });
  CHECK(inner_max == 0.0);
  CHECK(outer_dev == 0.0);
}

TEST_CASE("splices and truncations respect their one-sided bounds") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(exterior_radial(vec2(0.0, 0.0), 0.3), g);
  std::vector<Competitor> suite = built_in_suite(u, unit_ball());
  const GridFunction& vmin = member(suite, "min_splice").v;
  const GridFunction& vmax = member(suite, "max_splice").v;
  const GridFunction& tr = member(suite, "trunc_7").v;
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    CHECK(vmin.values[p] <= u.values[p] + 1e-15);
    CHECK(vmax.values[p] >= u.values[p] - 1e-15);
    CHECK(tr.values[p] <= u.values[p] + 1e-15);
    CHECK(tr.values[p] >= 0.0);
  }
}

}  // TEST_SUITE
