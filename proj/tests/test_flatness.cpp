#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fblab/fixtures.hpp"
#include "fblab/flatness.hpp"
#include "fblab/lattice.hpp"
#include "fblab/solver.hpp"

using namespace fblab;

namespace {

Grid square_grid(double h) { return make_grid({{-1.0, 1.0}, {-1.0, 1.0}}, h); }
Grid cube_grid(double h) { return make_grid({{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}}, h); }

Vec dir2(double theta) { return vec2(std::sin(theta), std::cos(theta)); }

// Computed minimizer with tilted flat boundary data, shared across the
// certificate-decay and free-boundary-fit cases.
const GridFunction& tilted_minimizer_128() {
  static const SolveResult res = [] {
    Grid g = square_grid(1.0 / 128);
    GridFunction bd = make_fixture(half_plane(dir2(0.1)), g);
    return minimize_bernoulli(bd, unit_ball(), SolverConfig{});
  }();
  return res.u;
}

}  // namespace

TEST_SUITE("flatness") {

TEST_CASE("flatness of an exact half-plane profile is zero") {
  Grid g = square_grid(1.0 / 64);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  CHECK(flatness(u, unit_ball(), vec2(0.0, 1.0)) == 0.0);
  FlatnessCertificate cert = best_direction(u, unit_ball());
  CHECK(cert.epsilon <= 1e-10);
  CHECK(dot(cert.nu, vec2(0.0, 1.0), 2) >= 1.0 - 1e-8);
  CHECK(cert.r == 1.0);
}

TEST_CASE("tilted profile measured against the vertical axis gives the closed-form sup") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  double theta = 0.1;
  GridFunction u = make_fixture(half_plane(dir2(theta)), g);
  double eps = flatness(u, unit_ball(), vec2(0.0, 1.0));
  CHECK(std::abs(eps - std::sin(theta)) <= 10.0 * h);
  FlatnessCertificate cert = best_direction(u, unit_ball());
  CHECK(cert.epsilon <= 1e-5);
  CHECK(dot(cert.nu, dir2(theta), 2) >= 1.0 - 1e-7);
}

TEST_CASE("the zero field is distance one from every half-plane profile") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction u = make_constant(g, FieldRole::Nonnegative, 0.0);
  CHECK(flatness(u, unit_ball(), vec2(0.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  FlatnessCertificate cert = best_direction(u, unit_ball());
  CHECK(std::abs(cert.epsilon - 1.0) <= 10.0 * h);
}

TEST_CASE("flatness is rotation-equivariant") {
  double h = 1.0 / 96;
  Grid g = square_grid(h);
  for (double theta : {0.3, 0.7, 1.1}) {
    GridFunction u = make_fixture(half_plane(dir2(theta)), g);
    CHECK(flatness(u, unit_ball(), dir2(theta)) == 0.0);
    double vs_vertical = flatness(u, unit_ball(), vec2(0.0, 1.0));
    CHECK(std::abs(vs_vertical - std::sin(theta)) <= 10.0 * h);
    FlatnessCertificate cert = best_direction(u, unit_ball());
    CHECK(cert.epsilon <= 10.0 * h);
    CHECK(dot(cert.nu, dir2(theta), 2) >= 1.0 - 1e-7);
  }
}

TEST_CASE("flatness rejects non-unit directions and balls leaving the grid") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  CHECK_THROWS_AS(flatness(u, unit_ball(), vec2(0.0, 2.0)), ValidationError);
  CHECK_THROWS_AS(flatness(u, Ball{{0.5, 0.0, 0.0}, 1.0}, vec2(0.0, 1.0)), ValidationError);
}

TEST_CASE("certificate serializes to json") {
  Grid g = square_grid(1.0 / 32);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FlatnessCertificate cert = best_direction(u, Ball{{0.0, 0.0, 0.0}, 0.5});
  nlohmann::json j = nlohmann::json::parse(cert.to_json());
  CHECK(j["r"].get<double>() == 0.5);
  CHECK(j["nu"].size() == 3);
  CHECK(j["epsilon"].get<double>() == cert.epsilon);
}

TEST_CASE("epsilon rescale of the exact profile vanishes on its positivity set") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  ScaledField sf = epsilon_rescale(u, 0.1, vec2(0.0, 1.0));
  std::size_t defined = 0;
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      Vec y = g.node(i, j);
      std::size_t id = g.index(i, j);
      if (sf.defined[id]) {
        ++defined;
        CHECK(sf.v.values[id] == 0.0);
      }
      if (norm(y, 2) <= 1.0 && y[1] >= h - 1e-12) {
        CHECK(sf.defined[id] == 1);
      }
    }
  }
  CHECK(defined > 1000);
}

TEST_CASE("epsilon rescale recovers a smooth bump by direct substitution") {
  double h = 1.0 / 64;
  double eps = 0.1;
  Grid g = square_grid(h);
  auto bump = [](const Vec& x) { return x[0] * x[0] - x[1] * x[1]; };
  GridFunction u = sample(g, FieldRole::Nonnegative, [&](const Vec& x) {
    return std::max(0.0, x[1] + 0.1 * bump(x));
  });
  ScaledField sf = epsilon_rescale(u, eps, vec2(0.0, 1.0));
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      Vec y = g.node(i, j);
      std::size_t id = g.index(i, j);
      if (!sf.defined[id]) continue;
      CHECK(std::abs(sf.v.values[id]) <= 1.0 + 10.0 * h / eps);
      if (y[1] > eps) {
        CHECK(sf.v.values[id] == doctest::Approx(bump(y)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("epsilon rescale refuses scales at or below the mesh") {
  Grid g = square_grid(1.0 / 64);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  CHECK_THROWS_AS(epsilon_rescale(u, g.h, vec2(0.0, 1.0)), ValidationError);
  CHECK_THROWS_AS(epsilon_rescale(u, 0.0, vec2(0.0, 1.0)), ValidationError);
}

TEST_CASE("linearization residual of the exact profile is numerically zero") {
  double h = 1.0 / 128;
  double eps = 0.05;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  double res = linearization_residual(u, eps, vec2(0.0, 1.0));
  CHECK(res <= 10.0 * h / eps);
  CHECK(res <= 1e-9);
}

TEST_CASE("a harmonic bump with the right bottom condition passes the linearized problem") {
  double h = 1.0 / 128;
  double eps = 0.1;
  Grid g = square_grid(h);
  GridFunction u = sample(g, FieldRole::Nonnegative, [&](const Vec& x) {
    return std::max(0.0, x[1] + eps * (x[0] * x[0] - x[1] * x[1]));
  });
  double res = linearization_residual(u, eps, vec2(0.0, 1.0));
  CHECK(res <= h / eps + eps);
  CHECK(res <= 1e-6);
}

TEST_CASE("a non-harmonic bump is detected by the linearization residual") {
  double h = 1.0 / 128;
  double eps = 0.1;
  Grid g = square_grid(h);
  GridFunction u = sample(g, FieldRole::Nonnegative, [&](const Vec& x) {
    return std::max(0.0, x[1] + eps * x[0] * x[0]);
  });
  double res = linearization_residual(u, eps, vec2(0.0, 1.0));
  CHECK(res >= 0.005);
}

TEST_CASE("computed minimizer with mildly tilted data stays close to the linearized solution") {
  double h = 1.0 / 256;
  double eps = 0.05;
  Grid g = square_grid(h);
  double theta = std::asin(0.035);
  GridFunction bd = make_fixture(half_plane(dir2(theta)), g);
  SolverConfig cfg;
  cfg.restarts = 2;   // the distance-profile seed converges; skip the zero seed
  cfg.eps_pen = h;    // sharp positivity: the smoothing width enters the rescaled field as eps_pen/eps
  SolveResult res = minimize_bernoulli(bd, unit_ball(), cfg);
  double lr = linearization_residual(res.u, eps, vec2(0.0, 1.0));
  CHECK(lr <= 0.2 * eps);
}

TEST_CASE("improvement step returns the certificate at the smaller scale") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FlatnessCertificate cert = improve_flatness(u, 0.1, 0.25, 0.125, 5e-7);
  CHECK(cert.r == 0.125);
  CHECK(cert.epsilon <= 1e-10);
  CHECK(dot(cert.nu, vec2(0.0, 1.0), 2) >= 1.0 - 1e-6);
}

TEST_CASE("improvement step gates its hypotheses") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  CHECK_THROWS_AS(improve_flatness(u, 0.1, 0.0), ValidationError);
  CHECK_THROWS_AS(improve_flatness(u, 0.1, 1.0), ValidationError);
  CHECK_THROWS_AS(improve_flatness(u, 0.1, 0.25, 0.6), ValidationError);
  CHECK_THROWS_AS(improve_flatness(u, 0.1, 0.25, 0.05), ValidationError);  // below 8h
  CHECK_THROWS_AS(improve_flatness(u, 0.1, 0.25, 0.125, 1e-3), ValidationError);
  GridFunction wedgy = make_fixture(wedge(1.5, vec2(0.0, 1.0)), g);
  CHECK_THROWS_AS(improve_flatness(wedgy, 0.01, 0.25), ValidationError);
  GridFunction shifted = sample(g, FieldRole::Nonnegative, [](const Vec& x) {
    return std::max(0.0, x[1] + 0.5);
  });
  CHECK_THROWS_AS(improve_flatness(shifted, 0.9, 0.25), ValidationError);
}

TEST_CASE("iteration on the exact profile verifies every step with a constant direction") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FlatnessIteration it = iterate_flatness(u, 0.1, 0.25);
  CHECK(it.all_verified);
  CHECK(it.note.empty());
  CHECK(it.certificates.size() == 2);
  CHECK(it.steps.size() == 1);
  for (std::size_t k = 0; k < it.certificates.size(); ++k) {
    CHECK(it.certificates[k].epsilon <= 10.0 * h / std::pow(0.125, double(k)));
    CHECK(dot(it.certificates[k].nu, vec2(0.0, 1.0), 2) >= 1.0 - 1e-6);
  }
  std::string csv = it.to_csv();
  CHECK(csv.rfind("k,r,eps,decay,bound,decay_ok,sigma,sigma_gate,sigma_ok\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("iteration on a computed tilted minimizer verifies its decay step") {
  const GridFunction& u = tilted_minimizer_128();
  FlatnessIteration it = iterate_flatness(u, 0.1, 0.25);
  REQUIRE(it.steps.size() == 1);
  CHECK(it.all_verified);
  CHECK(it.steps[0].decay_ok);
  CHECK(it.steps[0].sigma_ok);
}

TEST_CASE("the steep wedge stalls and the decay assertion flags it") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(wedge(1.5, vec2(0.0, 1.0)), g);
  FlatnessIteration it = iterate_flatness(u, 0.9, 0.25);
  REQUIRE(!it.steps.empty());
  CHECK(!it.all_verified);
  CHECK(it.note.find("decay") != std::string::npos);
  CHECK(!it.steps[0].decay_ok);
}

TEST_CASE("the energy-defect bookkeeping is logged and flagged per step") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  CHECK_THROWS_AS(iterate_flatness(u, 0.5, 0.25, 0.125, 0.5, 1.0), ValidationError);
  FlatnessIteration it = iterate_flatness(u, 0.5, 0.25, 0.125, 0.015, 1.0);
  REQUIRE(!it.steps.empty());
  CHECK(!it.steps[0].sigma_ok);
  CHECK(!it.all_verified);
  CHECK(it.note.find("bookkeeping") != std::string::npos);
}

TEST_CASE("free boundary extraction straddles the threshold edge by edge") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FreeBoundary fb = extract_free_boundary(u);
  REQUIRE(!fb.points.empty());
  CHECK(fb.dim == 2);
  CHECK(fb.h == h);
  for (std::size_t i = 0; i < fb.points.size(); ++i) {
    const Vec& p = fb.points[i];
    CHECK(std::abs(p[1] - 0.5 * h) <= 1e-12);
    CHECK(u.interpolate(p) == doctest::Approx(0.5 * h).epsilon(1e-9));
    int off_lattice = 0;
    for (int d = 0; d < 2; ++d) {
      double rel = (p[d] - g.bounds[d].lo) / h;
      if (std::abs(rel - std::round(rel)) > 1e-9) ++off_lattice;
    }
    CHECK(off_lattice <= 1);
    CHECK(dot(fb.normals[i], vec2(0.0, 1.0), 2) >= 1.0 - 1e-9);
  }
  CHECK(fb.edges.size() == fb.points.size() - 1);
  std::string csv = fb.to_csv();
  CHECK(csv.rfind("x,y,z,nx,ny,nz\n", 0) == 0);
}

TEST_CASE("a straight free boundary has length one and dimension one") {
  double h = 1.0 / 64;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FreeBoundary fb = extract_free_boundary(u);
  HausdorffEstimate est = hausdorff_estimate(fb, Ball{{0.0, 0.0, 0.0}, 0.5});
  CHECK(std::abs(est.polyline_length - 1.0) <= 20.0 * h);
  CHECK(std::abs(est.dimension - 1.0) <= 0.05);
  CHECK(est.counts.size() >= 2);
  std::string csv = est.to_csv();
  CHECK(csv.rfind("scale,count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + est.counts.size());
}

TEST_CASE("a circular free boundary has the circumference of the circle") {
  double h = 1.0 / 128;
  Grid g = square_grid(h);
  GridFunction u = make_fixture(exterior_radial(vec2(0.0, 0.0), 0.3), g);
  FreeBoundary fb = extract_free_boundary(u);
  HausdorffEstimate est = hausdorff_estimate(fb, unit_ball());
  CHECK(std::abs(est.polyline_length - 2.0 * M_PI * 0.3) <= 20.0 * h);
  // Box counting at dyadic scales down to 1/32 carries curvature bias on a
  // radius-0.3 circle; only a loose dimension band is meaningful here.
  CHECK(std::abs(est.dimension - 1.0) <= 0.2);
}

TEST_CASE("extraction and box counting report their failure modes") {
  Grid g = square_grid(1.0 / 16);
  GridFunction dry = make_constant(g, FieldRole::Nonnegative, 0.0);
  CHECK_THROWS_AS(extract_free_boundary(dry), ValidationError);
  GridFunction wet = make_constant(g, FieldRole::Nonnegative, 1.0);
  CHECK_THROWS_AS(extract_free_boundary(wet), ValidationError);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FreeBoundary fb = extract_free_boundary(u);
  // 4h = 1/4 leaves a single dyadic scale: too coarse to fit a slope.
  CHECK_THROWS_AS(hausdorff_estimate(fb, Ball{{0.0, 0.0, 0.0}, 0.5}), ValidationError);
  CHECK_THROWS_AS(hausdorff_estimate(fb, Ball{{10.0, 0.0, 0.0}, 0.25}), ValidationError);
}

TEST_CASE("graph fit of a straight boundary has zero seminorm") {
  Grid g = square_grid(1.0 / 64);
  GridFunction u = make_fixture(half_plane(vec2(0.0, 1.0)), g);
  FreeBoundary fb = extract_free_boundary(u);
  double seminorm = c1alpha_fit(fb, Ball{{0.0, 0.0, 0.0}, 0.25}, 0.25);
  CHECK(seminorm <= 1e-9);
  CHECK_THROWS_AS(c1alpha_fit(fb, Ball{{10.0, 0.0, 0.0}, 0.25}, 0.25), ValidationError);
  CHECK_THROWS_AS(c1alpha_fit(fb, Ball{{0.0, 0.0, 0.0}, 0.25}, 0.0), ValidationError);
}

TEST_CASE("computed tilted minimizer has a controlled graph seminorm") {
  const GridFunction& u = tilted_minimizer_128();
  FreeBoundary fb = extract_free_boundary(u);
  double seminorm = c1alpha_fit(fb, Ball{{0.0, 0.0, 0.0}, 0.25}, 0.25);
  CHECK(seminorm <= 1.0);
}

TEST_CASE("a corner in the free boundary blows up the graph seminorm") {
  Grid g = square_grid(1.0 / 128);
  // Positivity set {x2 > 0.577 |x1|}: a V-shaped boundary with a genuine
  // corner at the origin, slopes +-0.577.
  GridFunction u = sample(g, FieldRole::Nonnegative, [](const Vec& x) {
    return std::max(0.0, x[1] - 0.577 * std::abs(x[0]));
  });
  FreeBoundary fb = extract_free_boundary(u);
  double seminorm = c1alpha_fit(fb, Ball{{0.0, 0.0, 0.0}, 0.25}, 0.25);
  CHECK(seminorm > 1.0);
}

TEST_CASE("three-dimensional flatness, rescale and linearization agree on the exact profile") {
  double h = 1.0 / 64;
  Grid g = cube_grid(h);
  GridFunction u = make_fixture(half_plane(vec3(0.0, 0.0, 1.0)), g);
  CHECK(flatness(u, unit_ball(), vec3(0.0, 0.0, 1.0)) == 0.0);
  FlatnessCertificate cert = best_direction(u, unit_ball());
  CHECK(cert.epsilon <= 1e-4);
  CHECK(dot(cert.nu, vec3(0.0, 0.0, 1.0), 3) >= 1.0 - 1e-6);
  double res = linearization_residual(u, 0.1, vec3(0.0, 0.0, 1.0));
  CHECK(res <= 1e-9);
}

TEST_CASE("three-dimensional free boundary of a plane counts as a surface") {
  double h = 1.0 / 32;
  Grid g = cube_grid(h);
  GridFunction u = make_fixture(half_plane(vec3(0.0, 0.0, 1.0)), g);
  FreeBoundary fb = extract_free_boundary(u);
  REQUIRE(!fb.points.empty());
  for (std::size_t i = 0; i < fb.points.size(); ++i) {
    CHECK(std::abs(fb.points[i][2] - 0.5 * h) <= 1e-12);
    CHECK(dot(fb.normals[i], vec3(0.0, 0.0, 1.0), 3) >= 1.0 - 1e-9);
  }
  HausdorffEstimate est = hausdorff_estimate(fb, Ball{{0.0, 0.0, 0.0}, 0.5});
  CHECK(std::abs(est.dimension - 2.0) <= 0.2);
  CHECK(est.content >= 0.6);
  CHECK(est.content <= 1.0);
  CHECK(est.polyline_length == 0.0);
  double seminorm = c1alpha_fit(fb, Ball{{0.0, 0.0, 0.0}, 0.25}, 0.25);
  CHECK(seminorm <= 1e-9);
}

}  // TEST_SUITE
