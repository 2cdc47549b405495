#pragma once

#include <string>

#include "fblab/lattice.hpp"

namespace fblab {

enum class FixtureKind { HalfPlane, TiltedPlane, ExteriorRadial, Constant, Wedge };

// Closed-form reference fields. half_plane(nu) is (x . nu)+; wedge(gamma, nu)
// is gamma (x . nu)+, the planted non-minimizer family for gamma != 1;
// exterior_radial is the radial solution with |grad u| = 1 on the free
// boundary sphere |x - z| = r0 (2D: r0 log(|x-z|/r0); 3D: r0 (1 - r0/|x-z|)).
struct FixtureSpec {
  FixtureKind kind = FixtureKind::HalfPlane;
  Vec nu{0.0, 1.0, 0.0};
  double slope = 1.0;   // tilted_plane
  Vec center{0.0, 0.0, 0.0};  // exterior_radial
  double r0 = 0.25;
  double value = 1.0;   // constant
  double gamma = 1.0;   // wedge

  std::string name() const;
};

FixtureSpec half_plane(const Vec& nu);
FixtureSpec tilted_plane(const Vec& nu, double slope);
FixtureSpec exterior_radial(const Vec& center, double r0);
FixtureSpec constant_fixture(double value);
FixtureSpec wedge(double gamma, const Vec& nu);

double fixture_value(const FixtureSpec& spec, const Vec& x, int dim);

GridFunction make_fixture(const FixtureSpec& spec, const Grid& grid);

}  // namespace fblab
