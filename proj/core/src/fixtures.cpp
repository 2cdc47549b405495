#include "fblab/fixtures.hpp"

#include <cmath>
#include <sstream>

namespace fblab {

namespace {

void require_unit(const Vec& nu, int dim, const std::string& who) {
  if (std::abs(norm(nu, dim) - 1.0) > 1e-12) {
    throw ValidationError(who + ": direction must be a unit vector");
  }
}

}  // namespace

std::string FixtureSpec::name() const {
  std::ostringstream s;
  switch (kind) {
    case FixtureKind::HalfPlane:
      s << "half_plane";
      break;
    case FixtureKind::TiltedPlane:
      s << "tilted_plane(slope=" << slope << ")";
      break;
    case FixtureKind::ExteriorRadial:
      s << "exterior_radial(r0=" << r0 << ")";
      break;
    case FixtureKind::Constant:
      s << "constant(" << value << ")";
      break;
    case FixtureKind::Wedge:
      s << "wedge(" << gamma << ")";
      break;
  }
  return s.str();
}

FixtureSpec half_plane(const Vec& nu) {
  FixtureSpec f;
  f.kind = FixtureKind::HalfPlane;
  f.nu = nu;
  return f;
}

FixtureSpec tilted_plane(const Vec& nu, double slope) {
  if (!(slope > 0.0)) throw ValidationError("tilted_plane: slope must be > 0");
  FixtureSpec f;
  f.kind = FixtureKind::TiltedPlane;
  f.nu = nu;
  f.slope = slope;
  return f;
}

FixtureSpec exterior_radial(const Vec& center, double r0) {
  if (!(r0 > 0.0)) throw ValidationError("exterior_radial: r0 must be > 0");
  FixtureSpec f;
  f.kind = FixtureKind::ExteriorRadial;
  f.center = center;
  f.r0 = r0;
  return f;
}

FixtureSpec constant_fixture(double value) {
  if (value < 0.0) throw ValidationError("constant fixture: value must be >= 0");
  FixtureSpec f;
  f.kind = FixtureKind::Constant;
  f.value = value;
  return f;
}

FixtureSpec wedge(double gamma, const Vec& nu) {
  if (!(gamma > 0.0)) throw ValidationError("wedge: gamma must be > 0");
  FixtureSpec f;
  f.kind = FixtureKind::Wedge;
  f.gamma = gamma;
  f.nu = nu;
  return f;
}

double fixture_value(const FixtureSpec& spec, const Vec& x, int dim) {
  switch (spec.kind) {
    case FixtureKind::HalfPlane: {
      double t = dot(x, spec.nu, dim);
      return t > 0.0 ? t : 0.0;
    }
    case FixtureKind::TiltedPlane: {
      double t = spec.slope * dot(x, spec.nu, dim);
      return t > 0.0 ? t : 0.0;
    }
    case FixtureKind::ExteriorRadial: {
      double r = dist(x, spec.center, dim);
      if (r <= spec.r0) return 0.0;
      if (dim == 2) return spec.r0 * std::log(r / spec.r0);
      return spec.r0 * (1.0 - spec.r0 / r);
    }
    case FixtureKind::Constant:
      return spec.value;
    case FixtureKind::Wedge: {
      double t = spec.gamma * dot(x, spec.nu, dim);
      return t > 0.0 ? t : 0.0;
    }
  }
  return 0.0;
}

GridFunction make_fixture(const FixtureSpec& spec, const Grid& grid) {
  if (spec.kind == FixtureKind::HalfPlane || spec.kind == FixtureKind::TiltedPlane ||
      spec.kind == FixtureKind::Wedge) {
    require_unit(spec.nu, grid.dim, spec.name());
  }
  return sample(grid, FieldRole::Nonnegative,
                [&](const Vec& x) { return fixture_value(spec, x, grid.dim); });
}

}  // namespace fblab
