#pragma once

// Independent expected values for the test suite. Everything here is computed
// from closed forms or brute-force quadrature that shares no code with the
// library; frozen constants are written out to full precision.

#include <cmath>
#include <functional>

#include "fblab/common.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// J((x.e2)+, B_1) in 2D: Dirichlet part |B|/2, positivity part |B|/2.
inline constexpr double kEnergyHalfPlaneB1 = kPi;

// J(q.x, B_1) in 2D for the signed linear field: |q|^2 |B| + |B|/2.
inline double energy_linear_b1(double q_norm) {
  return q_norm * q_norm * kPi + 0.5 * kPi;
}

// Area of the unit disc's upper half.
inline constexpr double kHalfDiscArea = kPi / 2.0;

// (avg of |grad (x.e2)+|^2 over B_1)^{1/2} = sqrt(1/2).
inline constexpr double kAvgGradHalfPlane = 0.70710678118654752440;

// Weiss energy of (x.e2)+ at the origin, any radius: pi/2.
inline constexpr double kWeissHalfPlane = kPi / 2.0;

// Weiss energy of the constant c in 2D at radius r: pi - 2 pi c^2 / r^2.
inline double weiss_constant(double c, double r) {
  return kPi - 2.0 * kPi * c * c / (r * r);
}

// Strong non-degeneracy ratio of the 2D exterior radial solution at a free
// boundary point: max_{B_r} u / r along the outward ray.
inline double exterior_radial_ratio(double r0, double r) {
  return r0 * std::log(1.0 + r / r0) / r;
}
// Frozen for r0 = 0.25, r = 0.1: 0.25 * ln(1.4) / 0.1.
inline constexpr double kExteriorRatio_r025_01 = 0.84118059155303222;

// Circumference of the exterior_radial(0.3) free boundary.
inline constexpr double kCircleLength_03 = 2.0 * kPi * 0.3;

// sup_{B_1} |(x.nu)+ - (x.e2)+| for nu at angle theta from e2: sin(theta).
inline double tilt_deviation(double theta) { return std::sin(theta); }
inline constexpr double kTiltDeviation_01 = 0.09983341664682815;

// Midpoint-rule Bernoulli energy over the ball from closed forms, for
// [DERIVED] cross-checks. grad must be the exact gradient; N ~ 2000 gives
// O(1/N) accuracy for piecewise-smooth integrands.
inline double quadrature_energy(const std::function<double(double, double)>& f,
                                const std::function<void(double, double, double*, double*)>& grad,
                                double cx, double cy, double radius, int n) {
  double h = 2.0 * radius / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double x = cx - radius + (i + 0.5) * h;
      double y = cy - radius + (j + 0.5) * h;
      double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy >= radius * radius) continue;
      double gx = 0.0, gy = 0.0;
      grad(x, y, &gx, &gy);
      acc += gx * gx + gy * gy + (f(x, y) > 0.0 ? 1.0 : 0.0);
    }
  }
  return acc * h * h;
}

}  // namespace oracle
