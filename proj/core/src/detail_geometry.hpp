#pragma once

// Internal helpers shared by the regularity and flatness translation units:
// direction sweeps on the unit sphere, free-boundary point extraction, and
// half-plane profile fitting. Not installed.

#include <cmath>
#include <vector>

#include "fblab/lattice.hpp"

namespace fblab::detail {

// Deterministic unit directions: uniform angles in 2D, a Fibonacci sphere in
// 3D.
inline std::vector<Vec> sweep_directions(int dim, int count2d, int count3d) {
  std::vector<Vec> dirs;
  if (dim == 2) {
    dirs.reserve(count2d);
    for (int i = 0; i < count2d; ++i) {
      double theta = 2.0 * M_PI * double(i) / double(count2d);
      dirs.push_back(vec2(std::cos(theta), std::sin(theta)));
    }
  } else {
    dirs.reserve(count3d);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count3d; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / double(count3d);
      double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = golden * double(i);
      dirs.push_back(vec3(rho * std::cos(phi), rho * std::sin(phi), z));
    }
  }
  return dirs;
}

// Points where u crosses the given threshold along lattice edges, by linear
// interpolation. An edge contributes when one endpoint exceeds the threshold
// and the other does not.
inline std::vector<Vec> free_boundary_points(const GridFunction& u, double threshold) {
  const Grid& g = u.grid;
  std::vector<Vec> points;
  int kmax = g.dim == 3 ? g.shape[2] : 1;
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      for (int k = 0; k < kmax; ++k) {
        double v0 = u.at(i, j, k);
        for (int d = 0; d < g.dim; ++d) {
          int ni = i + (d == 0), nj = j + (d == 1), nk = k + (d == 2);
          if (ni >= g.shape[0] || nj >= g.shape[1] || (g.dim == 3 && nk >= g.shape[2]))
            continue;
          double v1 = u.at(ni, nj, nk);
          bool above0 = v0 > threshold, above1 = v1 > threshold;
          if (above0 == above1) continue;
          double t = (threshold - v0) / (v1 - v0);
          Vec p = g.node(i, j, k);
          p[d] += t * g.h;
          points.push_back(p);
        }
      }
    }
  }
  return points;
}

struct HalfPlaneFit {
  Vec nu{0.0, 1.0, 0.0};
  double error = 0.0;  // sup over nodes of the closed unit ball
};

// Sup-norm distance from v to the profile ((x - c) . nu)+ over nodes of the
// closed ball, where c is the ball center.
inline double halfplane_error(const GridFunction& v, const Ball& ball, const Vec& nu) {
  double err = 0.0;
  for_nodes_in_ball(v.grid, ball, [&](int i, int j, int k) {
    Vec x = sub(v.grid.node(i, j, k), ball.center);
    double profile = std::max(0.0, dot(x, nu, v.grid.dim));
    err = std::max(err, std::abs(v.at(i, j, k) - profile));
  });
  return err;
}

inline double halfplane_error(const GridFunction& v, const Vec& nu) {
  return halfplane_error(v, unit_ball(), nu);
}

// Coarse sweep (720 directions in 2D, 2048 in 3D) followed by one local
// refinement stage around the best direction.
inline HalfPlaneFit best_halfplane_fit(const GridFunction& v, const Ball& ball) {
  int dim = v.grid.dim;
  std::vector<Vec> dirs = sweep_directions(dim, 720, 2048);
  HalfPlaneFit best;
  std::vector<double> errs(dirs.size());
  parallel_for(dirs.size(),
               [&](std::size_t idx) { errs[idx] = halfplane_error(v, ball, dirs[idx]); });
  std::size_t best_idx = 0;
  for (std::size_t idx = 0; idx < dirs.size(); ++idx) {
    if (errs[idx] < errs[best_idx]) best_idx = idx;
  }
  best.nu = dirs[best_idx];
  best.error = errs[best_idx];
  if (dim == 2) {
    // Bisection refinement on the angle around the coarse winner.
    double theta = std::atan2(best.nu[1], best.nu[0]);
    double half = 2.0 * M_PI / 720.0;
    for (int it = 0; it < 40; ++it) {
      for (int s = -1; s <= 1; s += 2) {
        double cand = theta + s * half;
        double e = halfplane_error(v, ball, vec2(std::cos(cand), std::sin(cand)));
        if (e < best.error) {
          best.error = e;
          theta = cand;
          best.nu = vec2(std::cos(cand), std::sin(cand));
        }
      }
      half *= 0.5;
    }
  } else {
    // Local tangent-plane refinement with a shrinking 5x5 stencil.
    Vec n = best.nu;
    Vec t1 = std::abs(n[2]) < 0.9 ? vec3(-n[1], n[0], 0.0) : vec3(0.0, -n[2], n[1]);
    double t1n = norm(t1, 3);
    t1 = scale(t1, 1.0 / t1n);
    Vec t2 = vec3(n[1] * t1[2] - n[2] * t1[1], n[2] * t1[0] - n[0] * t1[2],
                  n[0] * t1[1] - n[1] * t1[0]);
    double step = 2.0 / std::sqrt(2048.0);
    for (int round = 0; round < 12; ++round) {
      Vec local_best = best.nu;
      for (int a = -2; a <= 2; ++a) {
        for (int b = -2; b <= 2; ++b) {
          if (a == 0 && b == 0) continue;
          Vec cand = add(best.nu, add(scale(t1, a * step * 0.5), scale(t2, b * step * 0.5)));
          double cn = norm(cand, 3);
          cand = scale(cand, 1.0 / cn);
          double e = halfplane_error(v, ball, cand);
          if (e < best.error) {
            best.error = e;
            local_best = cand;
          }
        }
      }
      best.nu = local_best;
      step *= 0.5;
    }
  }
  return best;
}

inline HalfPlaneFit best_halfplane_fit(const GridFunction& v) {
  return best_halfplane_fit(v, unit_ball());
}

}  // namespace fblab::detail
