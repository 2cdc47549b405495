#include "fblab/competitors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fblab/elliptic.hpp"

namespace fblab {
namespace {

double smoothstep01(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

// Radial blend: 1 deep inside the ball, 0 within 2h of the sphere, so every
// blended modification leaves the Dirichlet ring untouched and the competitor
// stays continuous across the seam.
double ring_blend(double d, double radius, double h) {
  return std::clamp((radius - 2.0 * h - d) / (0.25 * radius), 0.0, 1.0);
}

std::vector<char> free_mask(const GridFunction& u, const Ball& ball) {
  std::vector<char> mask(u.grid.node_count(), 0);
  for (std::size_t p : free_nodes_in_ball(u.grid, ball)) mask[p] = 1;
  return mask;
}

}  // namespace

std::vector<Competitor> built_in_suite(const GridFunction& u, const Ball& ball,
                                       const SuiteOptions& opt) {
  const Grid& g = u.grid;
  const double h = g.h;
  const double R = ball.radius;
  const int n = g.dim;
  std::vector<Competitor> suite;

  const std::vector<char> is_free = free_mask(u, ball);
  const auto for_free_nodes = [&](const std::function<void(int, int, int, const Vec&)>& f) {
    for_nodes_in_ball(g, ball, [&](int i, int j, int k) {
      if (!is_free[g.index(i, j, k)]) return;
      f(i, j, k, g.node(i, j, k));
    });
  };

  // 1. Harmonic replacement: the unique Dirichlet-energy minimizer with u's
  // ring data; its positivity term can only help or tie.
  suite.push_back({"harmonic", harmonic_replacement(u, ball).v});

  // 2. Truncations max(u - t w, 0): carve away the low part of the positive
  // set while blending back to u near the ring. Levels are log-spaced between
  // the grid scale and the maximum of u on the ball.
  double max_on_ball = 0.0;
  for_nodes_in_ball(g, ball, [&](int i, int j, int k) {
    max_on_ball = std::max(max_on_ball, u.at(i, j, k));
  });
  if (opt.truncation_levels > 0 && max_on_ball > h) {
    const int levels = opt.truncation_levels;
    for (int l = 0; l < levels; ++l) {
      const double s = levels == 1 ? 1.0 : static_cast<double>(l) / (levels - 1);
      const double t = std::exp(std::log(h) + s * (std::log(max_on_ball) - std::log(h)));
      GridFunction v = u;
      for_free_nodes([&](int i, int j, int k, const Vec& x) {
        const double w = ring_blend(dist(x, ball.center, n), R, h);
        v.at(i, j, k) = std::max(u.at(i, j, k) - t * w, 0.0);
      });
      suite.push_back({"trunc_" + std::to_string(l), std::move(v)});
    }
  }

  // 3. Cutoff competitor u (1 - phi): phi is a radial smoothstep equal to one
  // on the quarter ball and supported in the half ball, so the modification
  // never reaches the ring.
  {
    GridFunction v = u;
    for_free_nodes([&](int i, int j, int k, const Vec& x) {
      const double d = dist(x, ball.center, n);
      const double phi = 1.0 - smoothstep01((d - 0.25 * R) / (0.25 * R));
      v.at(i, j, k) = u.at(i, j, k) * (1.0 - phi);
    });
    suite.push_back({"cutoff", std::move(v)});
  }

  // 4. Barrier splices with the positive part of a bumped plane anchored at
  // the ball: pbar(x) = (x - c) . e + R/4 + (mu/4n)(R^2 - |x - c|^2). The
  // min splice presses u down onto the cap, the max splice lifts it up; both
  // are blended to u near the ring.
  {
    const double mu = opt.barrier_mu;
    const auto pbar_plus = [&](const Vec& x) {
      const double d2 = dot(sub(x, ball.center), sub(x, ball.center), n);
      const double pbar =
          (x[n - 1] - ball.center[n - 1]) + 0.25 * R + mu / (4.0 * n) * (R * R - d2);
      return std::max(pbar, 0.0);
    };
    GridFunction vmin = u;
    GridFunction vmax = u;
    for_free_nodes([&](int i, int j, int k, const Vec& x) {
      const double w = ring_blend(dist(x, ball.center, n), R, h);
      const double p = pbar_plus(x);
      const double val = u.at(i, j, k);
      vmin.at(i, j, k) = val - w * std::max(val - p, 0.0);
      vmax.at(i, j, k) = val + w * std::max(p - val, 0.0);
    });
    suite.push_back({"min_splice", std::move(vmin)});
    suite.push_back({"max_splice", std::move(vmax)});
  }

  // 5. The computed minimizer with boundary data u on the ring. Skipped when
  // the ring data is not admissible for the solver (e.g. signed fields).
  if (opt.include_solver) {
    try {
      SolveResult r = minimize_bernoulli(u, ball, opt.solver);
      suite.push_back({"solver", std::move(r.u)});
    } catch (const ValidationError&) {
      // ring data outside the solver's domain: the rest of the suite stands
    }
  }

  return suite;
}

}  // namespace fblab
