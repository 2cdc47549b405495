#pragma once

#include <functional>

#include "fblab/lattice.hpp"

namespace fblab {

struct SolveDiagnostics {
  int iterations = 0;
  double residual = 0.0;   // max-norm of the divided discrete Laplacian on free nodes
  double tolerance = 0.0;  // max(1e-10, h^3)
  bool converged = false;
};

struct EllipticResult {
  GridFunction v;
  SolveDiagnostics diag;
};

// Default solve tolerance for spacing h.
double elliptic_tolerance(double h);

// Free nodes of the ball system: node p is free when all 2^n cells incident
// to p are member cells of B, so the 5/7-point Laplacian at p is the exact
// stationarity condition of the cell-averaged Dirichlet energy. Every other
// node of a member cell is a Dirichlet ring node.
std::vector<std::size_t> free_nodes_in_ball(const Grid& grid, const Ball& ball);

// Discrete harmonic replacement: minimizes the cell-sum Dirichlet energy over
// the free nodes with ring data taken from u; equals u outside. The 5-point
// (2D) / 7-point (3D) scheme is the exact stationarity condition of that
// quadratic form, so the output's energy never exceeds that of any field with
// the same ring values. Warm-started from u itself: replacing twice is
// bit-exact idempotent.
EllipticResult harmonic_replacement(const GridFunction& u, const Ball& ball);

// Same system with a positive weight per cell (base-node indexed): minimizes
// sum_c a_c |grad u|^2_c. Weights are evaluated once per member cell.
EllipticResult weighted_replacement(const GridFunction& u, const Ball& ball,
                                    const std::function<double(const Vec&)>& cell_weight);

// Solve restricted to a subset of the ball's free nodes; every other node
// keeps its value from `fixed`. Pass a null weight for the unweighted form.
EllipticResult dirichlet_solve_on_set(const GridFunction& fixed, const Ball& ball,
                                      const std::vector<std::size_t>& free_subset,
                                      const std::function<double(const Vec&)>* cell_weight);

struct ClosenessReport {
  double sup_diff = 0.0;          // ||u - v||_inf over nodes of the half ball
  double implied_constant = 0.0;  // sup_diff / sigma^{1/(n+2)}
};

// Compares u with its harmonic replacement on B, measuring on the concentric
// half-radius ball. Requires u > 0 on the closed ball.
ClosenessReport closeness_check(const GridFunction& u, const Ball& ball, double sigma);

// Linearized Neumann problem on the upper half ball {x_n >= c_n} with the
// flat part on the node plane through the center (last axis). Dirichlet data
// from g on the curved ring; the flat-plane rows use ghost-node reflection,
// so the discrete normal derivative (central difference through the ghost)
// vanishes identically. Diagnostics report the one-sided normal difference,
// which is O(h) for generic solutions.
struct NeumannResult {
  GridFunction v;
  SolveDiagnostics diag;
  double flat_normal_diff = 0.0;  // max one-sided difference across the flat part
};

NeumannResult neumann_halfball_solve(const GridFunction& g, const Ball& ball);

}  // namespace fblab
