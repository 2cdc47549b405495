#pragma once

#include <vector>

#include "fblab/energy.hpp"
#include "fblab/solver.hpp"

namespace fblab {

struct SuiteOptions {
  int truncation_levels = 8;   // log-spaced between h and max u on the ball
  bool include_solver = true;  // computed minimizer with boundary data u|ring
  double barrier_mu = 0.1;     // curvature parameter of the splice barriers
  SolverConfig solver;
};

// The standard competitor family for the almost-minimality audit. Every
// member agrees with u exactly on the Dirichlet ring of the ball:
//   - "harmonic": harmonic replacement inside the ball;
//   - "trunc_i": truncations max(u - t_i w, 0) with a radial blend w that
//     vanishes near the ring, t_i log-spaced in [h, max u];
//   - "cutoff": u (1 - phi) with a smoothstep phi supported in the half ball
//     and identically one on the quarter ball;
//   - "min_splice"/"max_splice": ring-blended splices of u with the positive
//     part of a bumped plane barrier;
//   - "solver": the computed minimizer with boundary data u on the ring
//     (skipped when the ring data is not admissible for the solver).
std::vector<Competitor> built_in_suite(const GridFunction& u, const Ball& ball,
                                       const SuiteOptions& opt = {});

}  // namespace fblab
