#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fblab/energy.hpp"
#include "fblab/lattice.hpp"

namespace fblab {

struct SolverConfig {
  double eps_pen = 0.0;      // penalization width; 0 selects max(h, sqrt(h)/4)
  int descent_cap = 400;     // descent steps per restart
  int restarts = 3;          // seeds: harmonic extension, scaled distance, zero
  double energy_tol = 1e-7;  // relative decrease treated as converged

  double resolved_eps_pen(double h) const;
  void validate(double h) const;
};

struct DescentRecord {
  int iteration = 0;
  double dirichlet = 0.0;
  double positivity = 0.0;  // smoothed during descent; exact on the final record
  double total = 0.0;
};

struct SolveResult {
  GridFunction u;
  EnergyReport energy;                   // exact J(u, ball)
  double objective = 0.0;                // minimized objective (= energy.total unweighted)
  std::vector<DescentRecord> log;        // winning restart's trace
  std::vector<double> restart_energies;  // final objective of every restart
  int chosen_restart = 0;
  bool converged = false;
};

// Minimizes J over fields that equal g on the Dirichlet ring of the ball
// (and outside), u >= 0. Scheme: smoothed penalization of the positivity
// term, projected gradient descent with backtracking, then a sharpening pass
// that re-solves harmonically on {u >= h/2} and zeroes the rest. Restarts
// take the least energy; ties break by restart index.
SolveResult minimize_bernoulli(const GridFunction& g, const Ball& ball,
                               const SolverConfig& cfg);

// Coefficients of the perturbed functional sum a|grad u|^2 + q chi. Both
// must stay >= 1 with osc_{B_r} a + osc_{B_r} q <= kappa r^beta on dyadic
// balls; minimizers of this functional are almost minimizers of J.
struct CoefficientField {
  std::function<double(const Vec&)> a;
  std::function<double(const Vec&)> q;
  double kappa = 0.0;
  double beta = 1.0;
};

SolveResult generate_almost_minimizer(const CoefficientField& coef,
                                      const GridFunction& g, const Ball& ball,
                                      const SolverConfig& cfg);

// Exact energy of the perturbed functional (cell-weighted Dirichlet plus
// cell-weighted positivity with the corner rule).
double weighted_bernoulli_energy(const GridFunction& u, const Ball& ball,
                                 const CoefficientField& coef);

// Max divided Laplacian residual over free nodes whose h/2-level positivity
// neighborhood extends at least 2h in every lattice direction; the solver
// contract bounds this by 10 h^2.
double positivity_interior_residual(const GridFunction& u, const Ball& ball);

}  // namespace fblab
