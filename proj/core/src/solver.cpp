#include "fblab/solver.hpp"

#include <algorithm>
#include <cmath>

#include "fblab/elliptic.hpp"

namespace fblab {

double SolverConfig::resolved_eps_pen(double h) const {
  if (eps_pen == 0.0) return std::max(h, 0.25 * std::sqrt(h));
  return eps_pen;
}

void SolverConfig::validate(double h) const {
  if (eps_pen != 0.0 && eps_pen < h) {
    throw ValidationError("solver config: eps_pen must be >= h");
  }
  if (descent_cap <= 0 || restarts <= 0) {
    throw ValidationError("solver config: caps must be positive");
  }
  if (!(energy_tol > 0.0)) {
    throw ValidationError("solver config: energy_tol must be > 0");
  }
}

namespace {

// Smoothstep ramp and its derivative.
double ramp(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

double ramp_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 6.0 * t * (1.0 - t);
}

struct CellData {
  std::size_t base = 0;
  double a = 1.0;  // Dirichlet weight
  double q = 1.0;  // positivity weight
};

struct Workspace {
  const Grid* grid = nullptr;
  Ball ball;
  std::array<long, 3> st{};
  std::vector<CellData> cells;
  std::vector<std::size_t> free_ids;
  std::vector<char> is_free;
  std::vector<std::size_t> corner_off;  // 2^dim corner offsets
  double vol = 0.0;
  double eps = 0.0;

  int dim() const { return grid->dim; }
};

Workspace make_workspace(const GridFunction& g, const Ball& ball,
                         const CoefficientField* coef, double eps) {
  Workspace w;
  w.grid = &g.grid;
  w.ball = ball;
  const Grid& gr = g.grid;
  w.st = gr.dim == 2 ? std::array<long, 3>{gr.shape[1], 1, 0}
                     : std::array<long, 3>{static_cast<long>(gr.shape[1]) * gr.shape[2],
                                           gr.shape[2], 1};
  w.vol = gr.cell_volume();
  w.eps = eps;
  for_cells_in_ball(gr, ball, [&](int i, int j, int k) {
    CellData c;
    c.base = gr.index(i, j, k);
    if (coef) {
      Vec x = gr.cell_center(i, j, k);
      c.a = coef->a(x);
      c.q = coef->q(x);
      if (!(c.a >= 1.0) || !(c.q >= 1.0)) {
        throw ValidationError("generate_almost_minimizer: coefficients must be >= 1");
      }
    }
    w.cells.push_back(c);
  });
  w.free_ids = free_nodes_in_ball(gr, ball);
  w.is_free.assign(gr.node_count(), 0);
  for (std::size_t id : w.free_ids) w.is_free[id] = 1;
  int corners = 1 << gr.dim;
  for (int c = 0; c < corners; ++c) {
    std::size_t off = 0;
    for (int d = 0; d < gr.dim; ++d) {
      if (c & (1 << d)) off += static_cast<std::size_t>(w.st[d]);
    }
    w.corner_off.push_back(off);
  }
  return w;
}

struct PenEnergy {
  double dirichlet = 0.0;
  double smoothed = 0.0;
  double total() const { return dirichlet + smoothed; }
};

// The Dirichlet part matches dirichlet_energy: mean squared corner gradient
// per cell, i.e. all cell edges at weight 1/2^{n-1}.
PenEnergy penalized_energy(const Workspace& w, const std::vector<double>& vals) {
  PenEnergy e;
  const double h = w.grid->h;
  const int dim = w.dim();
  const double inv_corners = 1.0 / static_cast<double>(w.corner_off.size());
  const double inv_half = 2.0 * inv_corners;
  const int corners = static_cast<int>(w.corner_off.size());
  for (const CellData& c : w.cells) {
    double dir = 0.0;
    for (int d = 0; d < dim; ++d) {
      for (int mask = 0; mask < corners; ++mask) {
        if (mask & (1 << d)) continue;
        double diff = (vals[c.base + w.corner_off[mask | (1 << d)]] -
                       vals[c.base + w.corner_off[mask]]) /
                      h;
        dir += diff * diff;
      }
    }
    double s = 0.0;
    for (std::size_t off : w.corner_off) s += ramp(vals[c.base + off] / w.eps);
    e.dirichlet += c.a * dir * inv_half;
    e.smoothed += c.q * s * inv_corners;
  }
  e.dirichlet *= w.vol;
  e.smoothed *= w.vol;
  return e;
}

void penalized_gradient(const Workspace& w, const std::vector<double>& vals,
                        std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double h = w.grid->h;
  const int dim = w.dim();
  const double inv_corners = 1.0 / static_cast<double>(w.corner_off.size());
  const double inv_half = 2.0 * inv_corners;
  const int corners = static_cast<int>(w.corner_off.size());
  for (const CellData& c : w.cells) {
    for (int d = 0; d < dim; ++d) {
      for (int mask = 0; mask < corners; ++mask) {
        if (mask & (1 << d)) continue;
        std::size_t lo = c.base + w.corner_off[mask];
        std::size_t hi = c.base + w.corner_off[mask | (1 << d)];
        double diff = 2.0 * c.a * inv_half * (vals[hi] - vals[lo]) / (h * h);
        grad[hi] += diff;
        grad[lo] -= diff;
      }
    }
    double pen = c.q * inv_corners / w.eps;
    for (std::size_t off : w.corner_off) {
      std::size_t p = c.base + off;
      grad[p] += pen * ramp_deriv(vals[p] / w.eps);
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= w.vol;
}

// Projected gradient descent with backtracking. Accepted steps strictly
// decrease the penalized energy, so the logged totals are non-increasing.
struct DescentOutcome {
  bool converged = false;
  std::vector<DescentRecord> log;
};

DescentOutcome descend(const Workspace& w, std::vector<double>& vals,
                       const SolverConfig& cfg) {
  DescentOutcome out;
  const Grid& gr = *w.grid;
  std::vector<double> grad(gr.node_count(), 0.0);
  std::vector<double> trial(vals);
  PenEnergy cur = penalized_energy(w, vals);
  out.log.push_back({0, cur.dirichlet, cur.smoothed, cur.total()});
  double step = std::pow(gr.h, 2 - gr.dim) / (8.0 * gr.dim);
  int calm = 0;
  for (int it = 1; it <= cfg.descent_cap; ++it) {
    penalized_gradient(w, vals, grad);
    bool accepted = false;
    for (int trial_no = 0; trial_no < 40; ++trial_no) {
      double move2 = 0.0;
      for (std::size_t id : w.free_ids) {
        double v = vals[id] - step * grad[id];
        if (v < 0.0) v = 0.0;
        trial[id] = v;
        double dmove = v - vals[id];
        move2 += dmove * dmove;
      }
      if (move2 == 0.0) break;
      PenEnergy next = penalized_energy(w, trial);
      if (next.total() <= cur.total() - 1e-4 * move2 / step) {
        for (std::size_t id : w.free_ids) vals[id] = trial[id];
        double drop = cur.total() - next.total();
        cur = next;
        out.log.push_back({it, cur.dirichlet, cur.smoothed, cur.total()});
        accepted = true;
        step *= 1.5;
        calm = drop <= cfg.energy_tol * (1.0 + std::abs(cur.total())) ? calm + 1 : 0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || calm >= 5) {
      out.converged = true;
      return out;
    }
  }
  out.converged = false;
  return out;
}

// Threshold at h/2, weighted-harmonic re-solve on the positive set, clamp.
GridFunction sharpen(const Workspace& w, const GridFunction& g,
                     const std::vector<double>& vals,
                     const std::function<double(const Vec&)>* weight,
                     bool* solve_ok) {
  GridFunction u = g;
  u.values = vals;
  *solve_ok = true;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<std::size_t> keep;
    for (std::size_t id : w.free_ids) {
      if (u.values[id] >= 0.5 * w.grid->h) keep.push_back(id);
    }
    GridFunction fixed = u;
    for (std::size_t id : w.free_ids) {
      if (fixed.values[id] < 0.5 * w.grid->h) fixed.values[id] = 0.0;
    }
    try {
      EllipticResult sol = dirichlet_solve_on_set(fixed, w.ball, keep, weight);
      u = sol.v;
    } catch (const NumericalError&) {
      *solve_ok = false;
      return u;
    }
    for (std::size_t id : w.free_ids) {
      if (u.values[id] < 0.0) u.values[id] = 0.0;
    }
  }
  return u;
}

GridFunction seed_field(const GridFunction& g, const Ball& ball,
                        const Workspace& w, int which) {
  GridFunction u = g;
  for (double& v : u.values) {
    if (v < 0.0) v = 0.0;
  }
  if (which == 0) {
    // Harmonic extension of the ring data.
    try {
      u = harmonic_replacement(u, ball).v;
      for (double& v : u.values) {
        if (v < 0.0) v = 0.0;
      }
    } catch (const NumericalError&) {
      // fall through with the clamped data
    }
  } else if (which == 1) {
    // Boundary value scaled by normalized distance from the center: the
    // 1-homogeneous extension of the ring data.
    const Grid& gr = g.grid;
    for (std::size_t id : w.free_ids) {
      // Decode lattice coordinates.
      std::size_t rem = id;
      std::array<int, 3> p = {0, 0, 0};
      if (gr.dim == 2) {
        p[0] = static_cast<int>(rem / w.st[0]);
        p[1] = static_cast<int>(rem % w.st[0]);
      } else {
        p[0] = static_cast<int>(rem / w.st[0]);
        rem %= static_cast<std::size_t>(w.st[0]);
        p[1] = static_cast<int>(rem / w.st[1]);
        p[2] = static_cast<int>(rem % w.st[1]);
      }
      Vec x = gr.node(p[0], p[1], p[2]);
      Vec d = sub(x, ball.center);
      double r = norm(d, gr.dim);
      if (r < 1e-14) {
        u.values[id] = 0.0;
        continue;
      }
      Vec xb = add(ball.center, scale(d, ball.radius / r));
      for (int dd = 0; dd < gr.dim; ++dd) {
        xb[dd] = std::clamp(xb[dd], gr.bounds[dd].lo, gr.bounds[dd].hi);
      }
      double gb = std::max(0.0, g.interpolate(xb));
      u.values[id] = gb * (r / ball.radius);
    }
  } else {
    for (std::size_t id : w.free_ids) u.values[id] = 0.0;
  }
  return u;
}

SolveResult run_minimization(const GridFunction& g, const Ball& ball,
                             const SolverConfig& cfg, const CoefficientField* coef) {
  const Grid& gr = g.grid;
  require_ball_inside(gr, ball, "minimize_bernoulli");
  cfg.validate(gr.h);
  double eps = cfg.resolved_eps_pen(gr.h);
  Workspace w = make_workspace(g, ball, coef, eps);

  // Ring data must be admissible.
  for_cells_in_ball(gr, ball, [&](int i, int j, int k) {
    for (std::size_t off : w.corner_off) {
      std::size_t id = gr.index(i, j, k) + off;
      if (!w.is_free[id] && g.values[id] < 0.0) {
        throw ValidationError("minimize_bernoulli: boundary data must be >= 0");
      }
    }
  });

  std::function<double(const Vec&)> weight_fn;
  const std::function<double(const Vec&)>* weight = nullptr;
  if (coef) {
    weight_fn = coef->a;
    weight = &weight_fn;
  }
  auto exact_energy = [&](const GridFunction& u) {
    return coef ? weighted_bernoulli_energy(u, ball, *coef)
                : bernoulli_energy(u, ball).total;
  };

  SolveResult best;
  bool have_best = false;
  double best_objective = 0.0;
  int nrestarts = std::min(cfg.restarts, 3);
  for (int restart = 0; restart < nrestarts; ++restart) {
    GridFunction u0 = seed_field(g, ball, w, restart);
    std::vector<double> vals = u0.values;
    DescentOutcome dout = descend(w, vals, cfg);

    bool sharp_ok = true;
    GridFunction cand = sharpen(w, g, vals, weight, &sharp_ok);
    GridFunction raw = g;
    raw.values = vals;
    double e_cand = exact_energy(cand);
    double e_raw = exact_energy(raw);
    if (e_raw < e_cand) {
      cand = raw;
      e_cand = e_raw;
    }

    if (!have_best || e_cand < best_objective - 1e-15) {
      have_best = true;
      best_objective = e_cand;
      best.u = cand;
      best.energy = bernoulli_energy(cand, ball);
      best.objective = e_cand;
      best.log = std::move(dout.log);
      best.chosen_restart = restart;
      best.converged = dout.converged && sharp_ok;
      best.log.push_back({best.log.empty() ? 0 : best.log.back().iteration + 1,
                          best.energy.dirichlet, best.energy.positivity,
                          best.energy.total});
    }
    best.restart_energies.push_back(e_cand);
  }
  return best;
}

}  // namespace

SolveResult minimize_bernoulli(const GridFunction& g, const Ball& ball,
                               const SolverConfig& cfg) {
  return run_minimization(g, ball, cfg, nullptr);
}

double weighted_bernoulli_energy(const GridFunction& u, const Ball& ball,
                                 const CoefficientField& coef) {
  const Grid& g = u.grid;
  require_ball_inside(g, ball, "weighted_bernoulli_energy");
  const double inv_half = 1.0 / double(1 << (g.dim - 1));
  std::vector<double> terms;
  for_cells_in_ball(g, ball, [&](int i, int j, int k) {
    // Same edge-based cell gradient as dirichlet_energy.
    double dir = 0.0;
    int base[3] = {i, j, k};
    for (int d = 0; d < g.dim; ++d) {
      for (int mask = 0; mask < (1 << g.dim); ++mask) {
        if (mask & (1 << d)) continue;
        int a[3] = {base[0], base[1], base[2]};
        for (int d2 = 0; d2 < g.dim; ++d2) {
          if (mask & (1 << d2)) a[d2] += 1;
        }
        int b[3] = {a[0], a[1], a[2]};
        b[d] += 1;
        double diff = (u.at(b[0], b[1], b[2]) - u.at(a[0], a[1], a[2])) / g.h;
        dir += diff * diff;
      }
    }
    Vec x = g.cell_center(i, j, k);
    double term = coef.a(x) * dir * inv_half;
    if (cell_min(u, i, j, k) > 0.0) term += coef.q(x);
    terms.push_back(term);
  });
  return canonical_sum(terms) * g.cell_volume();
}

namespace {

void check_oscillation(const CoefficientField& coef, const Grid& grid,
                       const Ball& ball) {
  if (coef.kappa < 0.0 || !(coef.beta > 0.0) || coef.beta > 1.0) {
    throw ValidationError("generate_almost_minimizer: need kappa >= 0, beta in (0,1]");
  }
  // Oscillation on dyadic balls, centers on a r/2-spaced net inside B.
  for (double r = ball.radius; r >= 16.0 * grid.h; r *= 0.5) {
    int span = static_cast<int>(std::floor((ball.radius - r) / (0.5 * r)));
    for (int ci = -span; ci <= span; ++ci) {
      for (int cj = -span; cj <= span; ++cj) {
        Vec c = ball.center;
        c[0] += 0.5 * r * ci;
        c[1] += 0.5 * r * cj;
        if (dist(c, ball.center, grid.dim) > ball.radius - r + 1e-12) continue;
        double amin = 0.0, amax = 0.0, qmin = 0.0, qmax = 0.0;
        bool first = true;
        for_cells_in_ball(grid, Ball{c, r}, [&](int i, int j, int k) {
          Vec x = grid.cell_center(i, j, k);
          double av = coef.a(x);
          double qv = coef.q(x);
          if (first) {
            amin = amax = av;
            qmin = qmax = qv;
            first = false;
          } else {
            amin = std::min(amin, av);
            amax = std::max(amax, av);
            qmin = std::min(qmin, qv);
            qmax = std::max(qmax, qv);
          }
        });
        double osc = (amax - amin) + (qmax - qmin);
        if (osc > coef.kappa * std::pow(r, coef.beta) + 1e-12) {
          throw ValidationError(
              "generate_almost_minimizer: coefficient oscillation exceeds "
              "kappa r^beta on a dyadic ball");
        }
      }
    }
  }
}

}  // namespace

SolveResult generate_almost_minimizer(const CoefficientField& coef,
                                      const GridFunction& g, const Ball& ball,
                                      const SolverConfig& cfg) {
  if (!coef.a || !coef.q) {
    throw ValidationError("generate_almost_minimizer: coefficient fields required");
  }
  check_oscillation(coef, g.grid, ball);
  return run_minimization(g, ball, cfg, &coef);
}

double positivity_interior_residual(const GridFunction& u, const Ball& ball) {
  const Grid& g = u.grid;
  require_ball_inside(g, ball, "positivity_interior_residual");
  auto st = g.dim == 2 ? std::array<long, 3>{g.shape[1], 1, 0}
                       : std::array<long, 3>{static_cast<long>(g.shape[1]) * g.shape[2],
                                             g.shape[2], 1};
  std::vector<std::size_t> free = free_nodes_in_ball(g, ball);
  double level = 0.5 * g.h;
  double worst = 0.0;
  for (std::size_t id : free) {
    // Interior test: the lattice 2-neighborhood stays at or above the level.
    bool interior = u.values[id] >= level;
    for (int d = 0; d < g.dim && interior; ++d) {
      for (int s = -2; s <= 2 && interior; ++s) {
        long q = static_cast<long>(id) + s * st[d];
        if (q < 0 || q >= static_cast<long>(g.node_count())) {
          interior = false;
        } else if (u.values[q] < level) {
          interior = false;
        }
      }
    }
    if (!interior) continue;
    double lap = 2.0 * g.dim * u.values[id];
    for (int d = 0; d < g.dim; ++d) {
      lap -= u.values[id + st[d]] + u.values[id - st[d]];
    }
    worst = std::max(worst, std::abs(lap) / (g.h * g.h));
  }
  return worst;
}

}  // namespace fblab
