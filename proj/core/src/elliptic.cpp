#include "fblab/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace fblab {

namespace {

// Symmetric positive-definite system over the free nodes, stored row-wise.
struct System {
  std::size_t m = 0;
  std::vector<double> diag;
  std::vector<double> rhs;
  std::vector<std::size_t> off;  // m+1 offsets into nbr/coef
  std::vector<std::size_t> nbr;
  std::vector<double> coef;

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    for (std::size_t i = 0; i < m; ++i) {
      double s = diag[i] * x[i];
      for (std::size_t a = off[i]; a < off[i + 1]; ++a) s += coef[a] * x[nbr[a]];
      y[i] = s;
    }
  }
};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Conjugate gradient from x, stopping at max-norm residual <= tol_und.
// Returns iterations used; on exit x holds the solution and converged tells
// whether the recomputed true residual met the tolerance.
struct CgOutcome {
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  // true max-norm residual of the final x
};

CgOutcome conjugate_gradient(const System& sys, std::vector<double>& x,
                             double tol_und, int cap) {
  CgOutcome out;
  std::size_t m = sys.m;
  std::vector<double> r(m), p(m), ap(m);
  for (int restart = 0; restart < 4; ++restart) {
    sys.apply(x, ap);
    for (std::size_t i = 0; i < m; ++i) r[i] = sys.rhs[i] - ap[i];
    out.residual = max_abs(r);
    if (out.residual <= tol_und) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= cap) return out;
    p = r;
    double rr = dot_vec(r, r);
    while (out.iterations < cap) {
      sys.apply(p, ap);
      double pap = dot_vec(p, ap);
      if (!(pap > 0.0)) break;  // loss of positivity from round-off: restart
      double alpha = rr / pap;
      for (std::size_t i = 0; i < m; ++i) x[i] += alpha * p[i];
      for (std::size_t i = 0; i < m; ++i) r[i] -= alpha * ap[i];
      ++out.iterations;
      if (max_abs(r) <= 0.5 * tol_und) break;  // margin for recurrence drift
      double rr_next = dot_vec(r, r);
      double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t i = 0; i < m; ++i) p[i] = r[i] + beta * p[i];
    }
  }
  sys.apply(x, ap);
  for (std::size_t i = 0; i < m; ++i) r[i] = sys.rhs[i] - ap[i];
  out.residual = max_abs(r);
  out.converged = out.residual <= tol_und;
  return out;
}

int iteration_cap(std::size_t m) {
  return 50 * static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m)))) + 100;
}

std::array<long, 3> strides(const Grid& g) {
  if (g.dim == 2) return {g.shape[1], 1, 0};
  return {static_cast<long>(g.shape[1]) * g.shape[2], g.shape[2], 1};
}

}  // namespace

double elliptic_tolerance(double h) { return std::max(1e-10, h * h * h); }

std::vector<std::size_t> free_nodes_in_ball(const Grid& grid, const Ball& ball) {
  std::vector<char> cell_mask(grid.node_count(), 0);
  for_cells_in_ball(grid, ball, [&](int i, int j, int k) {
    cell_mask[grid.index(i, j, k)] = 1;
  });
  auto st = strides(grid);
  std::vector<std::size_t> free;
  for_cells_in_ball(grid, ball, [&](int i, int j, int k) {
    // A node is free when all 2^n cells incident to it are members; then
    // every incident edge carries full weight in the cell-averaged energy and
    // the 5/7-point Laplacian is its exact stationarity condition there.
    std::array<int, 3> p = {i, j, k};
    std::size_t id = grid.index(i, j, k);
    for (int mask = 1; mask < (1 << grid.dim); ++mask) {
      std::size_t nb = id;
      bool ok = true;
      for (int d = 0; d < grid.dim; ++d) {
        if (mask & (1 << d)) {
          if (p[d] == 0) {
            ok = false;
            break;
          }
          nb -= st[d];
        }
      }
      if (!ok || !cell_mask[nb]) return;
    }
    free.push_back(id);
  });
  std::sort(free.begin(), free.end());
  return free;
}

namespace {

EllipticResult solve_ball_dirichlet(const GridFunction& u, const Ball& ball,
                                    const std::vector<std::size_t>& free,
                                    const std::function<double(const Vec&)>* weight) {
  const Grid& g = u.grid;
  require_ball_inside(g, ball, "harmonic_replacement");
  auto st = strides(g);

  std::vector<double> cell_w(weight ? g.node_count() : 0, 0.0);
  for_cells_in_ball(g, ball, [&](int i, int j, int k) {
    if (weight) {
      double w = (*weight)(g.cell_center(i, j, k));
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ValidationError("weighted_replacement: cell weight must be positive and finite");
      }
      cell_w[g.index(i, j, k)] = w;
    }
  });

  std::vector<long> slot(g.node_count(), -1);
  for (std::size_t i = 0; i < free.size(); ++i) slot[free[i]] = static_cast<long>(i);

  System sys;
  sys.m = free.size();
  sys.diag.resize(sys.m);
  sys.rhs.assign(sys.m, 0.0);
  sys.off.assign(sys.m + 1, 0);
  // Weight of the edge with base node `base` along axis d: the mean of the
  // cell weights over the 2^{n-1} cells incident to that edge. Both rows
  // sharing an edge accumulate the mean in the same order, so the assembled
  // matrix is exactly symmetric.
  auto edge_w = [&](std::size_t base, int d) {
    if (!weight) return 1.0;
    double acc = 0.0;
    int n = 0;
    for (int mask = 0; mask < (1 << g.dim); ++mask) {
      if (mask & (1 << d)) continue;
      std::size_t cell_id = base;
      for (int d2 = 0; d2 < g.dim; ++d2) {
        if (mask & (1 << d2)) cell_id -= st[d2];
      }
      acc += cell_w[cell_id];
      ++n;
    }
    return acc / n;
  };

  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < sys.m; ++i) {
      std::size_t id = free[i];
      double d_acc = 0.0;
      std::size_t count = 0;
      for (int d = 0; d < g.dim; ++d) {
        // +e_d edge has base node id; -e_d edge has base node id - e_d.
        const std::array<std::pair<long, std::size_t>, 2> legs = {
            std::make_pair(st[d], id), std::make_pair(-st[d], id - st[d])};
        for (const auto& [step, edge_base] : legs) {
          double w = edge_w(edge_base, d);
          d_acc += w;
          std::size_t q = id + step;
          if (pass == 1) {
            if (slot[q] >= 0) {
              sys.nbr[sys.off[i] + count] = static_cast<std::size_t>(slot[q]);
              sys.coef[sys.off[i] + count] = -w;
              ++count;
            } else {
              sys.rhs[i] += w * u.values[q];
            }
          } else if (slot[q] >= 0) {
            ++count;
          }
        }
      }
      if (pass == 0) {
        sys.off[i + 1] = count;
        sys.diag[i] = d_acc;
      }
    }
    if (pass == 0) {
      for (std::size_t i = 0; i < sys.m; ++i) sys.off[i + 1] += sys.off[i];
      sys.nbr.resize(sys.off[sys.m]);
      sys.coef.resize(sys.off[sys.m]);
      std::fill(sys.rhs.begin(), sys.rhs.end(), 0.0);
    }
  }

  double tol = elliptic_tolerance(g.h);
  double tol_und = tol * g.h * g.h;
  std::vector<double> x(sys.m);
  for (std::size_t i = 0; i < sys.m; ++i) x[i] = u.values[free[i]];
  CgOutcome cg = conjugate_gradient(sys, x, tol_und, iteration_cap(sys.m));
  if (!cg.converged) {
    throw NumericalError("harmonic replacement: CG did not reach residual " +
                         std::to_string(tol) + " within iteration cap");
  }

  EllipticResult res;
  res.v = u;
  if (cg.iterations > 0) {
    for (std::size_t i = 0; i < sys.m; ++i) res.v.values[free[i]] = x[i];
  }
  res.diag.iterations = cg.iterations;
  res.diag.residual = cg.residual / (g.h * g.h);
  res.diag.tolerance = tol;
  res.diag.converged = true;
  return res;
}

}  // namespace

EllipticResult harmonic_replacement(const GridFunction& u, const Ball& ball) {
  return solve_ball_dirichlet(u, ball, free_nodes_in_ball(u.grid, ball), nullptr);
}

EllipticResult weighted_replacement(const GridFunction& u, const Ball& ball,
                                    const std::function<double(const Vec&)>& cell_weight) {
  return solve_ball_dirichlet(u, ball, free_nodes_in_ball(u.grid, ball), &cell_weight);
}

EllipticResult dirichlet_solve_on_set(const GridFunction& fixed, const Ball& ball,
                                      const std::vector<std::size_t>& free_subset,
                                      const std::function<double(const Vec&)>* cell_weight) {
  std::vector<char> eligible(fixed.grid.node_count(), 0);
  for (std::size_t id : free_nodes_in_ball(fixed.grid, ball)) eligible[id] = 1;
  for (std::size_t id : free_subset) {
    if (id >= eligible.size() || !eligible[id]) {
      throw ValidationError("dirichlet_solve_on_set: node outside the ball's free set");
    }
  }
  if (free_subset.empty()) {
    EllipticResult res;
    res.v = fixed;
    res.diag.tolerance = elliptic_tolerance(fixed.grid.h);
    res.diag.converged = true;
    return res;
  }
  return solve_ball_dirichlet(fixed, ball, free_subset, cell_weight);
}

ClosenessReport closeness_check(const GridFunction& u, const Ball& ball, double sigma) {
  if (sigma < 0.0) throw ValidationError("closeness_check: sigma must be >= 0");
  if (!positive_on_ball(u, ball)) {
    throw ValidationError("closeness_check: u must be positive on the closed ball");
  }
  EllipticResult rep = harmonic_replacement(u, ball);
  Ball half{ball.center, 0.5 * ball.radius};
  double sup = 0.0;
  for_nodes_in_ball(u.grid, half, [&](int i, int j, int k) {
    sup = std::max(sup, std::abs(u.at(i, j, k) - rep.v.at(i, j, k)));
  });
  ClosenessReport rpt;
  rpt.sup_diff = sup;
  if (sigma > 0.0) {
    rpt.implied_constant = sup / std::pow(sigma, 1.0 / (u.grid.dim + 2));
  } else {
    rpt.implied_constant = sup > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return rpt;
}

NeumannResult neumann_halfball_solve(const GridFunction& g, const Ball& ball) {
  const Grid& grid = g.grid;
  require_ball_inside(grid, ball, "neumann_halfball_solve");
  int n = grid.dim - 1;  // flat axis
  double plane = ball.center[n];
  double tpos = (plane - grid.bounds[n].lo) / grid.h;
  int j0 = static_cast<int>(std::lround(tpos));
  if (std::abs(tpos - j0) > 1e-9) {
    throw ValidationError("neumann_halfball_solve: ball center must sit on a node plane");
  }
  auto st = strides(grid);

  // Domain: closed half ball x_n >= plane. 0 = outside, 1 = member.
  std::vector<char> member(grid.node_count(), 0);
  std::vector<std::size_t> domain;
  for_nodes_in_ball(grid, ball, [&](int i, int j, int k) {
    std::array<int, 3> p = {i, j, k};
    if (p[n] < j0) return;
    std::size_t id = grid.index(i, j, k);
    member[id] = 1;
    domain.push_back(id);
  });

  // Free nodes: every referenced neighbor (ghost-reflected on the flat plane)
  // is a member.
  std::vector<long> slot(grid.node_count(), -1);
  std::vector<std::size_t> free;
  std::vector<char> on_flat(grid.node_count(), 0);
  {
    for (std::size_t id : domain) {
      // Decode the flat-axis coordinate from the node position.
      std::size_t rem = id;
      std::array<int, 3> p = {0, 0, 0};
      if (grid.dim == 2) {
        p[0] = static_cast<int>(rem / st[0]);
        p[1] = static_cast<int>(rem % st[0]);
      } else {
        p[0] = static_cast<int>(rem / st[0]);
        rem %= st[0];
        p[1] = static_cast<int>(rem / st[1]);
        p[2] = static_cast<int>(rem % st[1]);
      }
      bool flat = p[n] == j0;
      on_flat[id] = flat ? 1 : 0;
      bool ok = true;
      for (int d = 0; d < grid.dim && ok; ++d) {
        bool need_minus = !(d == n && flat);
        if (p[d] + 1 >= grid.shape[d] || !member[id + st[d]]) ok = false;
        if (ok && need_minus && (p[d] == 0 || !member[id - st[d]])) ok = false;
      }
      if (ok) {
        slot[id] = static_cast<long>(free.size());
        free.push_back(id);
      }
    }
  }

  // Flat-plane rows are scaled by 1/2 so the ghost-reflected system stays
  // symmetric: flat row = n*u - (1/2) sum in-plane - 1*up.
  System sys;
  sys.m = free.size();
  sys.diag.resize(sys.m);
  sys.rhs.assign(sys.m, 0.0);
  sys.off.assign(sys.m + 1, 0);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < sys.m; ++i) {
      std::size_t id = free[i];
      bool flat = on_flat[id] != 0;
      double row_scale = flat ? 0.5 : 1.0;
      double d_acc = 0.0;
      std::size_t count = 0;
      for (int d = 0; d < grid.dim; ++d) {
        for (int sgn = 0; sgn < 2; ++sgn) {
          long step = sgn == 0 ? st[d] : -st[d];
          if (d == n && flat && sgn == 1) step = st[d];  // ghost reflection
          double w = row_scale;
          d_acc += w;
          std::size_t q = id + step;
          if (pass == 1) {
            if (slot[q] >= 0) {
              sys.nbr[sys.off[i] + count] = static_cast<std::size_t>(slot[q]);
              sys.coef[sys.off[i] + count] = -w;
              ++count;
            } else {
              sys.rhs[i] += w * g.values[q];
            }
          } else if (slot[q] >= 0) {
            ++count;
          }
        }
      }
      if (pass == 0) {
        sys.off[i + 1] = count;
        sys.diag[i] = d_acc;
      }
    }
    if (pass == 0) {
      for (std::size_t i = 0; i < sys.m; ++i) sys.off[i + 1] += sys.off[i];
      sys.nbr.resize(sys.off[sys.m]);
      sys.coef.resize(sys.off[sys.m]);
      std::fill(sys.rhs.begin(), sys.rhs.end(), 0.0);
    }
  }

  double tol = elliptic_tolerance(grid.h);
  double tol_und = 0.5 * tol * grid.h * grid.h;  // flat rows carry half scale
  std::vector<double> x(sys.m);
  for (std::size_t i = 0; i < sys.m; ++i) x[i] = g.values[free[i]];
  CgOutcome cg = conjugate_gradient(sys, x, tol_und, iteration_cap(sys.m));
  if (!cg.converged) {
    throw NumericalError("neumann_halfball_solve: CG did not converge within iteration cap");
  }

  NeumannResult res;
  res.v = g;
  if (cg.iterations > 0) {
    for (std::size_t i = 0; i < sys.m; ++i) res.v.values[free[i]] = x[i];
  }
  res.diag.iterations = cg.iterations;
  res.diag.residual = cg.residual / (0.5 * grid.h * grid.h);
  res.diag.tolerance = tol;
  res.diag.converged = true;
  double fnd = 0.0;
  for (std::size_t i = 0; i < sys.m; ++i) {
    if (on_flat[free[i]]) {
      double diff = (res.v.values[free[i] + st[n]] - res.v.values[free[i]]) / grid.h;
      fnd = std::max(fnd, std::abs(diff));
    }
  }
  res.flat_normal_diff = fnd;
  return res;
}

}  // namespace fblab
