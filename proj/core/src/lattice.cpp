#include "fblab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fblab {

namespace {

// Per-axis base-index range of cells whose center can lie in the ball.
struct AxisRange {
  int lo = 0;
  int hi = -1;
};

AxisRange cell_range(const Grid& grid, const Ball& ball, int d) {
  double zlo = ball.center[d] - ball.radius;
  double zhi = ball.center[d] + ball.radius;
  int lo = static_cast<int>(std::ceil((zlo - grid.bounds[d].lo - 0.5 * grid.h) / grid.h - 1e-9));
  int hi = static_cast<int>(std::floor((zhi - grid.bounds[d].lo - 0.5 * grid.h) / grid.h + 1e-9));
  lo = std::max(lo, 0);
  hi = std::min(hi, grid.cells(d) - 1);
  return {lo, hi};
}

AxisRange node_range(const Grid& grid, const Ball& ball, int d) {
  double zlo = ball.center[d] - ball.radius;
  double zhi = ball.center[d] + ball.radius;
  int lo = static_cast<int>(std::ceil((zlo - grid.bounds[d].lo) / grid.h - 1e-9));
  int hi = static_cast<int>(std::floor((zhi - grid.bounds[d].lo) / grid.h + 1e-9));
  lo = std::max(lo, 0);
  hi = std::min(hi, grid.shape[d] - 1);
  return {lo, hi};
}

double dist2_to_center(const Vec& p, const Ball& ball, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    double t = p[d] - ball.center[d];
    s += t * t;
  }
  return s;
}

}  // namespace

std::array<int, 3> Grid::nearest_node(const Vec& p) const {
  std::array<int, 3> idx = {0, 0, 0};
  for (int d = 0; d < dim; ++d) {
    int i = static_cast<int>(std::lround((p[d] - bounds[d].lo) / h));
    idx[d] = std::clamp(i, 0, shape[d] - 1);
  }
  return idx;
}

Grid make_grid(const std::vector<Interval>& bounds, double h) {
  if (bounds.size() != 2 && bounds.size() != 3) {
    throw ValidationError("make_grid: dimension must be 2 or 3, got " +
                          std::to_string(bounds.size()));
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ValidationError("make_grid: spacing h must be positive and finite");
  }
  Grid grid;
  grid.dim = static_cast<int>(bounds.size());
  grid.h = h;
  for (int d = 0; d < grid.dim; ++d) {
    const Interval& iv = bounds[d];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo)) {
      throw ValidationError("make_grid: axis " + std::to_string(d) +
                            " bounds are not a nonempty finite interval");
    }
    double ratio = iv.length() / h;
    double cells = std::round(ratio);
    if (std::abs(ratio - cells) > 1e-12 * std::max(1.0, ratio) || cells < 1.0) {
      std::ostringstream msg;
      msg << "make_grid: axis " << d << " length " << iv.length()
          << " is not an integer multiple of h=" << h;
      throw ValidationError(msg.str());
    }
    grid.bounds[d] = iv;
    grid.shape[d] = static_cast<int>(cells) + 1;
  }
  return grid;
}

double GridFunction::interpolate(const Vec& p) const {
  const Grid& g = grid;
  std::array<int, 3> base = {0, 0, 0};
  std::array<double, 3> w = {0.0, 0.0, 0.0};
  for (int d = 0; d < g.dim; ++d) {
    double t = (p[d] - g.bounds[d].lo) / g.h;
    int i = static_cast<int>(std::floor(t));
    i = std::clamp(i, 0, g.shape[d] - 2);
    base[d] = i;
    w[d] = std::clamp(t - i, 0.0, 1.0);
  }
  if (g.dim == 2) {
    double v00 = at(base[0], base[1]);
    double v10 = at(base[0] + 1, base[1]);
    double v01 = at(base[0], base[1] + 1);
    double v11 = at(base[0] + 1, base[1] + 1);
    double a = v00 * (1 - w[0]) + v10 * w[0];
    double b = v01 * (1 - w[0]) + v11 * w[0];
    return a * (1 - w[1]) + b * w[1];
  }
  double acc = 0.0;
  for (int ci = 0; ci < 2; ++ci) {
    for (int cj = 0; cj < 2; ++cj) {
      for (int ck = 0; ck < 2; ++ck) {
        double weight = (ci ? w[0] : 1 - w[0]) * (cj ? w[1] : 1 - w[1]) *
                        (ck ? w[2] : 1 - w[2]);
        acc += weight * at(base[0] + ci, base[1] + cj, base[2] + ck);
      }
    }
  }
  return acc;
}

double GridFunction::max_value() const {
  return *std::max_element(values.begin(), values.end());
}

double GridFunction::min_value() const {
  return *std::min_element(values.begin(), values.end());
}

GridFunction sample(const Grid& grid, FieldRole role,
                    const std::function<double(const Vec&)>& f) {
  GridFunction u;
  u.grid = grid;
  u.role = role;
  u.values.resize(grid.node_count());
  int nk = grid.dim == 3 ? grid.shape[2] : 1;
  for (int i = 0; i < grid.shape[0]; ++i) {
    for (int j = 0; j < grid.shape[1]; ++j) {
      for (int k = 0; k < nk; ++k) {
        Vec p = grid.node(i, j, k);
        double v = f(p);
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << "sample: non-finite value at node (" << p[0] << ", " << p[1];
          if (grid.dim == 3) msg << ", " << p[2];
          msg << ")";
          throw ValidationError(msg.str());
        }
        if (role == FieldRole::Nonnegative && v < 0.0) {
          if (v > -1e-14) {
            v = 0.0;
          } else {
            std::ostringstream msg;
            msg << "sample: negative value " << v << " for nonnegative field at node ("
                << p[0] << ", " << p[1];
            if (grid.dim == 3) msg << ", " << p[2];
            msg << ")";
            throw ValidationError(msg.str());
          }
        }
        u.values[grid.index(i, j, k)] = v;
      }
    }
  }
  return u;
}

GridFunction make_constant(const Grid& grid, FieldRole role, double value) {
  if (role == FieldRole::Nonnegative && value < 0.0) {
    throw ValidationError("make_constant: negative value for nonnegative field");
  }
  GridFunction u;
  u.grid = grid;
  u.role = role;
  u.values.assign(grid.node_count(), value);
  return u;
}

bool ball_inside_grid(const Grid& grid, const Ball& ball) {
  if (!(ball.radius > 0.0)) return false;
  for (int d = 0; d < grid.dim; ++d) {
    if (ball.center[d] - ball.radius < grid.bounds[d].lo - 1e-12) return false;
    if (ball.center[d] + ball.radius > grid.bounds[d].hi + 1e-12) return false;
  }
  return true;
}

void require_ball_inside(const Grid& grid, const Ball& ball, const std::string& op) {
  if (!ball_inside_grid(grid, ball)) {
    std::ostringstream msg;
    msg << op << ": ball of radius " << ball.radius << " at (" << ball.center[0]
        << ", " << ball.center[1];
    if (grid.dim == 3) msg << ", " << ball.center[2];
    msg << ") is not contained in the grid box";
    throw ValidationError(msg.str());
  }
}

void for_cells_in_ball(const Grid& grid, const Ball& ball,
                       const std::function<void(int, int, int)>& visit) {
  double r2 = ball.radius * ball.radius;
  AxisRange ri = cell_range(grid, ball, 0);
  AxisRange rj = cell_range(grid, ball, 1);
  AxisRange rk = grid.dim == 3 ? cell_range(grid, ball, 2) : AxisRange{0, 0};
  for (int i = ri.lo; i <= ri.hi; ++i) {
    for (int j = rj.lo; j <= rj.hi; ++j) {
      for (int k = rk.lo; k <= rk.hi; ++k) {
        Vec c = grid.cell_center(i, j, k);
        if (dist2_to_center(c, ball, grid.dim) < r2) visit(i, j, k);
      }
    }
  }
}

void for_nodes_in_ball(const Grid& grid, const Ball& ball,
                       const std::function<void(int, int, int)>& visit) {
  double r2 = ball.radius * ball.radius + 1e-12;
  AxisRange ri = node_range(grid, ball, 0);
  AxisRange rj = node_range(grid, ball, 1);
  AxisRange rk = grid.dim == 3 ? node_range(grid, ball, 2) : AxisRange{0, 0};
  for (int i = ri.lo; i <= ri.hi; ++i) {
    for (int j = rj.lo; j <= rj.hi; ++j) {
      for (int k = rk.lo; k <= rk.hi; ++k) {
        Vec p = grid.node(i, j, k);
        if (dist2_to_center(p, ball, grid.dim) <= r2) visit(i, j, k);
      }
    }
  }
}

Vec cell_gradient(const GridFunction& u, int i, int j, int k) {
  const Grid& g = u.grid;
  Vec grad{0.0, 0.0, 0.0};
  double base = u.at(i, j, k);
  grad[0] = (u.at(i + 1, j, k) - base) / g.h;
  grad[1] = (u.at(i, j + 1, k) - base) / g.h;
  if (g.dim == 3) grad[2] = (u.at(i, j, k + 1) - base) / g.h;
  return grad;
}

namespace {

// Squared slopes of every edge of the cell with base (i,j,k), axis-major
// order; returns the factor turning their sum into the cell's mean squared
// corner gradient.
double cell_edge_slopes_sq(const GridFunction& u, int i, int j, int k,
                           std::array<double, 12>& sq) {
  const Grid& g = u.grid;
  int count = 0;
  if (g.dim == 2) {
    const double c00 = u.at(i, j), c10 = u.at(i + 1, j);
    const double c01 = u.at(i, j + 1), c11 = u.at(i + 1, j + 1);
    const double d0a = c10 - c00, d0b = c11 - c01;
    const double d1a = c01 - c00, d1b = c11 - c10;
    sq[0] = d0a * d0a;
    sq[1] = d0b * d0b;
    sq[2] = d1a * d1a;
    sq[3] = d1b * d1b;
    count = 4;
  } else {
    for (int d = 0; d < 3; ++d) {
      for (int s0 = 0; s0 < 2; ++s0) {
        for (int s1 = 0; s1 < 2; ++s1) {
          int a[3] = {i, j, k};
          int b[3] = {i, j, k};
          int o0 = (d + 1) % 3, o1 = (d + 2) % 3;
          a[o0] += s0;
          a[o1] += s1;
          b[o0] += s0;
          b[o1] += s1;
          b[d] += 1;
          double diff = u.at(b[0], b[1], b[2]) - u.at(a[0], a[1], a[2]);
          sq[count++] = diff * diff;
        }
      }
    }
  }
  return 1.0 / (g.h * g.h * double(1 << (g.dim - 1)));
}

}  // namespace

Vec cell_average_gradient(const GridFunction& u, int i, int j, int k) {
  const Grid& g = u.grid;
  Vec grad{0.0, 0.0, 0.0};
  if (g.dim == 2) {
    grad[0] = (u.at(i + 1, j) - u.at(i, j) + u.at(i + 1, j + 1) - u.at(i, j + 1)) /
              (2.0 * g.h);
    grad[1] = (u.at(i, j + 1) - u.at(i, j) + u.at(i + 1, j + 1) - u.at(i + 1, j)) /
              (2.0 * g.h);
  } else {
    for (int d = 0; d < 3; ++d) {
      int o0 = (d + 1) % 3, o1 = (d + 2) % 3;
      double acc = 0.0;
      for (int s0 = 0; s0 < 2; ++s0) {
        for (int s1 = 0; s1 < 2; ++s1) {
          int a[3] = {i, j, k};
          a[o0] += s0;
          a[o1] += s1;
          int b[3] = {a[0], a[1], a[2]};
          b[d] += 1;
          acc += u.at(b[0], b[1], b[2]) - u.at(a[0], a[1], a[2]);
        }
      }
      grad[d] = acc / (4.0 * g.h);
    }
  }
  return grad;
}

double cell_mean_square_gradient(const GridFunction& u, int i, int j, int k) {
  std::array<double, 12> sq;
  double scale = cell_edge_slopes_sq(u, i, j, k, sq);
  int m = u.grid.dim * (1 << (u.grid.dim - 1));
  double cell = 0.0;
  for (int e = 0; e < m; ++e) cell += sq[e];
  return cell * scale;
}

double dirichlet_energy(const GridFunction& u, const Ball& ball) {
  const Grid& g = u.grid;
  require_ball_inside(g, ball, "dirichlet_energy");
  std::vector<double> terms;
  std::array<double, 12> sq;
  for_cells_in_ball(g, ball, [&](int i, int j, int k) {
    // Cell energy: average over the 2^n corner-anchored forward-difference
    // gradients, i.e. (1/2^{n-1}) sum of squared slopes over every cell edge.
    // Sorting the squared slopes makes each cell term bit-identical under any
    // symmetry of the cell, so the energy is exactly invariant under
    // lattice-preserving reflections and rotations of u and the ball.
    double scale = cell_edge_slopes_sq(u, i, j, k, sq);
    int m = g.dim * (1 << (g.dim - 1));
    std::sort(sq.begin(), sq.begin() + m);
    double cell = 0.0;
    for (int e = 0; e < m; ++e) cell += sq[e];
    terms.push_back(cell * scale);
  });
  return canonical_sum(terms) * g.cell_volume();
}

double cell_min(const GridFunction& u, int i, int j, int k) {
  const Grid& g = u.grid;
  double m = u.at(i, j, k);
  for (int ci = 0; ci < 2; ++ci) {
    for (int cj = 0; cj < 2; ++cj) {
      if (g.dim == 2) {
        m = std::min(m, u.at(i + ci, j + cj));
      } else {
        for (int ck = 0; ck < 2; ++ck) m = std::min(m, u.at(i + ci, j + cj, k + ck));
      }
    }
  }
  return m;
}

double cell_max(const GridFunction& u, int i, int j, int k) {
  const Grid& g = u.grid;
  double m = u.at(i, j, k);
  for (int ci = 0; ci < 2; ++ci) {
    for (int cj = 0; cj < 2; ++cj) {
      if (g.dim == 2) {
        m = std::max(m, u.at(i + ci, j + cj));
      } else {
        for (int ck = 0; ck < 2; ++ck) m = std::max(m, u.at(i + ci, j + cj, k + ck));
      }
    }
  }
  return m;
}

double positivity_measure(const GridFunction& u, const Ball& ball) {
  const Grid& g = u.grid;
  require_ball_inside(g, ball, "positivity_measure");
  long count = 0;
  for_cells_in_ball(g, ball, [&](int i, int j, int k) {
    if (cell_min(u, i, j, k) > 0.0) ++count;
  });
  return static_cast<double>(count) * g.cell_volume();
}

double zero_cell_measure(const GridFunction& u, const Ball& ball) {
  const Grid& g = u.grid;
  require_ball_inside(g, ball, "zero_cell_measure");
  long count = 0;
  for_cells_in_ball(g, ball, [&](int i, int j, int k) {
    if (cell_min(u, i, j, k) == 0.0 && cell_max(u, i, j, k) == 0.0) ++count;
  });
  return static_cast<double>(count) * g.cell_volume();
}

bool positive_on_ball(const GridFunction& u, const Ball& ball) {
  require_ball_inside(u.grid, ball, "positive_on_ball");
  bool ok = true;
  for_nodes_in_ball(u.grid, ball, [&](int i, int j, int k) {
    if (!(u.at(i, j, k) > 0.0)) ok = false;
  });
  return ok;
}

}  // namespace fblab
