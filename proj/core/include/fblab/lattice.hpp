#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fblab/common.hpp"

namespace fblab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

// Uniform lattice over an axis-aligned box in 2D or 3D. Node (i,j[,k]) sits
// at bounds[d].lo + i*h along each axis; spacing h is shared by all axes.
struct Grid {
  int dim = 2;
  std::array<Interval, 3> bounds{};
  double h = 0.0;
  std::array<int, 3> shape = {1, 1, 1};  // node counts; 1 on unused axes

  std::size_t node_count() const {
    std::size_t n = 1;
    for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(shape[d]);
    return n;
  }

  // Row-major: axis 0 slowest, last axis fastest.
  std::size_t index(int i, int j, int k = 0) const {
    if (dim == 2) return static_cast<std::size_t>(i) * shape[1] + j;
    return (static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k;
  }

  Vec node(int i, int j, int k = 0) const {
    Vec p{bounds[0].lo + i * h, bounds[1].lo + j * h, 0.0};
    if (dim == 3) p[2] = bounds[2].lo + k * h;
    return p;
  }

  // Number of cells along axis d.
  int cells(int d) const { return shape[d] - 1; }

  Vec cell_center(int i, int j, int k = 0) const {
    Vec p = node(i, j, k);
    for (int d = 0; d < dim; ++d) p[d] += 0.5 * h;
    return p;
  }

  double cell_volume() const {
    double v = h * h;
    if (dim == 3) v *= h;
    return v;
  }

  bool contains(const Vec& p, double tol = 1e-12) const {
    for (int d = 0; d < dim; ++d) {
      if (p[d] < bounds[d].lo - tol || p[d] > bounds[d].hi + tol) return false;
    }
    return true;
  }

  // Index of the node nearest to p (clamped to the grid).
  std::array<int, 3> nearest_node(const Vec& p) const;
};

// h > 0 and every side length an integer multiple of h (1e-12 relative).
Grid make_grid(const std::vector<Interval>& bounds, double h);

enum class FieldRole {
  Nonnegative,  // a candidate u: values >= 0 enforced at construction
  Signed,       // general scalar field
};

// Scalar field sampled at grid nodes. Treated as an immutable value after
// construction; all operations are pure and return new fields.
struct GridFunction {
  Grid grid;
  FieldRole role = FieldRole::Nonnegative;
  std::vector<double> values;

  double at(int i, int j, int k = 0) const { return values[grid.index(i, j, k)]; }
  double& at(int i, int j, int k = 0) { return values[grid.index(i, j, k)]; }

  // Bilinear/trilinear interpolation at an arbitrary point inside the box.
  double interpolate(const Vec& p) const;

  double max_value() const;
  double min_value() const;
};

// Nodewise evaluation. For Nonnegative role, negative round-off of magnitude
// < 1e-14 is clamped to 0 and anything more negative is rejected.
GridFunction sample(const Grid& grid, FieldRole role,
                    const std::function<double(const Vec&)>& f);

GridFunction make_constant(const Grid& grid, FieldRole role, double value);

struct Ball {
  Vec center{0.0, 0.0, 0.0};
  double radius = 1.0;
};

inline Ball unit_ball() { return Ball{{0.0, 0.0, 0.0}, 1.0}; }

// Closed ball inside the grid box (1e-12 slack).
bool ball_inside_grid(const Grid& grid, const Ball& ball);
void require_ball_inside(const Grid& grid, const Ball& ball, const std::string& op);

// Visits every cell whose center lies strictly inside the ball, by base-node
// index. The base node of a cell is its lexicographically smallest corner.
void for_cells_in_ball(const Grid& grid, const Ball& ball,
                       const std::function<void(int, int, int)>& visit);

// Visits every node inside the closed ball.
void for_nodes_in_ball(const Grid& grid, const Ball& ball,
                       const std::function<void(int, int, int)>& visit);

// Forward-difference gradient of the cell with base node (i,j,k): one
// gradient per cell, component d = (u[base+e_d]-u[base])/h.
Vec cell_gradient(const GridFunction& u, int i, int j, int k = 0);

// Mean over the cell's 2^n corner-anchored gradients; component d is the
// average slope of the 2^{n-1} edges parallel to axis d.
Vec cell_average_gradient(const GridFunction& u, int i, int j, int k = 0);

// Mean over the cell's 2^n corner-anchored gradients of |grad u|^2; this is
// the integrand dirichlet_energy assigns to the cell.
double cell_mean_square_gradient(const GridFunction& u, int i, int j, int k = 0);

// Integral of |grad u|^2 over the cells with center in B. Cell contributions
// are summed in canonical (sorted) order so lattice-symmetric inputs give
// bit-identical results.
double dirichlet_energy(const GridFunction& u, const Ball& ball);

// Measure of the cells with center in B that lie in {u > 0}: a cell counts
// when u > 0 (strict) at all of its corners, which keeps the count exactly
// invariant under lattice reflections and 90-degree rotations.
double positivity_measure(const GridFunction& u, const Ball& ball);

// Measure of the cells with center in B on which u vanishes identically
// (all corner values equal to 0).
double zero_cell_measure(const GridFunction& u, const Ball& ball);

// min over the cell's corners of u.
double cell_min(const GridFunction& u, int i, int j, int k = 0);
double cell_max(const GridFunction& u, int i, int j, int k = 0);

// True when u > 0 at every node of the closed ball.
bool positive_on_ball(const GridFunction& u, const Ball& ball);

}  // namespace fblab
