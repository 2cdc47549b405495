#pragma once

#include <array>
#include <string>
#include <vector>

#include "fblab/lattice.hpp"

namespace fblab {

// How far u deviates from the half-plane profile ((x - c) . nu)+ on a ball,
// normalized by the scale: epsilon = sup_B |u - profile| / r.
struct FlatnessCertificate {
  double r = 1.0;
  Vec nu{0.0, 1.0, 0.0};
  double epsilon = 0.0;

  std::string to_json() const;
};

double flatness(const GridFunction& u, const Ball& ball, const Vec& nu);

// Direction search: 720 uniform angles (2D) / 2048 Fibonacci directions (3D)
// refined once by local bisection.
FlatnessCertificate best_direction(const GridFunction& u, const Ball& ball);

// The epsilon-scaled function (u - x_n)/epsilon in rotated coordinates with nu
// as the vertical axis, defined on positivity nodes of the unit ball. Partial:
// `defined` marks nodes where u (interpolated at the rotated point) is
// positive and inside the source box.
struct ScaledField {
  GridFunction v;
  std::vector<char> defined;
};

ScaledField epsilon_rescale(const GridFunction& u, double eps, const Vec& nu);

// Solves the linearized half-ball problem (harmonic in the upper half ball of
// radius 1/2, zero vertical derivative on the flat bottom) with curved
// boundary data sampled from the epsilon-scaled function, and returns the sup
// distance between the two on the quarter ball above height 2 eps. A small
// residual is the finite-scale shadow of the compactness argument.
double linearization_residual(const GridFunction& u, double eps, const Vec& nu);

struct FlatnessStep {
  int k = 0;                    // step index: compares scales eta^k -> eta^{k+1}
  FlatnessCertificate cert;     // certificate at radius eta^{k+1}
  double decay = 0.0;           // eps_{k+1} / eps_k
  double bound = 0.0;           // eta^{1+alpha} + 20 h / eps_k
  bool decay_ok = false;
  double sigma_k = 0.0;         // kappa eta^{k beta}
  double sigma_gate = 0.0;      // eps_k^{n+4}
  bool sigma_ok = false;
};

struct FlatnessIteration {
  std::vector<FlatnessCertificate> certificates;  // scales eta^0, eta^1, ...
  std::vector<FlatnessStep> steps;
  bool all_verified = true;  // every step passed both the decay and sigma checks
  std::string note;

  std::string to_csv() const;  // decay table, one row per step
};

// One improvement step: requires the origin on the free boundary, u eps-flat
// on the unit ball, and the declared energy defect sigma <= eps^{n+4}; returns
// the best certificate at scale eta.
FlatnessCertificate improve_flatness(const GridFunction& u, double eps, double alpha,
                                     double eta = 0.125, double sigma = 0.0);

// Repeats the measurement on the shrinking balls B_{eta^k} down to the mesh
// floor (radius >= 8h), recording per-step decay factors against
// eta^{1+alpha} + 20 h / eps_k and the almost-minimality bookkeeping
// sigma_k = kappa eta^{k beta} against eps_k^{n+4}. Every factor is
// recomputed from raw grid data. Failing steps are flagged, not thrown.
FlatnessIteration iterate_flatness(const GridFunction& u, double eps0, double alpha,
                                   double eta = 0.125, double kappa = 0.0,
                                   double beta = 1.0);

// Sub-grid free boundary: points where u crosses the h/2 threshold along
// lattice edges (linear interpolation), cell-wise adjacency segments, and a
// per-point unit normal from the interpolated gradient (zero vector where the
// gradient degenerates).
struct FreeBoundary {
  std::vector<Vec> points;
  std::vector<std::array<std::size_t, 2>> edges;
  std::vector<Vec> normals;
  double h = 0.0;  // spacing of the source grid
  int dim = 2;

  std::string to_csv() const;  // x,y,z,nx,ny,nz rows
};

FreeBoundary extract_free_boundary(const GridFunction& u);

struct HausdorffEstimate {
  double dimension = 0.0;        // fitted box-counting slope
  double content = 0.0;          // N(s_min) * s_min^{n-1} at the finest scale
  double polyline_length = 0.0;  // 2D: total length of adjacency segments in the ball
  std::vector<std::array<double, 2>> counts;  // (box size, box count) per dyadic scale

  std::string to_csv() const;  // scale,count rows
};

// Box counting over dyadic box sizes in [4h, 1/4] restricted to the ball.
HausdorffEstimate hausdorff_estimate(const FreeBoundary& fb, const Ball& ball);

// Least-squares graph fit of the free boundary over the window in the frame
// of its mean normal; returns a Holder-quotient seminorm of the graph
// (2D: local slopes by least squares over 8h-wide blocks, largest pairwise
// |slope_p - slope_q| / separation^alpha between block centers — extracted
// points alias at the cell scale, so slopes are only resolved above the mesh
// floor; 3D: plane-fit residual against the window radius^{1+alpha}).
double c1alpha_fit(const FreeBoundary& fb, const Ball& window, double alpha);

}  // namespace fblab
