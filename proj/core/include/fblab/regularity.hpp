#pragma once

#include <string>
#include <vector>

#include "fblab/elliptic.hpp"
#include "fblab/lattice.hpp"

namespace fblab {

// Root-mean-square gradient a = (avg over B of |grad u|^2)^{1/2}, using the
// same cell-averaged integrand as dirichlet_energy.
double average_gradient(const GridFunction& u, const Ball& ball);

enum class DichotomyVariant { Decay, GradientFlat };

struct DichotomyOutcome {
  DichotomyVariant variant = DichotomyVariant::Decay;
  double a = 0.0;          // input average on B_1
  double a_eta = 0.0;      // recomputed average on B_eta
  Vec q{0.0, 0.0, 0.0};    // GradientFlat: gradient of the harmonic replacement at 0
  double deviation = 0.0;  // GradientFlat: (avg_{B_eta} |grad u - q|^2)^{1/2}
  double C0_measured = 0.0;  // |q| / a, logged for the slope window
};

// Large-average dichotomy on B_1: either the average gradient halves at scale
// eta, or u is gradient-flat there (close to a linear function whose slope is
// the harmonic replacement's gradient at the center, within eps*a, with
// |q| > a/4). Requires a >= M; both alternatives are re-verified from raw
// grid data and a ClaimError is thrown if neither holds.
DichotomyOutcome dichotomy_step(const GridFunction& u, double eps, double eta, double M);

enum class CampanatoGate { SlopeWindow, MeanLowerBound };

struct CampanatoRecord {
  int k = 0;
  double r = 0.0;
  Vec q{0.0, 0.0, 0.0};    // average gradient vector over B_r
  double deviation = 0.0;  // (avg_{B_r} |grad u - q|^2)^{1/2}
  double bound = 0.0;      // eps * r^alpha * a
  bool within = false;
};

struct CampanatoTrace {
  std::vector<CampanatoRecord> records;
  std::vector<double> increments;  // |q_{k+1} - q_k|
  double a = 0.0;                  // average gradient on B_1
  double alpha = 0.0;              // requested exponent
  double fitted_exponent = 0.0;    // log-log regression of deviation vs scale
  bool verified = false;
  std::string gate_used;
};

// Geometric-scale Campanato iteration around the grid center: records the
// best-fit slope (the average gradient vector) and the rms deviation on each
// B_{rho^k} down to the mesh floor 16h. "Verified" requires every deviation
// to satisfy deviation_k <= eps * r^alpha * a and every slope increment to
// satisfy |q_{k+1} - q_k| <= c_tilde * eps * rho^{k beta / 2} * a.
CampanatoTrace campanato_iterate(const GridFunction& u, const Vec& q0, double alpha,
                                 double rho, double eps, CampanatoGate gate,
                                 double beta = 1.0, double c_tilde = 8.0);

struct LipschitzOptions {
  double M = 10.0;
  double eta = 0.125;
  double eps = 0.05;
};

struct CascadeEntry {
  int k = 0;
  double r = 0.0;
  double a_k = 0.0;
  double bound = 0.0;  // C(eta) M + 2^{-k} a(1)
  bool within = false;
  int dichotomy = -1;  // -1 none, 0 Decay, 1 GradientFlat
  std::string note;
};

struct LipschitzCertificate {
  double value = 0.0;       // discrete sup of |grad u| over cells meeting B_{1/2}
  double a1 = 0.0;          // average gradient on B_1
  double C_eta = 0.0;       // 2 eta^{-n/2}, the cascade constant
  double C_measured = 0.0;  // value / (1 + a1)
  bool certified = false;
  std::vector<CascadeEntry> cascade;
};

// Multi-scale gradient-average cascade: checks a(eta^k) <= C(eta) M + 2^{-k} a(1)
// for every scale above the mesh floor, invoking dichotomy_step on the
// rescaled field at each failing scale. The certificate value is the discrete
// max of the cell-averaged |grad u| over B_{1/2}.
LipschitzCertificate lipschitz_certificate(const GridFunction& u,
                                           const LipschitzOptions& opt = {});

// Harnack-type gap propagation: with B inside {u > 0}, w discretely harmonic,
// u >= w on B, and a center gap of at least mu, returns
// min over B_{1/2-radius} of (u - w)/mu. With from_above, the roles flip
// (w >= u, center gap (w - u) >= mu). The caller declares sigma, which must
// satisfy sigma <= mu^{n+3}. Every precondition failure is named.
double harnack_gap(const GridFunction& u, const GridFunction& w, const Ball& ball,
                   double mu, double sigma = 0.0, bool from_above = false);

// Center value of u on a ball contained in the positivity set; the caller
// declares sigma (logged by callers, not gated here beyond non-negativity).
double weak_nondegeneracy(const GridFunction& u, const Ball& ball, double sigma);

struct NondegRecord {
  double r = 0.0;
  double ratio = 0.0;  // max_{B_r(x0)} u / r
};

// Growth ratios max_{B_r(x0)} u / r at a free boundary point, one per radius.
// Each radius must be at least 8h with the ball inside the grid.
std::vector<NondegRecord> strong_nondegeneracy(const GridFunction& u, const Vec& x0,
                                               const std::vector<double>& radii);

// W(r) = r^{-n} int_{B_r(x0)} (|grad u|^2 + chi_{u>0})
//        - r^{-n-1} int_{boundary} u^2,
// with the boundary integral by trapezoidal quadrature on the interpolated
// circle (2D) or sphere (3D).
double weiss_energy(const GridFunction& u, const Vec& x0, double r);

struct WeissProfile {
  Vec center{0.0, 0.0, 0.0};
  std::vector<double> radii;   // strictly increasing
  std::vector<double> values;  // W(r)
};

WeissProfile weiss_profile(const GridFunction& u, const Vec& x0,
                           const std::vector<double>& radii);

struct BlowupRecord {
  double r = 0.0;
  GridFunction field;        // rescale(u, r, x0)
  Vec nu{0.0, 0.0, 0.0};     // best half-plane direction
  double fit_error = 0.0;    // sup over B_1 of |field - (x.nu)+|
  double fb_hausdorff = 0.0; // Hausdorff distance, FB vs fitted hyperplane, in B_{1/2}
};

// Blow-up diagnostics at a free boundary point: rescales u at each radius
// (decreasing, each at least 16h) and fits the nearest half-plane profile by
// a direction sweep, reporting the sup distance and the Hausdorff distance
// between the rescaled free boundary and the fitted hyperplane.
std::vector<BlowupRecord> blowup_sequence(const GridFunction& u, const Vec& x0,
                                          const std::vector<double>& radii);

// CSV serializations (scale,value columns) for plotting.
std::string to_csv(const WeissProfile& profile);
std::string to_csv(const CampanatoTrace& trace);

}  // namespace fblab
