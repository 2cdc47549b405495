#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fblab/common.hpp"
#include "fblab/lattice.hpp"

namespace fblab {

using Mat3 = std::array<Vec, 3>;

// P(x) = c + b.x + (1/2) x^T A x with A symmetric. Only the leading dim-by-dim
// block of A and the first dim entries of b participate in evaluation.
struct QuadraticPolynomial {
  double c = 0.0;
  Vec b{0.0, 0.0, 0.0};
  Mat3 A{{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}};
  int dim = 2;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  // Trace of the leading dim-by-dim block of A.
  double laplacian() const;
  // Spectral norm of the leading dim-by-dim block of A (closed form).
  double hessian_norm() const;
};

QuadraticPolynomial linear_polynomial(double c, const Vec& b, int dim);

enum class BarrierSide { Below, Above };

// Below: P + (mu/4n)(1 - |x|^2); above subtracts the same bump. The bump
// vanishes on |x| = 1 and shifts the Laplacian by -mu/2 (below) or +mu/2.
QuadraticPolynomial make_barrier(const QuadraticPolynomial& P, double mu, BarrierSide side);

enum class ContactClass { InteriorHalf, Annulus, RegionBoundary };

std::string contact_class_name(ContactClass c);

// A ball intersected with an optional nodewise predicate.
struct Region {
  Ball ball;
  std::function<bool(const Vec&)> predicate;  // empty: the whole ball
  std::string name = "ball";
};

struct TouchReport {
  // Shift making P + t_star touch u: t_star = min over the region of (u - P)
  // for below-touching; for above-touching t_star = -min over the region
  // intersected with cl{P > 0} of (P - u).
  double t_star = 0.0;
  // Clearance before contact: t_star for below-touching, -t_star for above.
  double gap = 0.0;
  // Most severe class present among the contact nodes: any interior-half
  // contact makes the location InteriorHalf.
  ContactClass location = ContactClass::RegionBoundary;
  Vec argmin{0.0, 0.0, 0.0};       // node attaining the extremal shift
  std::vector<Vec> contact_points; // nodes within the slack of the contact, capped
  std::size_t contact_count = 0;   // total number of such nodes
  // Contact nodes per class, indexed by ContactClass order. A touching is
  // certified interior only when the annulus and boundary counts vanish:
  // otherwise the contact admits an explanation at the region frontier within
  // the slack, and the certificate sharpens as h shrinks.
  std::array<std::size_t, 3> class_counts{0, 0, 0};
  double slack = 0.0;              // contact slack used (10h)
};

TouchReport touch_from_below(const GridFunction& u, const QuadraticPolynomial& P,
                             const Region& region);
// Contact restricted to the closure of {P > 0} within the region.
TouchReport touch_from_above(const GridFunction& u, const QuadraticPolynomial& P,
                             const Region& region);

enum class Verdict { Consistent, Violation };

std::string verdict_name(Verdict v);

struct ExclusionReport {
  Verdict verdict = Verdict::Consistent;
  TouchReport touch;
  std::string branch;  // "positivity" or "gradient"
  double gradient_norm_at_contact = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

// A quadratic with small Hessian and subharmonic excess cannot touch an
// almost minimizer from below at an interior point of the half ball when the
// additive slack is below mu^{n+3}. The verdict records whether the grid
// field is consistent with that exclusion.
ExclusionReport subsolution_exclusion_test(const GridFunction& u,
                                           const QuadraticPolynomial& P, double mu,
                                           double sigma);
// Mirror statement for superharmonic excess and touching from above by P+.
ExclusionReport supersolution_exclusion_test(const GridFunction& u,
                                             const QuadraticPolynomial& P, double mu,
                                             double sigma);

struct ComparisonReport {
  bool holds = false;
  double min_gap = 0.0;
  Vec location{0.0, 0.0, 0.0};
};

// Ordering on a delta-collar of the region boundary propagates to the whole
// region for admissible barriers. Throws on precondition failures; the
// returned report states whether u >= P - 10h on all of U.
ComparisonReport comparison_apply(const GridFunction& u, const QuadraticPolynomial& P,
                                  const Region& U, double delta, double mu, double sigma);

struct P1Report {
  bool holds = false;
  double c_measured = 0.0;   // largest verified lift of the supporting half plane
  double slab_min = 0.0;     // direct minimum of (u - x_n - a)/(gamma eps) on the slab
  double harnack_ratio = -1.0;  // propagation ratio on the upper ball, -1 if skipped
  Vec witness{0.0, 0.0, 0.0};
  std::string note;
};

// Partial Harnack improvement: a one-sided bound u >= (x_n + a)+ plus an
// improvement at an interior witness lifts to u >= (x_n + a + c gamma eps)+ on
// the half ball. c0 <= 0 selects the default 1/(8n).
P1Report p1_check(const GridFunction& u, double eps, double p_delta, double gamma,
                  double a = 0.0, double sigma = 0.0, double c0 = 0.0);

enum class TestSide { Sub, Super };

struct P2Report {
  Verdict verdict = Verdict::Consistent;
  ExclusionReport inner;
  double mu = 0.0;              // delta^2 eps after rescaling
  double sigma_rescaled = 0.0;  // delta^{-n} sigma
};

// Viscosity property at scale p_delta: rescales the field and the comparison
// polynomial to the unit ball and runs the matching exclusion test with
// mu = p_delta^2 eps.
P2Report p2_check(const GridFunction& u, double eps, double p_delta,
                  const QuadraticPolynomial& P, double sigma, TestSide side);

struct SweepRow {
  std::string barrier_id;
  double mu = 0.0;
  double t_star = 0.0;
  ContactClass location = ContactClass::RegionBoundary;
  Verdict verdict = Verdict::Consistent;
};

// Built-in barrier battery: for each mu in {0.05, 0.1, 0.2} with
// sigma <= mu^{n+3}, five steep subsolution barriers and five shallow
// supersolution barriers anchored at rotated directions, all with slope
// bounded away from the critical value so the positivity set of each barrier
// crosses the unit sphere.
std::vector<SweepRow> barrier_sweep(const GridFunction& u, double sigma);

std::string to_csv(const std::vector<SweepRow>& rows);

}  // namespace fblab
