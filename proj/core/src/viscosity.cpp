#include "fblab/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fblab/energy.hpp"
#include "fblab/regularity.hpp"

namespace fblab {

namespace {

constexpr std::size_t kContactCap = 256;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string csv_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void require_symmetric(const QuadraticPolynomial& P, const char* op) {
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(P.A[i][j] - P.A[j][i]) > 1e-12) {
        throw ValidationError(std::string(op) + ": A must be symmetric; A[" +
                              std::to_string(i) + "][" + std::to_string(j) + "] = " +
                              fmt(P.A[i][j]) + " vs " + fmt(P.A[j][i]));
      }
    }
  }
  if (P.dim != 2 && P.dim != 3) {
    throw ValidationError(std::string(op) + ": dim must be 2 or 3");
  }
}

// Visit the nodes of the region (closed ball intersected with the predicate).
template <typename F>
void for_region_nodes(const GridFunction& u, const Region& region, F&& body) {
  const Grid& g = u.grid;
  for_nodes_in_ball(g, region.ball, [&](int i, int j, int k) {
    Vec x = g.node(i, j, k);
    if (region.predicate && !region.predicate(x)) return;
    body(i, j, k, x);
  });
}

bool node_in_region(const GridFunction& u, const Region& region, int i, int j, int k) {
  const Grid& g = u.grid;
  if (i < 0 || j < 0 || k < 0 || i >= g.shape[0] || j >= g.shape[1] ||
      (g.dim == 3 && k >= g.shape[2])) {
    return false;
  }
  Vec x = g.node(i, j, k);
  double r2 = region.ball.radius * region.ball.radius + 1e-12;
  double d2 = 0.0;
  for (int d = 0; d < g.dim; ++d) {
    double t = x[d] - region.ball.center[d];
    d2 += t * t;
  }
  if (d2 > r2) return false;
  return !region.predicate || region.predicate(x);
}

ContactClass classify_node(const GridFunction& u, const Region& region, int i, int j,
                           int k) {
  const Grid& g = u.grid;
  Vec x = g.node(i, j, k);
  double d = dist(x, region.ball.center, g.dim);
  if (d >= region.ball.radius - 1.5 * g.h) return ContactClass::RegionBoundary;
  if (region.predicate) {
    const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                             {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    int nsteps = 2 * g.dim;
    for (int s = 0; s < nsteps; ++s) {
      if (!node_in_region(u, region, i + steps[s][0], j + steps[s][1],
                          k + steps[s][2])) {
        return ContactClass::RegionBoundary;
      }
    }
  }
  if (d < 0.5 * region.ball.radius) return ContactClass::InteriorHalf;
  return ContactClass::Annulus;
}

struct TouchScan {
  double extremum = std::numeric_limits<double>::infinity();
  std::array<int, 3> arg{0, 0, 0};
  std::size_t nodes = 0;
};

// Assemble the report shared by both touching directions: diff is the signed
// height whose minimum defines the contact shift.
TouchReport finish_touch(const GridFunction& u, const Region& region,
                         const std::function<double(int, int, int)>& diff,
                         const std::function<bool(int, int, int)>& admissible,
                         bool below) {
  const Grid& g = u.grid;
  TouchScan scan;
  for_region_nodes(u, region, [&](int i, int j, int k, const Vec&) {
    if (!admissible(i, j, k)) return;
    ++scan.nodes;
    double v = diff(i, j, k);
    if (v < scan.extremum) {
      scan.extremum = v;
      scan.arg = {i, j, k};
    }
  });
  if (scan.nodes == 0) {
    throw ValidationError(below ? "touch_from_below: empty region"
                                : "touch_from_above: region does not meet the closure "
                                  "of {P > 0}");
  }
  TouchReport rep;
  rep.slack = 10.0 * g.h;
  rep.t_star = below ? scan.extremum : -scan.extremum;
  rep.gap = scan.extremum;
  rep.argmin = g.node(scan.arg[0], scan.arg[1], scan.arg[2]);
  for_region_nodes(u, region, [&](int i, int j, int k, const Vec& x) {
    if (!admissible(i, j, k)) return;
    if (diff(i, j, k) > scan.extremum + rep.slack) return;
    ++rep.contact_count;
    ContactClass cls = classify_node(u, region, i, j, k);
    ++rep.class_counts[static_cast<int>(cls)];
    if (rep.contact_points.size() < kContactCap) rep.contact_points.push_back(x);
  });
  rep.location =
      rep.class_counts[static_cast<int>(ContactClass::InteriorHalf)] > 0
          ? ContactClass::InteriorHalf
          : (rep.class_counts[static_cast<int>(ContactClass::Annulus)] > 0
                 ? ContactClass::Annulus
                 : ContactClass::RegionBoundary);
  return rep;
}

// A violation of the touching exclusion is certified only when the barrier
// genuinely reaches u (gap within the slack) and every within-slack contact
// node lies in the interior half region: a frontier candidate within the
// slack means the touching admits a boundary explanation at this resolution.
Verdict exclusion_verdict(const TouchReport& t) {
  bool touches = t.gap <= t.slack;
  bool interior_only =
      t.class_counts[static_cast<int>(ContactClass::InteriorHalf)] > 0 &&
      t.class_counts[static_cast<int>(ContactClass::Annulus)] == 0 &&
      t.class_counts[static_cast<int>(ContactClass::RegionBoundary)] == 0;
  return (touches && interior_only) ? Verdict::Violation : Verdict::Consistent;
}

// Nodewise closure of {P > 0}: the node itself is nonnegative for P, or an
// axis neighbor is strictly positive.
bool in_positive_closure(const GridFunction& u, const QuadraticPolynomial& P, int i,
                         int j, int k) {
  const Grid& g = u.grid;
  if (P.value(g.node(i, j, k)) >= -1e-15) return true;
  const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                           {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  int nsteps = 2 * g.dim;
  for (int s = 0; s < nsteps; ++s) {
    int ni = i + steps[s][0], nj = j + steps[s][1], nk = k + steps[s][2];
    if (ni < 0 || nj < 0 || nk < 0 || ni >= g.shape[0] || nj >= g.shape[1] ||
        (g.dim == 3 && nk >= g.shape[2])) {
      continue;
    }
    if (P.value(g.node(ni, nj, nk)) > 0.0) return true;
  }
  return false;
}

// Shared gate battery for the exclusion tests. side = +1 for the subsolution
// statement, -1 for the supersolution mirror.
std::string exclusion_gates(const GridFunction& u, const QuadraticPolynomial& P,
                            double mu, double sigma, int side, const char* op) {
  require_symmetric(P, op);
  if (P.dim != u.grid.dim) {
    throw ValidationError(std::string(op) + ": polynomial dimension " +
                          std::to_string(P.dim) + " does not match grid dimension " +
                          std::to_string(u.grid.dim));
  }
  if (!(mu > 0.0)) {
    throw ValidationError(std::string(op) + ": mu must be positive, got " + fmt(mu));
  }
  if (sigma < 0.0) {
    throw ValidationError(std::string(op) + ": sigma must be nonnegative, got " +
                          fmt(sigma));
  }
  double hn = P.hessian_norm();
  if (hn > 1.0 + 1e-12) {
    throw ValidationError(std::string(op) + ": hessian bound violated: |D2P| = " +
                          fmt(hn) + " > 1");
  }
  double lap = P.laplacian();
  if (side > 0 && lap < mu - 1e-12) {
    throw ValidationError(std::string(op) + ": laplacian lower bound violated: " +
                          fmt(lap) + " < mu = " + fmt(mu));
  }
  if (side < 0 && lap > -mu + 1e-12) {
    throw ValidationError(std::string(op) + ": laplacian upper bound violated: " +
                          fmt(lap) + " > -mu = " + fmt(-mu));
  }
  int n = u.grid.dim;
  double cap = std::pow(mu, n + 3) + 1e-15;
  if (sigma > cap) {
    throw ValidationError(std::string(op) + ": sigma bound violated: sigma = " +
                          fmt(sigma) + " > mu^(n+3) = " + fmt(std::pow(mu, n + 3)));
  }
  Ball b1 = unit_ball();
  require_ball_inside(u.grid, b1, op);
  if (positive_on_ball(u, b1)) return "positivity";
  double worst = side > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  for_nodes_in_ball(u.grid, b1, [&](int i, int j, int k) {
    double gn = norm(P.gradient(u.grid.node(i, j, k)), u.grid.dim);
    worst = side > 0 ? std::min(worst, gn) : std::max(worst, gn);
  });
  if (side > 0 && worst < 1.0 + mu - 1e-12) {
    throw ValidationError(std::string(op) +
                          ": branch hypothesis violated: u has zeros in B_1 and "
                          "min |grad P| = " +
                          fmt(worst) + " < 1 + mu = " + fmt(1.0 + mu));
  }
  if (side < 0 && worst > 1.0 - mu + 1e-12) {
    throw ValidationError(std::string(op) +
                          ": branch hypothesis violated: u has zeros in B_1 and "
                          "max |grad P| = " +
                          fmt(worst) + " > 1 - mu = " + fmt(1.0 - mu));
  }
  return "gradient";
}

}  // namespace

double QuadraticPolynomial::value(const Vec& x) const {
  double v = c;
  for (int d = 0; d < dim; ++d) {
    v += b[d] * x[d];
    double row = 0.0;
    for (int e = 0; e < dim; ++e) row += A[d][e] * x[e];
    v += 0.5 * x[d] * row;
  }
  return v;
}

Vec QuadraticPolynomial::gradient(const Vec& x) const {
  Vec g{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) {
    g[d] = b[d];
    for (int e = 0; e < dim; ++e) g[d] += A[d][e] * x[e];
  }
  return g;
}

double QuadraticPolynomial::laplacian() const {
  double t = 0.0;
  for (int d = 0; d < dim; ++d) t += A[d][d];
  return t;
}

double QuadraticPolynomial::hessian_norm() const {
  if (dim == 2) {
    double a = A[0][0], b01 = 0.5 * (A[0][1] + A[1][0]), d = A[1][1];
    double mean = 0.5 * (a + d);
    double disc = std::sqrt(0.25 * (a - d) * (a - d) + b01 * b01);
    return std::max(std::abs(mean + disc), std::abs(mean - disc));
  }
  // Closed-form symmetric 3x3 eigenvalues via the trigonometric method.
  double a00 = A[0][0], a11 = A[1][1], a22 = A[2][2];
  double a01 = 0.5 * (A[0][1] + A[1][0]);
  double a02 = 0.5 * (A[0][2] + A[2][0]);
  double a12 = 0.5 * (A[1][2] + A[2][1]);
  double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 == 0.0) {
    return std::max({std::abs(a00), std::abs(a11), std::abs(a22)});
  }
  double q = (a00 + a11 + a22) / 3.0;
  double p2 = (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) +
              2.0 * p1;
  double p = std::sqrt(p2 / 6.0);
  double b00 = (a00 - q) / p, b11 = (a11 - q) / p, b22 = (a22 - q) / p;
  double b01 = a01 / p, b02 = a02 / p, b12 = a12 / p;
  double detB = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                b02 * (b01 * b12 - b11 * b02);
  double r = std::clamp(0.5 * detB, -1.0, 1.0);
  double phi = std::acos(r) / 3.0;
  double e1 = q + 2.0 * p * std::cos(phi);
  double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  double e2 = 3.0 * q - e1 - e3;
  return std::max({std::abs(e1), std::abs(e2), std::abs(e3)});
}

QuadraticPolynomial linear_polynomial(double c, const Vec& b, int dim) {
  QuadraticPolynomial P;
  P.c = c;
  P.b = b;
  P.dim = dim;
  return P;
}

QuadraticPolynomial make_barrier(const QuadraticPolynomial& P, double mu,
                                 BarrierSide side) {
  require_symmetric(P, "make_barrier");
  if (!(mu > 0.0)) {
    throw ValidationError("make_barrier: mu must be positive, got " + fmt(mu));
  }
  double n = static_cast<double>(P.dim);
  double sign = side == BarrierSide::Below ? 1.0 : -1.0;
  QuadraticPolynomial out = P;
  out.c += sign * mu / (4.0 * n);
  for (int d = 0; d < P.dim; ++d) out.A[d][d] -= sign * mu / (2.0 * n);
  return out;
}

std::string contact_class_name(ContactClass c) {
  switch (c) {
    case ContactClass::InteriorHalf: return "interior_B_half";
    case ContactClass::Annulus: return "annulus";
    default: return "region_boundary";
  }
}

std::string verdict_name(Verdict v) {
  return v == Verdict::Consistent ? "consistent" : "violation";
}

TouchReport touch_from_below(const GridFunction& u, const QuadraticPolynomial& P,
                             const Region& region) {
  require_symmetric(P, "touch_from_below");
  require_ball_inside(u.grid, region.ball, "touch_from_below");
  const Grid& g = u.grid;
  auto diff = [&](int i, int j, int k) {
    return u.at(i, j, k) - P.value(g.node(i, j, k));
  };
  auto all = [](int, int, int) { return true; };
  return finish_touch(u, region, diff, all, true);
}

TouchReport touch_from_above(const GridFunction& u, const QuadraticPolynomial& P,
                             const Region& region) {
  require_symmetric(P, "touch_from_above");
  require_ball_inside(u.grid, region.ball, "touch_from_above");
  const Grid& g = u.grid;
  auto diff = [&](int i, int j, int k) {
    return std::max(P.value(g.node(i, j, k)), 0.0) - u.at(i, j, k);
  };
  auto admissible = [&](int i, int j, int k) {
    return in_positive_closure(u, P, i, j, k);
  };
  return finish_touch(u, region, diff, admissible, false);
}

ExclusionReport subsolution_exclusion_test(const GridFunction& u,
                                           const QuadraticPolynomial& P, double mu,
                                           double sigma) {
  ExclusionReport rep;
  rep.branch = exclusion_gates(u, P, mu, sigma, +1, "subsolution_exclusion_test");
  rep.mu = mu;
  rep.sigma = sigma;
  Region b1{unit_ball(), nullptr, "unit_ball"};
  rep.touch = touch_from_below(u, P, b1);
  rep.gradient_norm_at_contact = norm(P.gradient(rep.touch.argmin), u.grid.dim);
  rep.verdict = exclusion_verdict(rep.touch);
  return rep;
}

ExclusionReport supersolution_exclusion_test(const GridFunction& u,
                                             const QuadraticPolynomial& P, double mu,
                                             double sigma) {
  ExclusionReport rep;
  rep.branch = exclusion_gates(u, P, mu, sigma, -1, "supersolution_exclusion_test");
  rep.mu = mu;
  rep.sigma = sigma;
  Region b1{unit_ball(), nullptr, "unit_ball"};
  rep.touch = touch_from_above(u, P, b1);
  rep.gradient_norm_at_contact = norm(P.gradient(rep.touch.argmin), u.grid.dim);
  rep.verdict = exclusion_verdict(rep.touch);
  return rep;
}

ComparisonReport comparison_apply(const GridFunction& u, const QuadraticPolynomial& P,
                                  const Region& U, double delta, double mu,
                                  double sigma) {
  const char* op = "comparison_apply";
  require_symmetric(P, op);
  require_ball_inside(u.grid, U.ball, op);
  const Grid& g = u.grid;
  if (!(delta > 0.0)) {
    throw ValidationError(std::string(op) + ": delta must be positive, got " +
                          fmt(delta));
  }
  if (!(mu > 0.0)) {
    throw ValidationError(std::string(op) + ": mu must be positive, got " + fmt(mu));
  }
  double hn = P.hessian_norm();
  if (hn > 1.0 / delta + 1e-12) {
    throw ValidationError(std::string(op) + ": hessian bound violated: |D2P| = " +
                          fmt(hn) + " > 1/delta = " + fmt(1.0 / delta));
  }
  if (P.laplacian() < mu - 1e-12) {
    throw ValidationError(std::string(op) + ": laplacian lower bound violated: " +
                          fmt(P.laplacian()) + " < mu = " + fmt(mu));
  }
  // Positivity branch on U, else the gradient bound must hold on U. Both are
  // checked on the possible-contact subset {P >= -10h}: nodes where P lies
  // deeply negative can never realize a contact with the nonnegative u.
  bool positive = true;
  double min_grad = std::numeric_limits<double>::infinity();
  for_region_nodes(u, U, [&](int i, int j, int k, const Vec& x) {
    if (P.value(x) < -10.0 * g.h) return;
    if (!(u.at(i, j, k) > 0.0)) positive = false;
    min_grad = std::min(min_grad, norm(P.gradient(x), g.dim));
  });
  if (!positive && min_grad < 1.0 + mu - 1e-12) {
    throw ValidationError(std::string(op) +
                          ": branch hypothesis violated: u has zeros in U near "
                          "{P >= 0} and min |grad P| = " +
                          fmt(min_grad) + " < 1 + mu = " + fmt(1.0 + mu));
  }
  int n = g.dim;
  double needed = std::pow(delta, -(2.0 * n + 3.0)) * sigma;
  if (std::pow(mu, n + 3) < needed - 1e-18) {
    throw ValidationError(std::string(op) + ": scaled sigma bound violated: mu^(n+3) = " +
                          fmt(std::pow(mu, n + 3)) + " < delta^-(2n+3) sigma = " +
                          fmt(needed));
  }
  // Collar: nodes of U within delta of the region frontier, found by stamping
  // delta-balls around the outside frontier nodes plus the sphere-side band.
  std::vector<char> in_u(g.node_count(), 0);
  for_region_nodes(u, U, [&](int i, int j, int k, const Vec&) {
    in_u[g.index(i, j, k)] = 1;
  });
  std::vector<char> collar(g.node_count(), 0);
  for_region_nodes(u, U, [&](int i, int j, int k, const Vec& x) {
    if (dist(x, U.ball.center, g.dim) >= U.ball.radius - delta - 1e-12) {
      collar[g.index(i, j, k)] = 1;
    }
  });
  // Outside frontier: nodes not in U that have an axis neighbor in U. A U node
  // whose neighbor leaves the grid is its own frontier witness.
  std::vector<char> frontier(g.node_count(), 0);
  const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                           {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for_region_nodes(u, U, [&](int i, int j, int k, const Vec&) {
    int nsteps = 2 * g.dim;
    for (int s = 0; s < nsteps; ++s) {
      int ni = i + steps[s][0], nj = j + steps[s][1], nk = k + steps[s][2];
      if (ni < 0 || nj < 0 || nk < 0 || ni >= g.shape[0] || nj >= g.shape[1] ||
          (g.dim == 3 && nk >= g.shape[2])) {
        collar[g.index(i, j, k)] = 1;
        continue;
      }
      std::size_t nidx = g.index(ni, nj, nk);
      if (!in_u[nidx]) frontier[nidx] = 1;
    }
  });
  int reach = static_cast<int>(std::ceil(delta / g.h)) + 1;
  for (int ni = 0; ni < g.shape[0]; ++ni) {
    for (int nj = 0; nj < g.shape[1]; ++nj) {
      for (int nk = 0; nk < (g.dim == 3 ? g.shape[2] : 1); ++nk) {
        if (!frontier[g.index(ni, nj, nk)]) continue;
        Vec y = g.node(ni, nj, nk);
        for (int di = -reach; di <= reach; ++di) {
          for (int dj = -reach; dj <= reach; ++dj) {
            int dk_lo = g.dim == 3 ? -reach : 0;
            int dk_hi = g.dim == 3 ? reach : 0;
            for (int dk = dk_lo; dk <= dk_hi; ++dk) {
              int ci = ni + di, cj = nj + dj, ck = nk + dk;
              if (ci < 0 || cj < 0 || ck < 0 || ci >= g.shape[0] ||
                  cj >= g.shape[1] || (g.dim == 3 && ck >= g.shape[2])) {
                continue;
              }
              std::size_t idx = g.index(ci, cj, ck);
              if (!in_u[idx] || collar[idx]) continue;
              if (dist(g.node(ci, cj, ck), y, g.dim) <= delta + 1e-12) collar[idx] = 1;
            }
          }
        }
      }
    }
  }
  double worst_collar = std::numeric_limits<double>::infinity();
  Vec worst_node{0.0, 0.0, 0.0};
  for_region_nodes(u, U, [&](int i, int j, int k, const Vec& x) {
    if (!collar[g.index(i, j, k)]) return;
    double gap = u.at(i, j, k) - P.value(x);
    if (gap < worst_collar) {
      worst_collar = gap;
      worst_node = x;
    }
  });
  if (worst_collar < -1e-12) {
    throw ValidationError(std::string(op) + ": collar hypothesis fails at (" +
                          fmt(worst_node[0]) + ", " + fmt(worst_node[1]) +
                          (g.dim == 3 ? ", " + fmt(worst_node[2]) : std::string()) +
                          "): u - P = " + fmt(worst_collar));
  }
  ComparisonReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  for_region_nodes(u, U, [&](int i, int j, int k, const Vec& x) {
    double gap = u.at(i, j, k) - P.value(x);
    if (gap < rep.min_gap) {
      rep.min_gap = gap;
      rep.location = x;
    }
  });
  rep.holds = rep.min_gap >= -10.0 * g.h;
  return rep;
}

P1Report p1_check(const GridFunction& u, double eps, double p_delta, double gamma,
                  double a, double sigma, double c0) {
  const char* op = "p1_check";
  const Grid& g = u.grid;
  int n = g.dim;
  require_ball_inside(u.grid, unit_ball(), op);
  if (!(eps > 0.0)) {
    throw ValidationError(std::string(op) + ": eps must be positive, got " + fmt(eps));
  }
  if (!(p_delta > 0.0) || gamma < p_delta - 1e-12 || gamma > 1.0 + 1e-12) {
    throw ValidationError(std::string(op) + ": gamma range violated: need p_delta <= "
                          "gamma <= 1, got gamma = " +
                          fmt(gamma) + ", p_delta = " + fmt(p_delta));
  }
  if (std::abs(a) > eps + 1e-12) {
    throw ValidationError(std::string(op) + ": offset bound violated: |a| = " +
                          fmt(std::abs(a)) + " > eps = " + fmt(eps));
  }
  if (sigma < 0.0 || sigma > std::pow(eps, n + 4) + 1e-18) {
    throw ValidationError(std::string(op) + ": sigma bound violated: sigma = " +
                          fmt(sigma) + " vs eps^(n+4) = " + fmt(std::pow(eps, n + 4)));
  }
  if (c0 <= 0.0) c0 = 1.0 / (8.0 * n);
  int axis = n - 1;
  // Lower-bound hypothesis u >= (x_n + a)+ nodewise on B_1.
  double worst = std::numeric_limits<double>::infinity();
  Vec worst_at{0.0, 0.0, 0.0};
  for_nodes_in_ball(g, unit_ball(), [&](int i, int j, int k) {
    Vec x = g.node(i, j, k);
    double need = std::max(x[axis] + a, 0.0);
    double slackv = u.at(i, j, k) - need;
    if (slackv < worst) {
      worst = slackv;
      worst_at = x;
    }
  });
  if (worst < -1e-9) {
    throw ValidationError(std::string(op) + ": lower bound hypothesis fails at (" +
                          fmt(worst_at[0]) + ", " + fmt(worst_at[1]) +
                          "): u - (x_n + a)+ = " + fmt(worst));
  }
  // Improvement witness in the upper cap of the half ball.
  P1Report rep;
  bool found = false;
  for_nodes_in_ball(g, Ball{Vec{0.0, 0.0, 0.0}, 0.5}, [&](int i, int j, int k) {
    Vec x = g.node(i, j, k);
    if (x[axis] < 0.5 - a - 1e-12) return;
    if (u.at(i, j, k) >= x[axis] + a + gamma * eps - 1e-12) {
      if (!found || x[axis] > rep.witness[axis]) rep.witness = x;
      found = true;
    }
  });
  if (!found) {
    throw ValidationError(std::string(op) +
                          ": improvement hypothesis fails: no node y with |y| <= 1/2, "
                          "y_n >= 1/2 - a and u(y) >= y_n + a + gamma eps = " +
                          fmt(0.5 + gamma * eps));
  }
  // Intermediate bound on the slab {x_n >= c0, |x| <= 3/4}, checked directly
  // and through gap propagation on an interior ball.
  rep.slab_min = std::numeric_limits<double>::infinity();
  for_nodes_in_ball(g, Ball{Vec{0.0, 0.0, 0.0}, 0.75}, [&](int i, int j, int k) {
    Vec x = g.node(i, j, k);
    if (x[axis] < c0 - 1e-12) return;
    rep.slab_min = std::min(rep.slab_min,
                            (u.at(i, j, k) - x[axis] - a) / (gamma * eps));
  });
  double zc = 0.5 * (0.5 + c0);
  Ball upper{Vec{0.0, 0.0, 0.0}, 0.0};
  upper.center[axis] = zc;
  upper.radius = std::min(0.5 * (0.5 - c0), zc + a - 2.0 * g.h);
  if (upper.radius >= 4.0 * g.h) {
    GridFunction plane = sample(g, FieldRole::Signed,
                                [&](const Vec& x) { return x[axis] + a; });
    try {
      rep.harnack_ratio = harnack_gap(u, plane, upper, 0.25 * gamma * eps, sigma);
    } catch (const ValidationError& e) {
      rep.harnack_ratio = -1.0;
      rep.note = std::string("harnack step not certified: ") + e.what();
    }
  } else {
    rep.note = "harnack step skipped: propagation ball below the mesh floor";
  }
  // Measured lift on the half ball: largest c with u >= (x_n + a + c gamma eps)+.
  rep.c_measured = std::numeric_limits<double>::infinity();
  for_nodes_in_ball(g, Ball{Vec{0.0, 0.0, 0.0}, 0.5}, [&](int i, int j, int k) {
    Vec x = g.node(i, j, k);
    double allowed = std::max((u.at(i, j, k) - x[axis] - a) / (gamma * eps),
                              -(x[axis] + a) / (gamma * eps));
    rep.c_measured = std::min(rep.c_measured, allowed);
  });
  rep.holds = rep.c_measured > 0.0;
  return rep;
}

P2Report p2_check(const GridFunction& u, double eps, double p_delta,
                  const QuadraticPolynomial& P, double sigma, TestSide side) {
  const char* op = "p2_check";
  require_symmetric(P, op);
  const Grid& g = u.grid;
  if (!(eps > 0.0) || eps > 1.0) {
    throw ValidationError(std::string(op) + ": eps range violated: need 0 < eps <= 1, "
                          "got " + fmt(eps));
  }
  if (!(p_delta > 0.0) || p_delta > 1.0) {
    throw ValidationError(std::string(op) +
                          ": p_delta range violated: need 0 < p_delta <= 1, got " +
                          fmt(p_delta));
  }
  double hn = P.hessian_norm();
  if (hn > eps / p_delta + 1e-12) {
    throw ValidationError(std::string(op) + ": hessian bound violated: |D2P| = " +
                          fmt(hn) + " > eps/delta = " + fmt(eps / p_delta));
  }
  double lap = P.laplacian();
  if (side == TestSide::Sub && lap < p_delta * eps - 1e-12) {
    throw ValidationError(std::string(op) + ": laplacian lower bound violated: " +
                          fmt(lap) + " < delta eps = " + fmt(p_delta * eps));
  }
  if (side == TestSide::Super && lap > -p_delta * eps + 1e-12) {
    throw ValidationError(std::string(op) + ": laplacian upper bound violated: " +
                          fmt(lap) + " > -delta eps = " + fmt(-p_delta * eps));
  }
  Ball small{Vec{0.0, 0.0, 0.0}, p_delta};
  require_ball_inside(g, small, op);
  if (!positive_on_ball(u, small)) {
    double worst = side == TestSide::Sub ? std::numeric_limits<double>::infinity() : 0.0;
    for_nodes_in_ball(g, small, [&](int i, int j, int k) {
      double gn = norm(P.gradient(g.node(i, j, k)), g.dim);
      worst = side == TestSide::Sub ? std::min(worst, gn) : std::max(worst, gn);
    });
    if (side == TestSide::Sub && worst < 1.0 + p_delta * eps - 1e-12) {
      throw ValidationError(std::string(op) +
                            ": branch hypothesis violated: u has zeros in B_delta and "
                            "min |grad P| = " +
                            fmt(worst) + " < 1 + delta eps = " +
                            fmt(1.0 + p_delta * eps));
    }
    if (side == TestSide::Super && worst > 1.0 - p_delta * eps + 1e-12) {
      throw ValidationError(std::string(op) +
                            ": branch hypothesis violated: u has zeros in B_delta and "
                            "max |grad P| = " +
                            fmt(worst) + " > 1 - delta eps = " +
                            fmt(1.0 - p_delta * eps));
    }
  }
  P2Report rep;
  rep.mu = p_delta * p_delta * eps;
  rep.sigma_rescaled = std::pow(p_delta, -g.dim) * sigma;
  GridFunction v = rescale(u, p_delta, Vec{0.0, 0.0, 0.0});
  QuadraticPolynomial Pt = P;
  Pt.c = P.c / p_delta;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) Pt.A[i][j] = p_delta * P.A[i][j];
  }
  rep.inner = side == TestSide::Sub
                  ? subsolution_exclusion_test(v, Pt, rep.mu, rep.sigma_rescaled)
                  : supersolution_exclusion_test(v, Pt, rep.mu, rep.sigma_rescaled);
  rep.verdict = rep.inner.verdict;
  return rep;
}

std::vector<SweepRow> barrier_sweep(const GridFunction& u, double sigma) {
  const Grid& g = u.grid;
  int n = g.dim;
  const double mus[3] = {0.05, 0.1, 0.2};
  struct Combo {
    double mu;
    int dir;
    bool sub;
  };
  std::vector<Combo> combos;
  for (double mu : mus) {
    if (sigma > std::pow(mu, n + 3) + 1e-15) continue;  // inadmissible at this mu
    for (int d = 0; d < 5; ++d) {
      combos.push_back({mu, d, true});
      combos.push_back({mu, d, false});
    }
  }
  std::vector<SweepRow> rows(combos.size());
  parallel_for(combos.size(), [&](std::size_t idx) {
    const Combo& cb = combos[idx];
    Vec nu{0.0, 0.0, 0.0};
    double angle = 2.0 * M_PI * cb.dir / 5.0;
    if (n == 2) {
      nu = vec2(std::cos(angle), std::sin(angle));
    } else {
      // Tilted ring of directions with nonzero vertical component.
      double z = 0.4;
      double s = std::sqrt(1.0 - z * z);
      nu = vec3(s * std::cos(angle), s * std::sin(angle), z);
    }
    QuadraticPolynomial P;
    P.dim = n;
    double curv = cb.mu / n;
    double slope = cb.sub ? 1.0 + cb.mu + curv + 0.1 : 1.0 - cb.mu - curv - 0.1;
    for (int d = 0; d < n; ++d) {
      P.b[d] = slope * nu[d];
      P.A[d][d] = cb.sub ? curv : -curv;
    }
    ExclusionReport er = cb.sub ? subsolution_exclusion_test(u, P, cb.mu, sigma)
                                : supersolution_exclusion_test(u, P, cb.mu, sigma);
    SweepRow row;
    row.barrier_id = std::string(cb.sub ? "sub_" : "super_") + std::to_string(cb.dir);
    row.mu = cb.mu;
    row.t_star = er.touch.t_star;
    row.location = er.touch.location;
    row.verdict = er.verdict;
    rows[idx] = row;
  });
  return rows;
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "barrier,mu,t_star,location,verdict\n";
  for (const SweepRow& r : rows) {
    out << r.barrier_id << ',' << csv_number(r.mu) << ',' << csv_number(r.t_star)
        << ',' << contact_class_name(r.location) << ',' << verdict_name(r.verdict)
        << '\n';
  }
  return out.str();
}

}  // namespace fblab
