#include "fblab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "detail_geometry.hpp"
#include "fblab/energy.hpp"

namespace fblab {

namespace {

struct CellStats {
  double mean_sq = 0.0;  // avg over cells of the mean squared corner gradient
  Vec mean_grad{0.0, 0.0, 0.0};
  std::size_t cells = 0;
};

// Per-cell averages over the member cells of B: the mean squared gradient
// (dirichlet integrand) and the mean gradient vector.
CellStats gradient_stats(const GridFunction& u, const Ball& ball) {
  CellStats st;
  double acc_sq = 0.0;
  Vec acc_g{0.0, 0.0, 0.0};
  for_cells_in_ball(u.grid, ball, [&](int i, int j, int k) {
    acc_sq += cell_mean_square_gradient(u, i, j, k);
    Vec g = cell_average_gradient(u, i, j, k);
    for (int d = 0; d < u.grid.dim; ++d) acc_g[d] += g[d];
    ++st.cells;
  });
  if (st.cells > 0) {
    st.mean_sq = acc_sq / double(st.cells);
    for (int d = 0; d < u.grid.dim; ++d) st.mean_grad[d] = acc_g[d] / double(st.cells);
  }
  return st;
}

// (avg over member cells of |grad u - q|^2)^{1/2}, expanded per cell through
// the corner-gradient mean and mean-square.
double deviation_from_slope(const GridFunction& u, const Ball& ball, const Vec& q) {
  double acc = 0.0;
  std::size_t cells = 0;
  for_cells_in_ball(u.grid, ball, [&](int i, int j, int k) {
    double msq = cell_mean_square_gradient(u, i, j, k);
    Vec g = cell_average_gradient(u, i, j, k);
    acc += msq - 2.0 * dot(q, g, u.grid.dim) + dot(q, q, u.grid.dim);
    ++cells;
  });
  if (cells == 0) return 0.0;
  return std::sqrt(std::max(0.0, acc / double(cells)));
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::string(buf);
}

}  // namespace

double average_gradient(const GridFunction& u, const Ball& ball) {
  require_ball_inside(u.grid, ball, "average_gradient");
  CellStats st = gradient_stats(u, ball);
  if (st.cells == 0) {
    throw ValidationError("average_gradient: ball of radius " + fmt(ball.radius) +
                          " contains no cell centers");
  }
  return std::sqrt(std::max(0.0, st.mean_sq));
}

DichotomyOutcome dichotomy_step(const GridFunction& u, double eps, double eta, double M) {
  if (eps <= 0.0) throw ValidationError("dichotomy_step: eps must be positive");
  if (eta <= 0.0 || eta >= 1.0) throw ValidationError("dichotomy_step: eta must lie in (0,1)");
  if (M <= 0.0) throw ValidationError("dichotomy_step: M must be positive");
  Ball b1 = unit_ball();
  Ball beta_ball{b1.center, eta};
  DichotomyOutcome out;
  out.a = average_gradient(u, b1);
  if (out.a < M) {
    throw ValidationError("dichotomy_step: not applicable: a = " + fmt(out.a) +
                          " < M = " + fmt(M));
  }
  out.a_eta = average_gradient(u, beta_ball);
  if (out.a_eta <= 0.5 * out.a + 1e-12) {
    out.variant = DichotomyVariant::Decay;
    // Re-verify the decay from raw grid data with an independent accumulation.
    double acc = 0.0;
    std::size_t cells = 0;
    for_cells_in_ball(u.grid, beta_ball, [&](int i, int j, int k) {
      acc += cell_mean_square_gradient(u, i, j, k);
      ++cells;
    });
    double recomputed = cells > 0 ? std::sqrt(acc / double(cells)) : 0.0;
    if (recomputed > 0.5 * out.a + 1e-9) {
      throw ClaimError("dichotomy_step: decay assertion failed on recomputation: a(eta) = " +
                       fmt(recomputed) + " > a/2 = " + fmt(0.5 * out.a));
    }
    return out;
  }
  out.variant = DichotomyVariant::GradientFlat;
  EllipticResult rep = harmonic_replacement(u, b1);
  std::array<int, 3> c = u.grid.nearest_node(b1.center);
  for (int d = 0; d < u.grid.dim; ++d) {
    int ip = c[0] + (d == 0), jp = c[1] + (d == 1), kp = c[2] + (d == 2);
    int im = c[0] - (d == 0), jm = c[1] - (d == 1), km = c[2] - (d == 2);
    out.q[d] = (rep.v.at(ip, jp, kp) - rep.v.at(im, jm, km)) / (2.0 * u.grid.h);
  }
  out.deviation = deviation_from_slope(u, beta_ball, out.q);
  double qn = norm(out.q, u.grid.dim);
  out.C0_measured = qn / out.a;
  if (out.deviation > eps * out.a + 1e-12) {
    throw ClaimError("dichotomy_step: neither alternative holds: a(eta) = " + fmt(out.a_eta) +
                     " > a/2 = " + fmt(0.5 * out.a) + " and deviation = " + fmt(out.deviation) +
                     " > eps*a = " + fmt(eps * out.a));
  }
  if (qn <= 0.25 * out.a) {
    throw ClaimError("dichotomy_step: slope window violated: |q| = " + fmt(qn) +
                     " <= a/4 = " + fmt(0.25 * out.a));
  }
  return out;
}

CampanatoTrace campanato_iterate(const GridFunction& u, const Vec& q0, double alpha,
                                 double rho, double eps, CampanatoGate gate,
                                 double beta, double c_tilde) {
  if (rho <= 0.0 || rho >= 1.0) throw ValidationError("campanato_iterate: rho must lie in (0,1)");
  if (eps <= 0.0) throw ValidationError("campanato_iterate: eps must be positive");
  if (alpha <= 0.0 || alpha > 1.0) throw ValidationError("campanato_iterate: alpha must lie in (0,1]");
  if (beta <= 0.0 || beta > 1.0) throw ValidationError("campanato_iterate: beta must lie in (0,1]");
  CampanatoTrace trace;
  trace.alpha = alpha;
  Ball b1 = unit_ball();
  trace.a = average_gradient(u, b1);
  double dev0 = deviation_from_slope(u, b1, q0);
  double q0n = norm(q0, u.grid.dim);
  if (gate == CampanatoGate::SlopeWindow) {
    trace.gate_used = "slope_window";
    if (dev0 > eps * trace.a + 1e-12) {
      throw ValidationError("campanato_iterate: slope-window gate: initial deviation " +
                            fmt(dev0) + " exceeds eps*a = " + fmt(eps * trace.a));
    }
    if (q0n <= 0.25 * trace.a || q0n > 4.0 * trace.a) {
      throw ValidationError("campanato_iterate: slope-window gate: |q0| = " + fmt(q0n) +
                            " outside (a/4, 4a] with a = " + fmt(trace.a));
    }
  } else {
    trace.gate_used = "mean_lower_bound";
    double mean_u = 0.0;
    std::size_t nodes = 0;
    for_nodes_in_ball(u.grid, b1, [&](int i, int j, int k) {
      mean_u += u.at(i, j, k);
      ++nodes;
    });
    mean_u = nodes > 0 ? mean_u / double(nodes) : 0.0;
    if (mean_u < trace.a) {
      throw ValidationError("campanato_iterate: mean-lower-bound gate: avg u = " + fmt(mean_u) +
                            " < a = " + fmt(trace.a));
    }
  }
  double floor_r = 16.0 * u.grid.h;
  double r = 1.0;
  for (int k = 0; r >= floor_r - 1e-12; ++k, r = std::pow(rho, k)) {
    Ball br{b1.center, r};
    CellStats st = gradient_stats(u, br);
    CampanatoRecord rec;
    rec.k = k;
    rec.r = r;
    rec.q = st.mean_grad;
    rec.deviation = deviation_from_slope(u, br, st.mean_grad);
    rec.bound = eps * std::pow(r, alpha) * trace.a;
    rec.within = rec.deviation <= rec.bound + 1e-12;
    trace.records.push_back(rec);
  }
  trace.verified = !trace.records.empty();
  for (const CampanatoRecord& rec : trace.records) {
    if (!rec.within) trace.verified = false;
  }
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k) {
    Vec diff = sub(trace.records[k + 1].q, trace.records[k].q);
    double inc = norm(diff, u.grid.dim);
    trace.increments.push_back(inc);
    double inc_bound = c_tilde * eps * std::pow(rho, double(k) * beta / 2.0) * trace.a;
    if (inc > inc_bound + 1e-12) trace.verified = false;
  }
  // Log-log regression of deviation against scale, over records with a
  // strictly positive deviation.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (const CampanatoRecord& rec : trace.records) {
    if (rec.deviation <= 0.0) continue;
    double x = std::log(rec.r), y = std::log(rec.deviation);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m >= 2) {
    double denom = double(m) * sxx - sx * sx;
    trace.fitted_exponent = denom != 0.0 ? (double(m) * sxy - sx * sy) / denom : 0.0;
  }
  return trace;
}

LipschitzCertificate lipschitz_certificate(const GridFunction& u, const LipschitzOptions& opt) {
  if (opt.eta <= 0.0 || opt.eta >= 1.0) {
    throw ValidationError("lipschitz_certificate: eta must lie in (0,1)");
  }
  if (opt.M <= 0.0) throw ValidationError("lipschitz_certificate: M must be positive");
  LipschitzCertificate cert;
  Ball b1 = unit_ball();
  cert.a1 = average_gradient(u, b1);
  cert.C_eta = 2.0 * std::pow(opt.eta, -0.5 * u.grid.dim);
  cert.certified = true;
  double floor_r = 16.0 * u.grid.h;
  double r = 1.0;
  for (int k = 0; r >= floor_r - 1e-12; ++k, r = std::pow(opt.eta, k)) {
    CascadeEntry entry;
    entry.k = k;
    entry.r = r;
    entry.a_k = average_gradient(u, Ball{b1.center, r});
    entry.bound = cert.C_eta * opt.M + std::pow(2.0, -double(k)) * cert.a1;
    entry.within = entry.a_k <= entry.bound + 1e-12;
    if (!entry.within) {
      GridFunction v = k == 0 ? u : rescale(u, r, b1.center);
      try {
        DichotomyOutcome out = dichotomy_step(v, opt.eps, opt.eta, opt.M);
        entry.dichotomy = out.variant == DichotomyVariant::Decay ? 0 : 1;
      } catch (const ClaimError& e) {
        entry.note = e.what();
        cert.certified = false;
      } catch (const ValidationError& e) {
        entry.note = e.what();
        cert.certified = false;
      }
    }
    cert.cascade.push_back(entry);
  }
  Ball half{b1.center, 0.5};
  double sup = 0.0;
  for_cells_in_ball(u.grid, half, [&](int i, int j, int k) {
    Vec g = cell_average_gradient(u, i, j, k);
    sup = std::max(sup, norm(g, u.grid.dim));
  });
  cert.value = sup;
  cert.C_measured = sup / (1.0 + cert.a1);
  return cert;
}

double harnack_gap(const GridFunction& u, const GridFunction& w, const Ball& ball,
                   double mu, double sigma, bool from_above) {
  if (mu <= 0.0) throw ValidationError("harnack_gap: mu must be positive");
  if (sigma < 0.0) throw ValidationError("harnack_gap: sigma must be nonnegative");
  require_ball_inside(u.grid, ball, "harnack_gap");
  if (u.grid.node_count() != w.grid.node_count() || u.grid.h != w.grid.h) {
    throw ValidationError("harnack_gap: u and w live on different grids");
  }
  double gate = std::pow(mu, double(u.grid.dim) + 3.0);
  if (sigma > gate + 1e-18) {
    throw ValidationError("harnack_gap: declared sigma = " + fmt(sigma) +
                          " exceeds mu^{n+3} = " + fmt(gate));
  }
  const double sign = from_above ? -1.0 : 1.0;
  bool positive = true;
  double min_diff = 0.0;
  bool first = true;
  for_nodes_in_ball(u.grid, ball, [&](int i, int j, int k) {
    if (u.at(i, j, k) <= 0.0) positive = false;
    double diff = sign * (u.at(i, j, k) - w.at(i, j, k));
    if (first || diff < min_diff) min_diff = diff;
    first = false;
  });
  if (!positive) {
    throw ValidationError("harnack_gap: ball is not contained in {u > 0} nodewise");
  }
  if (min_diff < -1e-12) {
    throw ValidationError(std::string("harnack_gap: ordering hypothesis fails: min of ") +
                          (from_above ? "(w - u)" : "(u - w)") + " = " + fmt(min_diff));
  }
  // Discrete harmonicity of w: divided 5/7-point Laplacian at nodes whose full
  // stencil stays in the ball. Sampled harmonics carry O(h^2) truncation.
  double res_tol = std::max(1e-8, 10.0 * u.grid.h * u.grid.h);
  double worst_res = 0.0;
  const Grid& g = u.grid;
  double r_inner = ball.radius - 1.5 * g.h;
  if (r_inner > 0.0) {
    for_nodes_in_ball(g, Ball{ball.center, r_inner}, [&](int i, int j, int k) {
      double lap = 0.0;
      for (int d = 0; d < g.dim; ++d) {
        int ip = i + (d == 0), jp = j + (d == 1), kp = k + (d == 2);
        int im = i - (d == 0), jm = j - (d == 1), km = k - (d == 2);
        lap += w.at(ip, jp, kp) + w.at(im, jm, km) - 2.0 * w.at(i, j, k);
      }
      worst_res = std::max(worst_res, std::abs(lap) / (g.h * g.h));
    });
  }
  if (worst_res > res_tol) {
    throw ValidationError("harnack_gap: w is not discretely harmonic: residual = " +
                          fmt(worst_res) + " > " + fmt(res_tol));
  }
  double center_gap = sign * (u.interpolate(ball.center) - w.interpolate(ball.center));
  if (center_gap < mu - 1e-12) {
    throw ValidationError("harnack_gap: center gap " + fmt(center_gap) + " is below mu = " +
                          fmt(mu));
  }
  Ball half{ball.center, 0.5 * ball.radius};
  double min_half = center_gap;
  for_nodes_in_ball(u.grid, half, [&](int i, int j, int k) {
    min_half = std::min(min_half, sign * (u.at(i, j, k) - w.at(i, j, k)));
  });
  return min_half / mu;
}

double weak_nondegeneracy(const GridFunction& u, const Ball& ball, double sigma) {
  if (sigma < 0.0) throw ValidationError("weak_nondegeneracy: sigma must be nonnegative");
  require_ball_inside(u.grid, ball, "weak_nondegeneracy");
  if (!positive_on_ball(u, ball)) {
    throw ValidationError("weak_nondegeneracy: ball is not contained in {u > 0} nodewise");
  }
  return u.interpolate(ball.center);
}

namespace {

void require_on_free_boundary(const GridFunction& u, const Vec& x0, const std::string& op) {
  std::vector<Vec> fb = detail::free_boundary_points(u, 0.5 * u.grid.h);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& p : fb) best = std::min(best, dist(p, x0, u.grid.dim));
  if (!(best <= 2.0 * u.grid.h)) {
    throw ValidationError(op + ": x0 is not on the extracted free boundary (nearest crossing " +
                          (fb.empty() ? std::string("none") : fmt(best)) + ")");
  }
}

}  // namespace

std::vector<NondegRecord> strong_nondegeneracy(const GridFunction& u, const Vec& x0,
                                               const std::vector<double>& radii) {
  require_on_free_boundary(u, x0, "strong_nondegeneracy");
  std::vector<NondegRecord> out;
  for (double r : radii) {
    if (r < 8.0 * u.grid.h) {
      throw ValidationError("strong_nondegeneracy: radius " + fmt(r) + " is below 8h = " +
                            fmt(8.0 * u.grid.h));
    }
    Ball b{x0, r};
    require_ball_inside(u.grid, b, "strong_nondegeneracy");
    double mx = 0.0;
    for_nodes_in_ball(u.grid, b, [&](int i, int j, int k) {
      mx = std::max(mx, u.at(i, j, k));
    });
    out.push_back({r, mx / r});
  }
  return out;
}

double weiss_energy(const GridFunction& u, const Vec& x0, double r) {
  if (r <= 0.0) throw ValidationError("weiss_energy: radius must be positive");
  Ball b{x0, r};
  require_ball_inside(u.grid, b, "weiss_energy");
  EnergyReport bulk = bernoulli_energy(u, b);
  const Grid& g = u.grid;
  int n = g.dim;
  double boundary = 0.0;
  if (n == 2) {
    int N = std::max(64, 4 * int(std::ceil(2.0 * M_PI * r / g.h)));
    double ds = 2.0 * M_PI * r / double(N);
    for (int i = 0; i < N; ++i) {
      double theta = 2.0 * M_PI * double(i) / double(N);
      Vec p = add(x0, vec2(r * std::cos(theta), r * std::sin(theta)));
      double val = u.interpolate(p);
      boundary += val * val * ds;
    }
  } else {
    int Nt = std::max(32, 2 * int(std::ceil(M_PI * r / g.h)));
    int Np = 2 * Nt;
    double dt = M_PI / double(Nt);
    double dp = 2.0 * M_PI / double(Np);
    for (int it = 0; it <= Nt; ++it) {
      double theta = dt * double(it);
      double wt = (it == 0 || it == Nt) ? 0.5 : 1.0;
      double st = std::sin(theta), ct = std::cos(theta);
      for (int ip = 0; ip < Np; ++ip) {
        double phi = dp * double(ip);
        Vec p = add(x0, vec3(r * st * std::cos(phi), r * st * std::sin(phi), r * ct));
        double val = u.interpolate(p);
        boundary += wt * val * val * (r * r * st) * dt * dp;
      }
    }
  }
  return std::pow(r, -double(n)) * bulk.total - std::pow(r, -double(n) - 1.0) * boundary;
}

WeissProfile weiss_profile(const GridFunction& u, const Vec& x0,
                           const std::vector<double>& radii) {
  WeissProfile profile;
  profile.center = x0;
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    if (!(radii[i] < radii[i + 1])) {
      throw ValidationError("weiss_profile: radii must be strictly increasing");
    }
  }
  for (double r : radii) {
    profile.radii.push_back(r);
    profile.values.push_back(weiss_energy(u, x0, r));
  }
  return profile;
}

std::vector<BlowupRecord> blowup_sequence(const GridFunction& u, const Vec& x0,
                                          const std::vector<double>& radii) {
  require_on_free_boundary(u, x0, "blowup_sequence");
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    if (!(radii[i] > radii[i + 1])) {
      throw ValidationError("blowup_sequence: radii must be strictly decreasing");
    }
  }
  std::vector<BlowupRecord> out;
  for (double r : radii) {
    if (r < 16.0 * u.grid.h) {
      throw ValidationError("blowup_sequence: radius " + fmt(r) + " is below the mesh floor 16h = " +
                            fmt(16.0 * u.grid.h));
    }
    BlowupRecord rec;
    rec.r = r;
    rec.field = rescale(u, r, x0);
    detail::HalfPlaneFit fit = detail::best_halfplane_fit(rec.field);
    rec.nu = fit.nu;
    rec.fit_error = fit.error;
    // Hausdorff distance between the rescaled free boundary and the fitted
    // hyperplane through the origin, both restricted to B_{1/2}.
    const Grid& g = rec.field.grid;
    std::vector<Vec> fb = detail::free_boundary_points(rec.field, 0.5 * g.h);
    double d1 = 0.0;
    for (const Vec& p : fb) {
      if (norm(p, g.dim) > 0.5) continue;
      d1 = std::max(d1, std::abs(dot(p, rec.nu, g.dim)));
    }
    double d2 = 0.0;
    Vec t1{0.0, 0.0, 0.0}, t2{0.0, 0.0, 0.0};
    if (g.dim == 2) {
      t1 = vec2(-rec.nu[1], rec.nu[0]);
    } else {
      Vec n = rec.nu;
      t1 = std::abs(n[2]) < 0.9 ? vec3(-n[1], n[0], 0.0) : vec3(0.0, -n[2], n[1]);
      t1 = scale(t1, 1.0 / norm(t1, 3));
      t2 = vec3(n[1] * t1[2] - n[2] * t1[1], n[2] * t1[0] - n[0] * t1[2],
                n[0] * t1[1] - n[1] * t1[0]);
    }
    int steps = int(std::floor(0.5 / g.h));
    for (int a = -steps; a <= steps; ++a) {
      int bmax = g.dim == 3 ? steps : 0;
      for (int b = -bmax; b <= bmax; ++b) {
        Vec z = add(scale(t1, a * g.h), scale(t2, b * g.h));
        if (norm(z, g.dim) > 0.5) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const Vec& p : fb) best = std::min(best, dist(p, z, g.dim));
        if (!fb.empty()) d2 = std::max(d2, best);
      }
    }
    rec.fb_hausdorff = std::max(d1, d2);
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

std::string csv_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

}  // namespace

std::string to_csv(const WeissProfile& profile) {
  std::ostringstream os;
  os << "scale,value\n";
  for (std::size_t i = 0; i < profile.radii.size(); ++i) {
    os << csv_number(profile.radii[i]) << "," << csv_number(profile.values[i]) << "\n";
  }
  return os.str();
}

std::string to_csv(const CampanatoTrace& trace) {
  std::ostringstream os;
  os << "scale,value\n";
  for (const CampanatoRecord& rec : trace.records) {
    os << csv_number(rec.r) << "," << csv_number(rec.deviation) << "\n";
  }
  return os.str();
}

}  // namespace fblab
