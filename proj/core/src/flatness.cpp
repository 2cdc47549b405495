#include "fblab/flatness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "detail_geometry.hpp"

namespace fblab {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::string(buf);
}

std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

void require_unit(const Vec& nu, int dim, const std::string& op) {
  if (std::abs(norm(nu, dim) - 1.0) > 1e-12) {
    throw ValidationError(op + ": nu must be a unit vector");
  }
}

void require_origin_on_fb(const GridFunction& u, const std::string& op) {
  std::vector<Vec> fb = detail::free_boundary_points(u, 0.5 * u.grid.h);
  double best = std::numeric_limits<double>::infinity();
  Vec origin{0.0, 0.0, 0.0};
  for (const Vec& p : fb) best = std::min(best, dist(p, origin, u.grid.dim));
  if (!(best <= 2.0 * u.grid.h)) {
    throw ValidationError(op + ": the origin is not on the extracted free boundary (nearest crossing " +
                          (fb.empty() ? std::string("none") : fmt(best)) + ")");
  }
}

// Orthonormal frame {tangent(s)..., nu} with nu as the vertical axis.
struct Frame {
  Vec t1{0.0, 0.0, 0.0};
  Vec t2{0.0, 0.0, 0.0};  // 3D only
  Vec nu{0.0, 1.0, 0.0};

  // Physical point for grid coordinates y (vertical component last).
  Vec point(const Vec& y, int dim) const {
    Vec x = add(scale(t1, y[0]), scale(nu, y[dim - 1]));
    if (dim == 3) x = add(x, scale(t2, y[1]));
    return x;
  }
};

Frame frame_for(const Vec& nu, int dim) {
  Frame f;
  f.nu = nu;
  if (dim == 2) {
    f.t1 = vec2(nu[1], -nu[0]);
    return f;
  }
  int least = 0;
  for (int d = 1; d < 3; ++d) {
    if (std::abs(nu[d]) < std::abs(nu[least])) least = d;
  }
  Vec e{0.0, 0.0, 0.0};
  e[least] = 1.0;
  Vec t1 = vec3(nu[1] * e[2] - nu[2] * e[1], nu[2] * e[0] - nu[0] * e[2],
                nu[0] * e[1] - nu[1] * e[0]);
  t1 = scale(t1, 1.0 / norm(t1, 3));
  f.t1 = t1;
  f.t2 = vec3(nu[1] * t1[2] - nu[2] * t1[1], nu[2] * t1[0] - nu[0] * t1[2],
              nu[0] * t1[1] - nu[1] * t1[0]);
  return f;
}

bool point_in_box(const Grid& g, const Vec& x) {
  for (int d = 0; d < g.dim; ++d) {
    if (x[d] < g.bounds[d].lo - 1e-12 || x[d] > g.bounds[d].hi + 1e-12) return false;
  }
  return true;
}

}  // namespace

double flatness(const GridFunction& u, const Ball& ball, const Vec& nu) {
  require_ball_inside(u.grid, ball, "flatness");
  require_unit(nu, u.grid.dim, "flatness");
  return detail::halfplane_error(u, ball, nu) / ball.radius;
}

FlatnessCertificate best_direction(const GridFunction& u, const Ball& ball) {
  require_ball_inside(u.grid, ball, "best_direction");
  detail::HalfPlaneFit fit = detail::best_halfplane_fit(u, ball);
  FlatnessCertificate cert;
  cert.r = ball.radius;
  cert.nu = fit.nu;
  cert.epsilon = fit.error / ball.radius;
  return cert;
}

std::string FlatnessCertificate::to_json() const {
  nlohmann::json j;
  j["r"] = r;
  j["nu"] = {nu[0], nu[1], nu[2]};
  j["epsilon"] = epsilon;
  return j.dump(2);
}

ScaledField epsilon_rescale(const GridFunction& u, double eps, const Vec& nu) {
  const Grid& g = u.grid;
  require_unit(nu, g.dim, "epsilon_rescale");
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ValidationError("epsilon_rescale: eps must be positive and finite");
  }
  if (eps < 4.0 * g.h) {
    throw ValidationError("epsilon_rescale: eps = " + fmt(eps) + " is below the resolvable floor 4h = " +
                          fmt(4.0 * g.h));
  }
  Frame f = frame_for(nu, g.dim);
  ScaledField out;
  out.v = GridFunction{g, FieldRole::Signed, std::vector<double>(g.node_count(), 0.0)};
  out.defined.assign(g.node_count(), 0);
  int kmax = g.dim == 3 ? g.shape[2] : 1;
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      for (int k = 0; k < kmax; ++k) {
        Vec y = g.node(i, j, k);
        if (norm(y, g.dim) > 1.0 + 1e-12) continue;
        Vec x = f.point(y, g.dim);
        if (!point_in_box(g, x)) continue;
        double val = u.interpolate(x);
        if (!(val > 0.0)) continue;
        std::size_t id = g.index(i, j, k);
        out.defined[id] = 1;
        out.v.values[id] = (val - y[g.dim - 1]) / eps;
      }
    }
  }
  return out;
}

double linearization_residual(const GridFunction& u, double eps, const Vec& nu) {
  const Grid& g = u.grid;
  require_unit(nu, g.dim, "linearization_residual");
  double measured = flatness(u, unit_ball(), nu);
  if (measured > eps + 1e-12) {
    throw ValidationError("linearization_residual: u is not eps-flat in direction nu (measured " +
                          fmt(measured) + " > " + fmt(eps) + ")");
  }
  ScaledField sf = epsilon_rescale(u, eps, nu);

  // Node classification on the half ball of radius 1/2 in the rotated grid
  // coordinates: vertical axis = last grid axis.
  enum : char { kOutside = 0, kDirichlet = 1, kFree = 2 };
  std::vector<char> cls(g.node_count(), kOutside);
  const int vert = g.dim - 1;
  int kmax = g.dim == 3 ? g.shape[2] : 1;
  auto vertical_lift = [&](int i, int j, int k) {
    // First defined scaled value at or above this node, walking up the
    // vertical axis; the curved boundary data near the bottom may sit under
    // the positivity set, in which case the column value just above is the
    // honest sample.
    while (true) {
      Vec y = g.node(i, j, k);
      if (norm(y, g.dim) > 1.0 + 1e-12) return 0.0;
      std::size_t id = g.index(i, j, k);
      if (sf.defined[id]) return sf.v.values[id];
      if (vert == 1) {
        if (++j >= g.shape[1]) return 0.0;
      } else {
        if (++k >= g.shape[2]) return 0.0;
      }
    }
  };
  std::vector<double> sol(g.node_count(), 0.0);
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      for (int k = 0; k < kmax; ++k) {
        Vec y = g.node(i, j, k);
        if (y[vert] < -1e-12) continue;
        double d = norm(y, g.dim);
        if (d > 0.5 + 1e-12) continue;
        std::size_t id = g.index(i, j, k);
        if (d > 0.5 - 1.5 * g.h) {
          cls[id] = kDirichlet;
          sol[id] = vertical_lift(i, j, k);
        } else {
          cls[id] = kFree;
          sol[id] = sf.defined[id] ? sf.v.values[id] : 0.0;
        }
      }
    }
  }

  double data_scale = 0.0;
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    if (cls[id] == kDirichlet) data_scale = std::max(data_scale, std::abs(sol[id]));
  }

  // SOR sweeps; the flat bottom row reflects its missing lower neighbor onto
  // the upper one, which is the exact second-order Neumann closure.
  const double omega = 2.0 / (1.0 + std::sin(M_PI * g.h));
  const double tol = 1e-11 * (1.0 + data_scale);
  bool converged = false;
  for (int sweep = 0; sweep < 30000; ++sweep) {
    double worst = 0.0;
    for (int i = 0; i < g.shape[0]; ++i) {
      for (int j = 0; j < g.shape[1]; ++j) {
        for (int k = 0; k < kmax; ++k) {
          std::size_t id = g.index(i, j, k);
          if (cls[id] != kFree) continue;
          double acc = 0.0;
          for (int d = 0; d < g.dim; ++d) {
            int im = i - (d == 0), jm = j - (d == 1), km = k - (d == 2);
            int ip = i + (d == 0), jp = j + (d == 1), kp = k + (d == 2);
            bool mirror = d == vert && g.node(i, j, k)[vert] < 0.5 * g.h;
            double lo = mirror ? sol[g.index(ip, jp, kp)] : sol[g.index(im, jm, km)];
            double hi = sol[g.index(ip, jp, kp)];
            acc += lo + hi;
          }
          double next = acc / (2.0 * g.dim);
          double updated = (1.0 - omega) * sol[id] + omega * next;
          worst = std::max(worst, std::abs(updated - sol[id]));
          sol[id] = updated;
        }
      }
    }
    if (worst <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericalError("linearization_residual: the half-ball Neumann solve did not converge");
  }

  double residual = 0.0;
  std::size_t compared = 0;
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      for (int k = 0; k < kmax; ++k) {
        Vec y = g.node(i, j, k);
        if (norm(y, g.dim) > 0.25 + 1e-12) continue;
        if (!(y[vert] > 2.0 * eps)) continue;
        std::size_t id = g.index(i, j, k);
        if (!sf.defined[id] || cls[id] == kOutside) continue;
        residual = std::max(residual, std::abs(sf.v.values[id] - sol[id]));
        ++compared;
      }
    }
  }
  if (compared == 0) {
    throw ValidationError("linearization_residual: no comparison nodes above the 2 eps strip");
  }
  return residual;
}

namespace {

void require_iteration_params(const Grid& g, double alpha, double eta, const std::string& op) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw ValidationError(op + ": alpha must lie in (0, 1)");
  }
  if (!(eta > 0.0) || !(eta <= 0.5)) {
    throw ValidationError(op + ": eta must lie in (0, 1/2]");
  }
  if (eta < 8.0 * g.h) {
    throw ValidationError(op + ": eta = " + fmt(eta) + " is below the mesh floor 8h = " + fmt(8.0 * g.h));
  }
}

}  // namespace

FlatnessCertificate improve_flatness(const GridFunction& u, double eps, double alpha, double eta,
                                     double sigma) {
  const Grid& g = u.grid;
  require_iteration_params(g, alpha, eta, "improve_flatness");
  if (!(eps > 0.0)) throw ValidationError("improve_flatness: eps must be positive");
  if (sigma < 0.0) throw ValidationError("improve_flatness: sigma must be nonnegative");
  require_origin_on_fb(u, "improve_flatness");
  FlatnessCertificate base = best_direction(u, unit_ball());
  if (base.epsilon > eps + 1e-12) {
    throw ValidationError("improve_flatness: u is not eps-flat on B_1 (measured " + fmt(base.epsilon) +
                          " > " + fmt(eps) + ")");
  }
  double gate = std::pow(eps, g.dim + 4);
  if (sigma > gate + 1e-18) {
    throw ValidationError("improve_flatness: sigma = " + fmt(sigma) + " exceeds eps^{n+4} = " + fmt(gate));
  }
  return best_direction(u, Ball{{0.0, 0.0, 0.0}, eta});
}

FlatnessIteration iterate_flatness(const GridFunction& u, double eps0, double alpha, double eta,
                                   double kappa, double beta) {
  const Grid& g = u.grid;
  require_iteration_params(g, alpha, eta, "iterate_flatness");
  if (!(eps0 > 0.0)) throw ValidationError("iterate_flatness: eps0 must be positive");
  if (kappa < 0.0) throw ValidationError("iterate_flatness: kappa must be nonnegative");
  if (!(beta > 0.0) || !(beta <= 1.0)) {
    throw ValidationError("iterate_flatness: beta must lie in (0, 1]");
  }
  require_origin_on_fb(u, "iterate_flatness");

  FlatnessIteration it;
  FlatnessCertificate base = best_direction(u, unit_ball());
  if (base.epsilon > eps0 + 1e-12) {
    throw ValidationError("iterate_flatness: u is not eps0-flat on B_1 (measured " + fmt(base.epsilon) +
                          " > " + fmt(eps0) + ")");
  }
  double entry_gate = std::pow(eps0, g.dim + 4);
  if (kappa > entry_gate + 1e-18) {
    throw ValidationError("iterate_flatness: kappa = " + fmt(kappa) +
                          " exceeds the entry gate eps0^{n+4} = " + fmt(entry_gate));
  }
  it.certificates.push_back(base);

  double eps_k = base.epsilon;
  for (int k = 0;; ++k) {
    double r_next = std::pow(eta, k + 1);
    if (r_next < 8.0 * g.h - 1e-15) break;
    FlatnessStep st;
    st.k = k;
    st.cert = best_direction(u, Ball{{0.0, 0.0, 0.0}, r_next});
    double eps_next = st.cert.epsilon;
    if (eps_k < 1e-15) {
      st.decay = 0.0;
      st.bound = std::numeric_limits<double>::infinity();
      st.decay_ok = true;
    } else {
      st.decay = eps_next / eps_k;
      st.bound = std::pow(eta, 1.0 + alpha) + 20.0 * g.h / eps_k;
      st.decay_ok = st.decay <= st.bound;
    }
    st.sigma_k = kappa * std::pow(eta, double(k) * beta);
    st.sigma_gate = std::pow(eps_k, g.dim + 4);
    st.sigma_ok = st.sigma_k <= st.sigma_gate + 1e-18;
    if (!st.decay_ok && it.note.empty()) {
      it.note = "decay assertion failed at step k=" + std::to_string(k) + " (factor " + fmt(st.decay) +
                " > bound " + fmt(st.bound) + ")";
    }
    if (!st.sigma_ok && it.note.empty()) {
      it.note = "almost-minimality bookkeeping failed at step k=" + std::to_string(k) + " (sigma " +
                fmt(st.sigma_k) + " > " + fmt(st.sigma_gate) + ")";
    }
    it.all_verified = it.all_verified && st.decay_ok && st.sigma_ok;
    it.certificates.push_back(st.cert);
    it.steps.push_back(st);
    eps_k = eps_next;
  }
  if (it.steps.empty()) {
    it.note = "no scales above the mesh floor";
    it.all_verified = false;
  }
  return it;
}

std::string FlatnessIteration::to_csv() const {
  std::string out = "k,r,eps,decay,bound,decay_ok,sigma,sigma_gate,sigma_ok\n";
  for (const FlatnessStep& st : steps) {
    out += std::to_string(st.k) + "," + csv_num(st.cert.r) + "," + csv_num(st.cert.epsilon) + "," +
           csv_num(st.decay) + "," + csv_num(st.bound) + "," + (st.decay_ok ? "1" : "0") + "," +
           csv_num(st.sigma_k) + "," + csv_num(st.sigma_gate) + "," + (st.sigma_ok ? "1" : "0") + "\n";
  }
  return out;
}

FreeBoundary extract_free_boundary(const GridFunction& u) {
  const Grid& g = u.grid;
  const double thr = 0.5 * g.h;
  FreeBoundary fb;
  fb.h = g.h;
  fb.dim = g.dim;

  // Crossing points keyed by lattice edge (base node index, axis).
  std::unordered_map<std::size_t, std::size_t> edge_point;
  auto edge_key = [&](int i, int j, int k, int d) {
    return g.index(i, j, k) * 3 + static_cast<std::size_t>(d);
  };
  int kmax = g.dim == 3 ? g.shape[2] : 1;
  for (int i = 0; i < g.shape[0]; ++i) {
    for (int j = 0; j < g.shape[1]; ++j) {
      for (int k = 0; k < kmax; ++k) {
        double v0 = u.at(i, j, k);
        for (int d = 0; d < g.dim; ++d) {
          int ni = i + (d == 0), nj = j + (d == 1), nk = k + (d == 2);
          if (ni >= g.shape[0] || nj >= g.shape[1] || (g.dim == 3 && nk >= g.shape[2])) continue;
          double v1 = u.at(ni, nj, nk);
          if ((v0 > thr) == (v1 > thr)) continue;
          double t = (thr - v0) / (v1 - v0);
          Vec p = g.node(i, j, k);
          p[d] += t * g.h;
          edge_point[edge_key(i, j, k, d)] = fb.points.size();
          fb.points.push_back(p);
        }
      }
    }
  }
  if (fb.points.empty()) {
    throw ValidationError("extract_free_boundary: no positivity transition at threshold h/2");
  }

  // Normals from the interpolated central-difference gradient, clamped to the
  // box; zero where the gradient degenerates.
  fb.normals.reserve(fb.points.size());
  for (const Vec& p : fb.points) {
    Vec grad{0.0, 0.0, 0.0};
    for (int d = 0; d < g.dim; ++d) {
      Vec lo = p, hi = p;
      lo[d] = std::max(lo[d] - g.h, g.bounds[d].lo);
      hi[d] = std::min(hi[d] + g.h, g.bounds[d].hi);
      double denom = hi[d] - lo[d];
      grad[d] = denom > 0.0 ? (u.interpolate(hi) - u.interpolate(lo)) / denom : 0.0;
    }
    double n = norm(grad, g.dim);
    fb.normals.push_back(n > 1e-12 ? scale(grad, 1.0 / n) : Vec{0.0, 0.0, 0.0});
  }

  if (g.dim == 2) {
    // Marching-cells adjacency: each cell contributes the segment(s) of the
    // interpolated level line, with the center value resolving saddles.
    for (int i = 0; i + 1 < g.shape[0]; ++i) {
      for (int j = 0; j + 1 < g.shape[1]; ++j) {
        std::array<std::size_t, 4> ids{};  // bottom, right, top, left
        std::array<bool, 4> present{};
        auto lookup = [&](int bi, int bj, int d, int slot) {
          auto itr = edge_point.find(edge_key(bi, bj, 0, d));
          if (itr != edge_point.end()) {
            ids[slot] = itr->second;
            present[slot] = true;
          }
        };
        lookup(i, j, 0, 0);
        lookup(i + 1, j, 1, 1);
        lookup(i, j + 1, 0, 2);
        lookup(i, j, 1, 3);
        int count = int(present[0]) + int(present[1]) + int(present[2]) + int(present[3]);
        if (count == 2) {
          std::array<std::size_t, 2> seg{};
          int at = 0;
          for (int s = 0; s < 4; ++s) {
            if (present[s]) seg[at++] = ids[s];
          }
          fb.edges.push_back(seg);
        } else if (count == 4) {
          double center = 0.25 * (u.at(i, j) + u.at(i + 1, j) + u.at(i, j + 1) + u.at(i + 1, j + 1));
          bool v00 = u.at(i, j) > thr;
          // Corners pair with their two incident cell edges: v00 with
          // (bottom,left), v10 with (bottom,right), v01 with (top,left),
          // v11 with (top,right). The level line separates whichever
          // diagonal pair the center value disagrees with.
          if ((center > thr) == v00) {
            fb.edges.push_back({ids[0], ids[3]});
            fb.edges.push_back({ids[2], ids[1]});
          } else {
            fb.edges.push_back({ids[0], ids[1]});
            fb.edges.push_back({ids[2], ids[3]});
          }
        }
      }
    }
  } else {
    // 3D adjacency: bucket hash, pairs within 1.5h.
    std::unordered_map<long long, std::vector<std::size_t>> buckets;
    auto bucket_of = [&](const Vec& p) {
      long long bx = static_cast<long long>(std::floor(p[0] / g.h));
      long long by = static_cast<long long>(std::floor(p[1] / g.h));
      long long bz = static_cast<long long>(std::floor(p[2] / g.h));
      return (bx * 73856093LL) ^ (by * 19349663LL) ^ (bz * 83492791LL);
    };
    for (std::size_t idx = 0; idx < fb.points.size(); ++idx) {
      buckets[bucket_of(fb.points[idx])].push_back(idx);
    }
    for (std::size_t idx = 0; idx < fb.points.size(); ++idx) {
      const Vec& p = fb.points[idx];
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            Vec q = p;
            q[0] += dx * g.h;
            q[1] += dy * g.h;
            q[2] += dz * g.h;
            auto itr = buckets.find(bucket_of(q));
            if (itr == buckets.end()) continue;
            for (std::size_t other : itr->second) {
              if (other <= idx) continue;
              if (dist(p, fb.points[other], 3) <= 1.5 * g.h) fb.edges.push_back({idx, other});
            }
          }
        }
      }
    }
    std::sort(fb.edges.begin(), fb.edges.end());
    fb.edges.erase(std::unique(fb.edges.begin(), fb.edges.end()), fb.edges.end());
  }
  return fb;
}

std::string FreeBoundary::to_csv() const {
  std::string out = "x,y,z,nx,ny,nz\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec& p = points[i];
    const Vec& n = normals[i];
    out += csv_num(p[0]) + "," + csv_num(p[1]) + "," + csv_num(p[2]) + "," + csv_num(n[0]) + "," +
           csv_num(n[1]) + "," + csv_num(n[2]) + "\n";
  }
  return out;
}

HausdorffEstimate hausdorff_estimate(const FreeBoundary& fb, const Ball& ball) {
  if (fb.h <= 0.0) throw ValidationError("hausdorff_estimate: free boundary carries no grid spacing");
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < fb.points.size(); ++i) {
    if (dist(fb.points[i], ball.center, fb.dim) <= ball.radius + 1e-12) inside.push_back(i);
  }
  if (inside.empty()) {
    throw ValidationError("hausdorff_estimate: no free boundary points in the ball");
  }

  HausdorffEstimate est;
  double s = 0.25;
  while (s >= 4.0 * fb.h - 1e-15) {
    std::unordered_set<long long> boxes;
    for (std::size_t i : inside) {
      const Vec& p = fb.points[i];
      long long key = 0;
      for (int d = 0; d < fb.dim; ++d) {
        long long c = static_cast<long long>(std::floor((p[d] - (ball.center[d] - ball.radius)) / s));
        key = key * 4096 + (c + 1024);
      }
      boxes.insert(key);
    }
    est.counts.push_back({s, double(boxes.size())});
    s *= 0.5;
  }
  if (est.counts.size() < 2) {
    throw ValidationError("hausdorff_estimate: grid too coarse for dyadic box counting in [4h, 1/4]");
  }

  // Least-squares slope of log N against log(1/s).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& row : est.counts) {
    double x = std::log(1.0 / row[0]);
    double y = std::log(row[1]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double m = double(est.counts.size());
  est.dimension = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const auto& finest = est.counts.back();
  est.content = finest[1] * std::pow(finest[0], fb.dim - 1);

  if (fb.dim == 2) {
    for (const auto& e : fb.edges) {
      const Vec& a = fb.points[e[0]];
      const Vec& b = fb.points[e[1]];
      if (dist(a, ball.center, 2) <= ball.radius + 1e-12 &&
          dist(b, ball.center, 2) <= ball.radius + 1e-12) {
        est.polyline_length += dist(a, b, 2);
      }
    }
  }
  return est;
}

std::string HausdorffEstimate::to_csv() const {
  std::string out = "scale,count\n";
  for (const auto& row : counts) {
    out += csv_num(row[0]) + "," + csv_num(row[1]) + "\n";
  }
  return out;
}

double c1alpha_fit(const FreeBoundary& fb, const Ball& window, double alpha) {
  if (!(alpha > 0.0) || !(alpha <= 1.0)) {
    throw ValidationError("c1alpha_fit: alpha must lie in (0, 1]");
  }
  std::vector<std::size_t> inside;
  Vec mean_normal{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < fb.points.size(); ++i) {
    if (dist(fb.points[i], window.center, fb.dim) > window.radius + 1e-12) continue;
    inside.push_back(i);
    mean_normal = add(mean_normal, fb.normals[i]);
  }
  if (inside.size() < 5) {
    throw ValidationError("c1alpha_fit: too few free boundary points in the window");
  }
  double mn = norm(mean_normal, fb.dim);
  if (mn <= 1e-12) {
    throw ValidationError("c1alpha_fit: window normals are degenerate");
  }
  Vec n = scale(mean_normal, 1.0 / mn);

  if (fb.dim == 2) {
    Vec tau = vec2(n[1], -n[0]);
    struct TS {
      double t, s;
    };
    std::vector<TS> pts;
    pts.reserve(inside.size());
    for (std::size_t i : inside) {
      Vec d = sub(fb.points[i], window.center);
      pts.push_back({dot(d, tau, 2), dot(d, n, 2)});
    }
    std::sort(pts.begin(), pts.end(), [](const TS& a, const TS& b) { return a.t < b.t; });
    // Slopes are estimated by least squares over blocks of width 8h and the
    // Holder quotient is taken between block centers. Extracted points carry
    // O(h) sub-cell aliasing, so a quotient at single-cell separation would
    // diverge under refinement instead of measuring the curve.
    const double w = 8.0 * fb.h;
    struct BlockSlope {
      double center, slope;
    };
    std::vector<BlockSlope> blocks;
    std::size_t lo = 0;
    while (lo < pts.size()) {
      double t0 = pts[lo].t;
      std::size_t hi = lo;
      while (hi < pts.size() && pts[hi].t < t0 + w) ++hi;
      double span = pts[hi - 1].t - t0;
      if (hi - lo >= 3 && span >= 0.5 * w) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
          sx += pts[i].t;
          sy += pts[i].s;
          sxx += pts[i].t * pts[i].t;
          sxy += pts[i].t * pts[i].s;
        }
        double m = double(hi - lo);
        double denom = m * sxx - sx * sx;
        if (denom > 0.0) blocks.push_back({sx / m, (m * sxy - sx * sy) / denom});
      }
      lo = hi;
    }
    if (blocks.size() < 2) {
      throw ValidationError("c1alpha_fit: window too small to resolve graph slopes (needs >= 16h)");
    }
    double seminorm = 0.0;
    for (std::size_t p = 0; p < blocks.size(); ++p) {
      for (std::size_t q = p + 1; q < blocks.size(); ++q) {
        double sep = blocks[q].center - blocks[p].center;
        seminorm = std::max(seminorm,
                            std::abs(blocks[q].slope - blocks[p].slope) / std::pow(sep, alpha));
      }
    }
    return seminorm;
  }

  // 3D: least-squares plane in the mean-normal frame; the residual against
  // the window scale is the planar-window bound.
  Frame f = frame_for(n, 3);
  double a00 = 0.0, a01 = 0.0, a02 = 0.0, a11 = 0.0, a12 = 0.0, a22 = 0.0;
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i : inside) {
    Vec d = sub(fb.points[i], window.center);
    double t1 = dot(d, f.t1, 3), t2 = dot(d, f.t2, 3), sv = dot(d, n, 3);
    a00 += 1.0;
    a01 += t1;
    a02 += t2;
    a11 += t1 * t1;
    a12 += t1 * t2;
    a22 += t2 * t2;
    b0 += sv;
    b1 += t1 * sv;
    b2 += t2 * sv;
  }
  // Solve the 3x3 normal equations by Cramer's rule.
  double det = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) +
               a02 * (a01 * a12 - a11 * a02);
  if (std::abs(det) < 1e-18) {
    throw ValidationError("c1alpha_fit: degenerate plane fit in the window");
  }
  double c0 = (b0 * (a11 * a22 - a12 * a12) - a01 * (b1 * a22 - a12 * b2) +
               a02 * (b1 * a12 - a11 * b2)) /
              det;
  double c1 = (a00 * (b1 * a22 - b2 * a12) - b0 * (a01 * a22 - a12 * a02) +
               a02 * (a01 * b2 - b1 * a02)) /
              det;
  double c2 = (a00 * (a11 * b2 - a12 * b1) - a01 * (a01 * b2 - b1 * a02) +
               b0 * (a01 * a12 - a11 * a02)) /
              det;
  double worst = 0.0;
  for (std::size_t i : inside) {
    Vec d = sub(fb.points[i], window.center);
    double t1 = dot(d, f.t1, 3), t2 = dot(d, f.t2, 3), sv = dot(d, n, 3);
    worst = std::max(worst, std::abs(sv - (c0 + c1 * t1 + c2 * t2)));
  }
  return worst / std::pow(window.radius, 1.0 + alpha);
}

}  // namespace fblab
