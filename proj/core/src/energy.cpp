#include "fblab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "fblab/elliptic.hpp"

namespace fblab {

EnergyReport bernoulli_energy(const GridFunction& u, const Ball& ball) {
  EnergyReport r;
  r.dirichlet = dirichlet_energy(u, ball);
  r.positivity = positivity_measure(u, ball);
  r.total = r.dirichlet + r.positivity;
  return r;
}

AlmostMinParams AlmostMinParams::multiplicative(double kappa, double beta) {
  if (kappa < 0.0) throw ValidationError("almost-min params: kappa must be >= 0");
  if (!(beta > 0.0) || beta > 1.0) {
    throw ValidationError("almost-min params: beta must lie in (0, 1]");
  }
  AlmostMinParams p;
  p.mode = AuditMode::Multiplicative;
  p.kappa = kappa;
  p.beta = beta;
  return p;
}

AlmostMinParams AlmostMinParams::additive(double sigma) {
  if (sigma < 0.0) throw ValidationError("almost-min params: sigma must be >= 0");
  AlmostMinParams p;
  p.mode = AuditMode::Additive;
  p.sigma = sigma;
  return p;
}

AlmostMinParams AlmostMinParams::rescaled(double rho, int dim) const {
  if (!(rho > 0.0)) throw ValidationError("almost-min params: rho must be > 0");
  AlmostMinParams p = *this;
  if (mode == AuditMode::Additive) {
    p.sigma = sigma * std::pow(rho, -dim);
  } else {
    p.kappa = kappa * std::pow(rho, beta);
  }
  return p;
}

std::string audit_mode_name(AuditMode mode) {
  return mode == AuditMode::Multiplicative ? "multiplicative" : "additive";
}

namespace {

void require_ring_agreement(const GridFunction& u, const Competitor& c,
                            const Ball& ball) {
  if (c.v.grid.node_count() != u.grid.node_count() || c.v.grid.h != u.grid.h) {
    throw ValidationError("audit: competitor \"" + c.name + "\" lives on a different grid");
  }
  std::vector<char> is_free(u.grid.node_count(), 0);
  for (std::size_t id : free_nodes_in_ball(u.grid, ball)) is_free[id] = 1;
  bool bad = false;
  for_cells_in_ball(u.grid, ball, [&](int i, int j, int k) {
    const Grid& g = u.grid;
    for (int ci = 0; ci < 2 && !bad; ++ci) {
      for (int cj = 0; cj < 2 && !bad; ++cj) {
        int kk = g.dim == 3 ? 2 : 1;
        for (int ck = 0; ck < kk && !bad; ++ck) {
          std::size_t id = g.index(i + ci, j + cj, k + ck);
          if (!is_free[id] && std::abs(c.v.values[id] - u.values[id]) > 1e-12) {
            bad = true;
          }
        }
      }
    }
  });
  if (bad) {
    throw ValidationError("audit: competitor \"" + c.name +
                          "\" does not match u on the Dirichlet ring");
  }
}

}  // namespace

AuditReport audit_almost_minimality(const GridFunction& u, const Ball& ball,
                                    const AlmostMinParams& params,
                                    const std::vector<Competitor>& suite) {
  require_ball_inside(u.grid, ball, "audit_almost_minimality");
  AuditReport rep;
  rep.ball = ball;
  rep.mode = params.mode;
  double j_u = bernoulli_energy(u, ball).total;
  rep.energy_u = j_u;
  // First-order quadrature consistency: the discrete energies of u and a
  // competitor on the same grid disagree with their continuum counterparts by
  // O(h) with a constant proportional to the field's own energy scale. The
  // verdict applies this slack in absolute energy units in both modes.
  rep.slack = u.grid.h * (1.0 + j_u);
  double r_beta = std::pow(ball.radius, params.beta);
  rep.threshold = params.mode == AuditMode::Multiplicative
                      ? 1.0 + params.kappa * r_beta
                      : params.sigma;

  rep.worst_ratio = 0.0;
  rep.worst_gap = 0.0;
  std::string worst_name = "none";
  double worst_excess = 0.0;
  bool first = true;
  for (const Competitor& c : suite) {
    require_ring_agreement(u, c, ball);
    double j_v = bernoulli_energy(c.v, ball).total;
    CompetitorEnergy ce;
    ce.name = c.name;
    ce.total = j_v;
    ce.gap = j_u - j_v;
    if (j_v > 0.0) {
      ce.ratio = j_u / j_v;
    } else {
      ce.ratio = j_u > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    // How far this competitor pushes past the claimed bound, in energy units:
    // multiplicative asks J(u) <= (1 + kappa r^beta) J(v), additive asks
    // J(u) <= J(v) + sigma. The slack is applied to this excess, so both
    // modes compare like with like.
    double excess = params.mode == AuditMode::Multiplicative
                        ? j_u - rep.threshold * j_v
                        : ce.gap - rep.threshold;
    // Worst case reduces deterministically: strict improvement only, so the
    // earliest competitor wins ties in the fixed suite order.
    if (first || excess > worst_excess) {
      worst_name = c.name;
      worst_excess = excess;
    }
    if (first) {
      rep.worst_ratio = ce.ratio;
      rep.worst_gap = ce.gap;
      first = false;
    } else {
      rep.worst_ratio = std::max(rep.worst_ratio, ce.ratio);
      rep.worst_gap = std::max(rep.worst_gap, ce.gap);
    }
    // Multiplicative-to-additive conversion: a competitor passing the
    // multiplicative test must pass the additive one with
    // sigma = kappa r^beta C_bound, C_bound measured as J(u,B).
    if (params.mode == AuditMode::Multiplicative && excess <= rep.slack) {
      double sigma_implied = params.kappa * r_beta * j_u + rep.slack;
      if (ce.gap > sigma_implied + 1e-9 * (1.0 + j_u)) {
        throw ClaimError("audit: competitor \"" + c.name +
                         "\" passes the ratio test but violates the implied "
                         "additive bound");
      }
    }
    rep.energies.push_back(ce);
  }

  rep.falsified = !suite.empty() && worst_excess > rep.slack;
  rep.violating_competitor = rep.falsified ? worst_name : "none";
  rep.verdict = rep.falsified ? "falsified" : "not falsified by suite";
  return rep;
}

std::string AuditReport::to_json() const {
  nlohmann::json j;
  j["ball"]["center"] = {ball.center[0], ball.center[1], ball.center[2]};
  j["ball"]["radius"] = ball.radius;
  j["mode"] = audit_mode_name(mode);
  j["energy_u"] = energy_u;
  j["worst_ratio"] = worst_ratio;
  j["worst_gap"] = worst_gap;
  j["violating_competitor"] = violating_competitor;
  j["threshold"] = threshold;
  j["slack"] = slack;
  j["falsified"] = falsified;
  j["verdict"] = verdict;
  nlohmann::json arr = nlohmann::json::array();
  for (const CompetitorEnergy& ce : energies) {
    arr.push_back({{"name", ce.name}, {"total", ce.total}, {"ratio", ce.ratio}, {"gap", ce.gap}});
  }
  j["competitors"] = arr;
  return j.dump(2);
}

GridFunction rescale(const GridFunction& u, double rho, const Vec& x0) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw ValidationError("rescale: rho must be positive and finite");
  }
  const Grid& g = u.grid;
  for (int d = 0; d < g.dim; ++d) {
    if (x0[d] - rho < g.bounds[d].lo - 1e-12 || x0[d] + rho > g.bounds[d].hi + 1e-12) {
      throw ValidationError("rescale: source patch leaves the grid on axis " +
                            std::to_string(d));
    }
  }
  if (2.0 * rho / g.h < 8.0 - 1e-9) {
    throw ValidationError("rescale: source patch covers fewer than 8 source cells");
  }
  std::vector<Interval> bounds(g.dim, Interval{-1.0, 1.0});
  Grid target = make_grid(bounds, g.h);
  GridFunction out;
  out.grid = target;
  out.role = u.role;
  out.values.resize(target.node_count());
  int nk = target.dim == 3 ? target.shape[2] : 1;
  for (int i = 0; i < target.shape[0]; ++i) {
    for (int j = 0; j < target.shape[1]; ++j) {
      for (int k = 0; k < nk; ++k) {
        Vec x = target.node(i, j, k);
        Vec src = add(x0, scale(x, rho));
        for (int d = 0; d < g.dim; ++d) {
          src[d] = std::clamp(src[d], g.bounds[d].lo, g.bounds[d].hi);
        }
        double v = u.interpolate(src) / rho;
        if (u.role == FieldRole::Nonnegative && v < 0.0) v = 0.0;
        out.values[target.index(i, j, k)] = v;
      }
    }
  }
  return out;
}

double zero_set_measure(const GridFunction& u, const Ball& ball) {
  return zero_cell_measure(u, ball);
}

}  // namespace fblab
