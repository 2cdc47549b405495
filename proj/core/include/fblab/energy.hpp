#pragma once

#include <string>
#include <vector>

#include "fblab/lattice.hpp"

namespace fblab {

struct EnergyReport {
  double dirichlet = 0.0;
  double positivity = 0.0;
  double total = 0.0;
};

// J(u, B) = integral over B of |grad u|^2 + chi_{u>0}, via the lattice
// functionals.
EnergyReport bernoulli_energy(const GridFunction& u, const Ball& ball);

enum class AuditMode { Multiplicative, Additive };

// Exactly one of (kappa, beta) or sigma is active, per mode.
struct AlmostMinParams {
  AuditMode mode = AuditMode::Multiplicative;
  double kappa = 0.0;  // multiplicative: J(u) <= (1 + kappa r^beta) J(v)
  double beta = 1.0;
  double sigma = 0.0;  // additive: J(u) <= J(v) + sigma

  static AlmostMinParams multiplicative(double kappa, double beta);
  static AlmostMinParams additive(double sigma);

  // Parameters seen by u_rho(x) = u(x0 + rho x)/rho on B_1: sigma becomes
  // rho^{-n} sigma, kappa becomes kappa rho^beta.
  AlmostMinParams rescaled(double rho, int dim) const;
};

struct Competitor {
  std::string name;
  GridFunction v;
};

struct CompetitorEnergy {
  std::string name;
  double total = 0.0;
  double ratio = 0.0;  // J(u)/J(v)
  double gap = 0.0;    // J(u) - J(v)
};

struct AuditReport {
  Ball ball;
  AuditMode mode = AuditMode::Multiplicative;
  double energy_u = 0.0;
  double worst_ratio = 0.0;
  double worst_gap = 0.0;
  std::string violating_competitor = "none";
  double threshold = 0.0;  // 1 + kappa r^beta (multiplicative) or sigma (additive)
  double slack = 0.0;      // h (1 + J(u,B)), printed next to the verdict
  bool falsified = false;
  std::string verdict;  // "falsified" or "not falsified by suite"
  std::vector<CompetitorEnergy> energies;

  std::string to_json() const;
};

// Evaluates the suite against u on B. Every competitor must agree with u on
// the Dirichlet ring of B (the non-free nodes of member cells). An audit can
// only falsify almost-minimality, never certify it; the passing verdict reads
// "not falsified by suite".
//
// On every run the report also asserts the multiplicative-to-additive
// conversion: a competitor passing the ratio test must pass the gap test with
// sigma = kappa r^beta J(u,B) (plus slack), which is checked arithmetically.
AuditReport audit_almost_minimality(const GridFunction& u, const Ball& ball,
                                    const AlmostMinParams& params,
                                    const std::vector<Competitor>& suite);

// u_rho(x) = u(x0 + rho x)/rho, resampled by bilinear/trilinear interpolation
// onto the box [-1,1]^n with the source spacing. The source patch must cover
// at least 8 source cells per axis.
GridFunction rescale(const GridFunction& u, double rho, const Vec& x0);

// Measure of cells in B on which u vanishes identically.
double zero_set_measure(const GridFunction& u, const Ball& ball);

std::string audit_mode_name(AuditMode mode);

}  // namespace fblab
