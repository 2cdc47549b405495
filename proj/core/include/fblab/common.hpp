#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fblab {

// Point/vector in the ambient space. Component 2 is unused in 2D and must be 0.
using Vec = std::array<double, 3>;

inline Vec vec2(double x, double y) { return {x, y, 0.0}; }
inline Vec vec3(double x, double y, double z) { return {x, y, z}; }

inline double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += a[d] * b[d];
  return s;
}

inline double norm(const Vec& a, int dim) { return std::sqrt(dot(a, a, dim)); }

inline Vec sub(const Vec& a, const Vec& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec add(const Vec& a, const Vec& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec scale(const Vec& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

inline double dist(const Vec& a, const Vec& b, int dim) { return norm(sub(a, b), dim); }

// Invalid user/config input (CLI exit code 2).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A solve or iteration failed numerically (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A verified claim (postcondition recomputed from grid data) does not hold
// (CLI exit code 4).
class ClaimError : public std::runtime_error {
 public:
  explicit ClaimError(const std::string& what) : std::runtime_error(what) {}
};

// Sums a set of terms in a canonical order. Used where a functional claims
// exact invariance under lattice symmetries: the symmetry permutes the terms,
// and sorting before summation makes the result independent of traversal
// order.
inline double canonical_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

// Thread budget: min(FBLAB_THREADS, hardware). Defaults to 1 so every run is
// sequential unless the user opts in.
int thread_budget();

// Index-parallel loop with deterministic output: the body writes results
// keyed by index, never into shared accumulators. Falls back to a plain loop
// when the budget is 1.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int budget = thread_budget();
  if (budget <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::size_t nthreads = std::min<std::size_t>(budget, n);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fblab
