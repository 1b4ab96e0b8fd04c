#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "mcmccert/distribution.hpp"
#include "mcmccert/metric_space.hpp"

namespace mcmccert {

// Coupling between two finite distributions. `pairs` lists (source point,
// target point, mass); cost = sum mass * d(source, target).
struct TransportPlan {
  struct Entry {
    int src;
    int dst;
    double mass;
  };
  std::vector<Entry> pairs;
  double cost = 0.0;
};

struct W1Result {
  double value = 0.0;
  TransportPlan plan;
};

struct W1Options {
  std::size_t max_support = 20000;  // cap on combined support size
  bool want_plan = true;            // skip plan assembly in hot sweeps
};

// Exact Wasserstein-1 distance between mu and nu under the space metric,
// solved as a min-cost flow by successive shortest paths. Masses are scaled
// to integers with denominator 2^48 (residual assigned to the heaviest atom)
// so pivoting is exact; costs stay in double precision.
W1Result wasserstein1(const FiniteDistribution& mu, const FiniteDistribution& nu,
                      const FiniteMetricSpace& space, const W1Options& opts = {});

struct DualResult {
  double value = 0.0;            // mu(f) - nu(f) for the returned potential
  std::vector<int> support;      // combined support, ascending
  Eigen::VectorXd potential;     // f on the combined support; 1-Lipschitz
};

struct DualOptions {
  std::size_t max_support = 1024;  // dense tableau; keep modest
};

// Kantorovich-Rubinstein dual: max over 1-Lipschitz f of mu(f) - nu(f).
// Solved independently of wasserstein1 by a transportation simplex on the
// support-pair tableau; the optimal (u, v) potentials are verified feasible
// against the raw costs and folded into a single 1-Lipschitz potential f, so
// the returned value is a certified lower bound on W1 that matches it at the
// optimum. Strong duality on finite spaces makes this a test oracle for the
// flow solver.
DualResult kantorovich_dual(const FiniteDistribution& mu, const FiniteDistribution& nu,
                            const FiniteMetricSpace& space, const DualOptions& opts = {});

// Verifies marginals, nonnegativity and the cost identity of a plan.
// Throws Error("PlanInvalid") describing the first violation.
void check_transport_plan(const TransportPlan& plan, const FiniteDistribution& mu,
                          const FiniteDistribution& nu, const FiniteMetricSpace& space,
                          double tol = 1e-10);

}  // namespace mcmccert
