#pragma once

#include <Eigen/Core>
#include <string>

#include "mcmccert/metric_space.hpp"

namespace mcmccert {

// Real observable on a finite space: a dense value table plus the declared
// Lipschitz seminorm. The norm is declared by the caller and verified, never
// inferred.
struct Observable {
  Eigen::VectorXd values;
  double lip_norm = 1.0;
  std::string name;
};

// Exact Lipschitz seminorm max_{x != y} |f(x)-f(y)| / d(x,y) over all pairs.
double lipschitz_seminorm(const Eigen::VectorXd& f, const FiniteMetricSpace& space);

// Checks |f(x)-f(y)| <= lip_norm * d(x,y) on all pairs.
// Throws Error("LipschitzViolated") with the offending pair.
void verify_lipschitz(const Observable& obs, const FiniteMetricSpace& space, double tol = 1e-12);

// Rescales a raw table so its exact seminorm equals `target` (constant tables
// are returned unchanged with lip_norm = target).
Observable scaled_to_lipschitz(Eigen::VectorXd raw, const FiniteMetricSpace& space, double target,
                               std::string name);

}  // namespace mcmccert
