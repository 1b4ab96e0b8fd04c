#include "mcmccert/observable.hpp"

#include <cmath>

#include "mcmccert/errors.hpp"

namespace mcmccert {

double lipschitz_seminorm(const Eigen::VectorXd& f, const FiniteMetricSpace& space) {
  const int n = space.size();
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double ratio = std::abs(f[i] - f[j]) / space.dist(i, j);
      if (ratio > best) best = ratio;
    }
  return best;
}

void verify_lipschitz(const Observable& obs, const FiniteMetricSpace& space, double tol) {
  const int n = space.size();
  if (obs.values.size() != n)
    throw Error("LipschitzViolated", "observable table size does not match the space");
  if (!(obs.lip_norm >= 0.0))
    throw Error("LipschitzViolated", "declared Lipschitz norm must be nonnegative");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double gap = std::abs(obs.values[i] - obs.values[j]) - obs.lip_norm * space.dist(i, j);
      if (gap > tol)
        throw Error("LipschitzViolated",
                    "observable '" + obs.name + "' exceeds declared norm by " + std::to_string(gap),
                    i, j);
    }
}

Observable scaled_to_lipschitz(Eigen::VectorXd raw, const FiniteMetricSpace& space, double target,
                               std::string name) {
  double norm = lipschitz_seminorm(raw, space);
  if (norm > 0.0) raw *= target / norm;
  return Observable{std::move(raw), target, std::move(name)};
}

}  // namespace mcmccert
