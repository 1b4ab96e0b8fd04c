#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "mcmccert/distribution.hpp"
#include "mcmccert/metric_space.hpp"
#include "mcmccert/observable.hpp"
#include "mcmccert/rng.hpp"

namespace mcmccert::testing {

// Euclidean point cloud in the plane.
inline FiniteMetricSpace random_point_space(RngStream& rng, int n_points, int dim = 2,
                                            double scale = 3.0) {
  Eigen::MatrixXd pts(n_points, dim);
  for (int i = 0; i < n_points; ++i)
    for (int d = 0; d < dim; ++d) pts(i, d) = scale * rng.normal();
  return make_point_cloud_space(pts);
}

// Random distribution supported on `support_size` distinct points of an
// n-point space.
inline FiniteDistribution random_distribution(RngStream& rng, int n_points, int support_size) {
  std::vector<int> all(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) all[static_cast<std::size_t>(i)] = i;
  for (int i = n_points - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  std::vector<int> support(all.begin(), all.begin() + support_size);
  Eigen::VectorXd w(support_size);
  for (int i = 0; i < support_size; ++i) w[i] = -std::log(1.0 - rng.uniform01());
  w /= w.sum();
  return FiniteDistribution(std::move(support), std::move(w));
}

// Random table rescaled to an exact target Lipschitz seminorm.
inline Observable random_lipschitz(RngStream& rng, const FiniteMetricSpace& space, double target,
                                   const std::string& name) {
  Eigen::VectorXd raw(space.size());
  for (int i = 0; i < space.size(); ++i) raw[i] = rng.normal();
  return scaled_to_lipschitz(std::move(raw), space, target, name);
}

inline std::shared_ptr<const FiniteMetricSpace> shared_space(FiniteMetricSpace space) {
  return std::make_shared<const FiniteMetricSpace>(std::move(space));
}

}  // namespace mcmccert::testing
