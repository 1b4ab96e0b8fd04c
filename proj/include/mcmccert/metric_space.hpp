#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mcmccert/rng.hpp"

namespace mcmccert {

// Finite metric space over points 0..n-1. Distances come from a callback and
// are cached as a dense matrix up to kDenseCacheLimit points; above that they
// are recomputed on demand. Optionally carries a list of neighbor pairs
// (graph/geodesic structure) used by the neighbor-pair curvature sweep.
// Immutable after construction and safe to share across threads.
class FiniteMetricSpace {
 public:
  using DistFn = std::function<double(int, int)>;
  static constexpr int kDenseCacheLimit = 4096;

  FiniteMetricSpace(int n, DistFn dist,
                    std::vector<std::pair<int, int>> neighbor_pairs = {},
                    std::vector<std::string> labels = {});

  int size() const { return n_; }

  double dist(int i, int j) const {
    if (cached_) return cache_(i, j);
    return dist_fn_(i, j);
  }

  bool has_cached_matrix() const { return cached_; }
  const Eigen::MatrixXd& dist_matrix() const;

  bool has_neighbor_pairs() const { return !neighbor_pairs_.empty(); }
  const std::vector<std::pair<int, int>>& neighbor_pairs() const { return neighbor_pairs_; }

  std::string label(int i) const;

  // Max pairwise distance; O(n^2) distance evaluations when uncached.
  double diameter() const;

 private:
  int n_;
  DistFn dist_fn_;
  std::vector<std::pair<int, int>> neighbor_pairs_;
  std::vector<std::string> labels_;
  Eigen::MatrixXd cache_;
  bool cached_ = false;
};

using MetricSpacePtr = std::shared_ptr<const FiniteMetricSpace>;

// Spot-checks the metric axioms (zero diagonal, positivity off the diagonal,
// symmetry, triangle inequality on random triples). Throws Error("MetricViolated").
void check_metric_axioms(const FiniteMetricSpace& space, RngStream& rng,
                         int triples = 512, double tol = 1e-12);

// Verifies that shortest-path distance through the declared neighbor pairs
// reproduces dist() on all pairs. Throws Error("NeighborMetricMismatch").
void check_neighbor_generation(const FiniteMetricSpace& space, double tol = 1e-9);

// Convenience constructors.
FiniteMetricSpace make_trivial_metric_space(int n);                    // d = 1_{x != y}
FiniteMetricSpace make_point_cloud_space(const Eigen::MatrixXd& pts);  // Euclidean, rows = points

}  // namespace mcmccert
