#pragma once

#include <Eigen/Core>
#include <vector>

namespace mcmccert {

// Probability distribution with finite support over point indices of a
// FiniteMetricSpace. Support indices are strictly increasing; weights are
// nonnegative and sum to 1 (checked at construction). Immutable.
class FiniteDistribution {
 public:
  FiniteDistribution(std::vector<int> support, Eigen::VectorXd weights);

  static FiniteDistribution delta(int point);
  static FiniteDistribution uniform(int n_points);
  // Builds from a dense weight vector, keeping strictly positive entries.
  static FiniteDistribution from_dense(const Eigen::VectorXd& weights);

  const std::vector<int>& support() const { return support_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }

  double mass() const { return weights_.sum(); }
  // Weight carried by `point`; 0 when the point is outside the support.
  double weight_at(int point) const;
  Eigen::VectorXd dense(int n_points) const;
  // sum_i w_i f[support_i] for a dense function table.
  double expectation(const Eigen::VectorXd& f) const;

 private:
  std::vector<int> support_;
  Eigen::VectorXd weights_;
};

double total_variation(const FiniteDistribution& a, const FiniteDistribution& b);

}  // namespace mcmccert
